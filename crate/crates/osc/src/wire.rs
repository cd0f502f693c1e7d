//! Parsing of request bodies. Every problem is reported with the path of
//! the offending field, e.g. `soft[1].goal.direction`.

use std::collections::BTreeSet;
use std::str::FromStr;

use osc_core::matchmaker::{
    Direction, Goal, HardConstraint, MatchRequest, RequestError, Scalar, SoftConstraint,
};
use osc_core::pricing::UsageProfile;
use osc_core::Decimal;
use serde_json::{Map, Value};

/// A match request together with the vocabulary it names, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchQuery {
    pub vocabulary: Option<String>,
    pub request: MatchRequest,
}

struct Errors(Vec<RequestError>);

impl Errors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(RequestError {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn parse_json(text: &str) -> Result<Value, Vec<RequestError>> {
    serde_json::from_str(text).map_err(|e| {
        vec![RequestError {
            path: String::new(),
            message: format!("malformed JSON: {e}"),
        }]
    })
}

fn object<'a>(v: &'a Value, path: &str, errors: &mut Errors) -> Option<&'a Map<String, Value>> {
    let o = v.as_object();
    if o.is_none() {
        errors.push(path, "expected an object");
    }
    o
}

fn reject_unknown(o: &Map<String, Value>, known: &[&str], path: &str, errors: &mut Errors) {
    for k in o.keys() {
        if !known.contains(&k.as_str()) {
            errors.push(join(path, k), "unknown field");
        }
    }
}

fn join(path: &str, field: &str) -> String {
    if path.is_empty() {
        field.to_string()
    } else {
        format!("{path}.{field}")
    }
}

fn string(o: &Map<String, Value>, key: &str, path: &str, errors: &mut Errors) -> Option<String> {
    match o.get(key) {
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(join(path, key), "expected a string");
            None
        }
        None => {
            errors.push(join(path, key), "missing field");
            None
        }
    }
}

/// Exact decimal from a JSON number or numeric string.
pub fn decimal_of(v: &Value) -> Option<Decimal> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.trim().to_string(),
        _ => return None,
    };
    Decimal::from_str(&text)
        .or_else(|_| Decimal::from_scientific(&text))
        .ok()
}

fn optional_decimal(
    o: &Map<String, Value>,
    key: &str,
    path: &str,
    errors: &mut Errors,
) -> Option<Decimal> {
    match o.get(key) {
        None | Some(Value::Null) => None,
        Some(v) => {
            let d = decimal_of(v);
            if d.is_none() {
                errors.push(join(path, key), "expected a number");
            }
            d
        }
    }
}

fn array<'a>(o: &'a Map<String, Value>, key: &str, path: &str, errors: &mut Errors) -> &'a [Value] {
    match o.get(key) {
        Some(Value::Array(items)) => items,
        Some(_) => {
            errors.push(join(path, key), "expected an array");
            &[]
        }
        None => {
            errors.push(join(path, key), "missing field");
            &[]
        }
    }
}

fn scalars(o: &Map<String, Value>, path: &str, errors: &mut Errors) -> Vec<Scalar> {
    let mut out = Vec::new();
    for (i, v) in array(o, "values", path, errors).iter().enumerate() {
        match v {
            Value::String(s) => out.push(Scalar::Text(s.clone())),
            Value::Bool(b) => out.push(Scalar::Bool(*b)),
            Value::Number(_) => match decimal_of(v) {
                Some(d) => out.push(Scalar::Number(d)),
                None => errors.push(format!("{path}.values[{i}]"), "number out of range"),
            },
            _ => errors.push(
                format!("{path}.values[{i}]"),
                "expected a string, boolean or number",
            ),
        }
    }
    out
}

fn features(o: &Map<String, Value>, path: &str, errors: &mut Errors) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, v) in array(o, "features", path, errors).iter().enumerate() {
        match v.as_str() {
            Some(s) => {
                out.insert(s.to_string());
            }
            None => errors.push(format!("{path}.features[{i}]"), "expected a string"),
        }
    }
    out
}

fn hard_constraint(v: &Value, path: &str, errors: &mut Errors) -> Option<HardConstraint> {
    let o = object(v, path, errors)?;
    let op = string(o, "op", path, errors)?;
    let property = string(o, "property", path, errors)?;
    match op.as_str() {
        "equals_one_of" => {
            reject_unknown(o, &["op", "property", "values"], path, errors);
            Some(HardConstraint::EqualsOneOf {
                property,
                values: scalars(o, path, errors),
            })
        }
        "in_range" => {
            reject_unknown(o, &["op", "property", "min", "max"], path, errors);
            Some(HardConstraint::InRange {
                property,
                min: optional_decimal(o, "min", path, errors),
                max: optional_decimal(o, "max", path, errors),
            })
        }
        "has_all_features" => {
            reject_unknown(o, &["op", "property", "features"], path, errors);
            Some(HardConstraint::HasAllFeatures {
                property,
                features: features(o, path, errors),
            })
        }
        other => {
            errors.push(join(path, "op"), format!("unknown operator `{other}`"));
            None
        }
    }
}

fn goal(v: &Value, path: &str, errors: &mut Errors) -> Option<Goal> {
    let o = object(v, path, errors)?;
    let kind = string(o, "kind", path, errors)?;
    let property = string(o, "property", path, errors)?;
    match kind.as_str() {
        "prefer_values" => {
            reject_unknown(o, &["kind", "property", "values"], path, errors);
            Some(Goal::PreferValues {
                property,
                values: scalars(o, path, errors),
            })
        }
        "tendency" => {
            reject_unknown(o, &["kind", "property", "direction"], path, errors);
            let direction = match string(o, "direction", path, errors)?.as_str() {
                "positive" => Direction::Positive,
                "negative" => Direction::Negative,
                other => {
                    errors.push(
                        join(path, "direction"),
                        format!("expected positive or negative, found `{other}`"),
                    );
                    return None;
                }
            };
            Some(Goal::Tendency {
                property,
                direction,
            })
        }
        "cover_features" => {
            reject_unknown(o, &["kind", "property", "features"], path, errors);
            Some(Goal::CoverFeatures {
                property,
                features: features(o, path, errors),
            })
        }
        other => {
            errors.push(join(path, "kind"), format!("unknown goal `{other}`"));
            None
        }
    }
}

fn soft_constraint(v: &Value, path: &str, errors: &mut Errors) -> Option<SoftConstraint> {
    let o = object(v, path, errors)?;
    reject_unknown(o, &["weight", "goal"], path, errors);
    let weight = match o.get("weight") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(_) => {
            errors.push(join(path, "weight"), "expected a number");
            None
        }
        None => {
            errors.push(join(path, "weight"), "missing field");
            None
        }
    };
    let goal = match o.get("goal") {
        Some(g) => goal(g, &join(path, "goal"), errors),
        None => {
            errors.push(join(path, "goal"), "missing field");
            None
        }
    };
    Some(SoftConstraint {
        weight: weight?,
        goal: goal?,
    })
}

/// Parses the request JSON. Structural problems are reported here; whether
/// properties exist and types fit is checked against the vocabulary later.
pub fn parse_match_request(text: &str) -> Result<MatchQuery, Vec<RequestError>> {
    let value = parse_json(text)?;
    let mut errors = Errors(Vec::new());
    let Some(o) = object(&value, "", &mut errors) else {
        return Err(errors.0);
    };
    reject_unknown(o, &["vocabulary", "hard", "soft"], "", &mut errors);
    let vocabulary = match o.get("vocabulary") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push("vocabulary", "expected a string");
            None
        }
    };
    let mut request = MatchRequest::default();
    let list = |key: &str, errors: &mut Errors| -> Vec<Value> {
        match o.get(key) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items.clone(),
            Some(_) => {
                errors.push(key, "expected an array");
                Vec::new()
            }
        }
    };
    for (i, h) in list("hard", &mut errors).iter().enumerate() {
        if let Some(c) = hard_constraint(h, &format!("hard[{i}]"), &mut errors) {
            request.hard.push(c);
        }
    }
    for (i, s) in list("soft", &mut errors).iter().enumerate() {
        if let Some(c) = soft_constraint(s, &format!("soft[{i}]"), &mut errors) {
            request.soft.push(c);
        }
    }
    if errors.0.is_empty() {
        Ok(MatchQuery {
            vocabulary,
            request,
        })
    } else {
        Err(errors.0)
    }
}

/// `{"horizon_months": n, "metrics": {"storage": 150}}`; the horizon
/// defaults to one month.
pub fn parse_usage(text: &str) -> Result<UsageProfile, Vec<RequestError>> {
    let value = parse_json(text)?;
    let mut errors = Errors(Vec::new());
    let Some(o) = object(&value, "", &mut errors) else {
        return Err(errors.0);
    };
    reject_unknown(o, &["horizon_months", "metrics"], "", &mut errors);
    let horizon = match o.get("horizon_months") {
        None => 1,
        Some(v) => match v.as_u64().and_then(|n| u32::try_from(n).ok()) {
            Some(n) if n >= 1 => n,
            _ => {
                errors.push("horizon_months", "expected a positive integer");
                1
            }
        },
    };
    let mut usage = UsageProfile::new(horizon);
    match o.get("metrics") {
        None => {}
        Some(Value::Object(metrics)) => {
            for (k, v) in metrics {
                match decimal_of(v) {
                    Some(d) if d >= Decimal::ZERO => usage = usage.with(k, d),
                    Some(_) => errors.push(format!("metrics.{k}"), "quantity must not be negative"),
                    None => errors.push(format!("metrics.{k}"), "expected a number"),
                }
            }
        }
        Some(_) => errors.push("metrics", "expected an object"),
    }
    if errors.0.is_empty() {
        Ok(usage)
    } else {
        Err(errors.0)
    }
}
