//! Canonical JSON: compact, object keys sorted, decimals written exactly.
//!
//! Every JSON document the compendium emits goes through [`Json`], so equal
//! values always serialise to equal bytes.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use rust_decimal::Decimal;

use crate::matchmaker::RankedVariant;
use crate::pricing::{PriceComponent, PriceQuote};
use crate::sdl::{Extractor, Money, ServiceDescription, TypedValue, Vocabulary};
use crate::variants::ResolvedVariant;

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    /// Number literal, already in JSON syntax.
    Number(String),
    String(String),
    Array(Vec<Json>),
    Object(BTreeMap<String, Json>),
    /// Pre-serialised canonical JSON, spliced in verbatim.
    Raw(String),
}

impl Json {
    pub fn str(s: impl Into<String>) -> Json {
        Json::String(s.into())
    }

    pub fn decimal(d: Decimal) -> Json {
        Json::Number(d.normalize().to_string())
    }

    pub fn int(i: impl Into<i128>) -> Json {
        Json::Number(i.into().to_string())
    }

    /// Shortest round-trip form; non-finite values become `null`.
    pub fn float(f: f64) -> Json {
        if f.is_finite() {
            let text = alloc::format!("{f:?}");
            Json::Number(text.strip_suffix(".0").unwrap_or(&text).to_string())
        } else {
            Json::Null
        }
    }

    pub fn object<K: Into<String>>(fields: impl IntoIterator<Item = (K, Json)>) -> Json {
        Json::Object(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn array(items: impl IntoIterator<Item = Json>) -> Json {
        Json::Array(items.into_iter().collect())
    }

    pub fn write(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Number(n) | Json::Raw(n) => out.push_str(n),
            Json::String(s) => write_string(s, out),
            Json::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Json::Object(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_string(k, out);
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

pub fn money_json(m: &Money) -> Json {
    Json::object([
        ("amount", Json::decimal(m.amount)),
        ("currency", Json::str(m.currency.as_str())),
    ])
}

pub fn value_json(v: &TypedValue) -> Json {
    match v {
        TypedValue::String(s) | TypedValue::Text(s) | TypedValue::Url(s) | TypedValue::Enum(s) => {
            Json::str(s.as_str())
        }
        TypedValue::Bool(b) => Json::Bool(*b),
        TypedValue::Integer(i) => Json::int(*i),
        TypedValue::Decimal(d) => Json::decimal(*d),
        TypedValue::Money(m) => money_json(m),
        TypedValue::Quantity { magnitude, unit } => Json::object([
            ("magnitude", Json::decimal(*magnitude)),
            ("unit", Json::str(unit.symbol())),
        ]),
        TypedValue::Features(f) => Json::array(f.iter().map(|x| Json::str(x.as_str()))),
    }
}

pub fn properties_json(props: &BTreeMap<String, TypedValue>) -> Json {
    Json::object(props.iter().map(|(k, v)| (k.as_str(), value_json(v))))
}

pub fn price_json(p: &PriceComponent) -> Json {
    match p {
        PriceComponent::Fixed { amount, period } => Json::object([
            ("kind", Json::str("fixed")),
            ("amount", money_json(amount)),
            ("period", Json::str(period.as_str())),
        ]),
        PriceComponent::OneTime { amount } => Json::object([
            ("kind", Json::str("one_time")),
            ("amount", money_json(amount)),
        ]),
        PriceComponent::PerUnit(u) => {
            let mut fields = BTreeMap::new();
            fields.insert("kind".into(), Json::str("per_unit"));
            fields.insert("metric".into(), Json::str(u.metric.as_str()));
            fields.insert("unit_price".into(), money_json(&u.unit_price));
            fields.insert("period".into(), Json::str(u.period.as_str()));
            fields.insert("included".into(), Json::decimal(u.included));
            if let Some(t) = &u.tiers {
                let bands = t.bands.iter().map(|b| {
                    Json::object([
                        ("upto", b.upto.map_or(Json::Null, Json::decimal)),
                        ("unit_price", money_json(&b.unit_price)),
                    ])
                });
                fields.insert(
                    "tiers".into(),
                    Json::object([
                        ("mode", Json::str(t.mode.as_str())),
                        ("bands", Json::array(bands)),
                    ]),
                );
            }
            Json::Object(fields)
        }
    }
}

fn prices_json(prices: &[PriceComponent]) -> Json {
    Json::array(prices.iter().map(price_json))
}

fn extractor_json(e: &Extractor) -> Json {
    Json::object([
        ("kind", Json::str(e.kind())),
        ("expression", Json::str(e.expression())),
    ])
}

/// Structured form of a description, without source positions.
pub fn service_json(s: &ServiceDescription) -> Json {
    let dimensions = s.dimensions.iter().map(|d| {
        let options = d.options.iter().map(|o| {
            Json::object([
                ("id", Json::str(o.id.as_str())),
                (
                    "properties",
                    properties_json(&crate::sdl::assignments_map(&o.assignments)),
                ),
                ("prices", prices_json(&o.prices)),
            ])
        });
        Json::object([
            ("name", Json::str(d.name.as_str())),
            ("options", Json::array(options)),
        ])
    });
    let exclusions = s.exclusions.iter().map(|e| {
        Json::object(
            e.bindings
                .iter()
                .map(|(d, o)| (d.as_str(), Json::str(o.as_str()))),
        )
    });
    let fetch = s.fetch_rules.iter().map(|r| {
        Json::object([
            ("target", Json::str(r.target.as_str())),
            ("url", Json::str(r.url.as_str())),
            ("extractor", extractor_json(&r.extractor)),
            ("parse_as", Json::str(r.parse_as.to_string())),
            ("interval_secs", Json::int(r.interval_secs)),
        ])
    });
    Json::object([
        ("id", Json::str(s.id.as_str())),
        ("vocabulary", Json::str(s.vocabulary_id.as_str())),
        ("properties", properties_json(&s.base_properties())),
        ("prices", prices_json(&s.prices)),
        ("dimensions", Json::array(dimensions)),
        ("exclusions", Json::array(exclusions)),
        ("fetch", Json::array(fetch)),
    ])
}

/// Canonical bytes of a resolved description. Equal descriptions give
/// equal bytes regardless of statement order in the source.
pub fn export_canonical_json(s: &ServiceDescription) -> Vec<u8> {
    service_json(s).to_text().into_bytes()
}

pub fn vocabulary_json(v: &Vocabulary) -> Json {
    let sets = v.feature_sets.iter().map(|s| {
        Json::object([
            ("name", Json::str(s.name.as_str())),
            (
                "features",
                Json::array(s.features.iter().map(|f| Json::str(f.as_str()))),
            ),
        ])
    });
    let props = v.properties.iter().map(|p| {
        Json::object([
            ("name", Json::str(p.name.as_str())),
            ("type", Json::str(p.ty.to_string())),
            ("doc", Json::str(p.doc.as_str())),
            ("relevance", Json::str(p.relevance.as_str())),
            ("importance", Json::int(p.importance)),
        ])
    });
    Json::object([
        ("id", Json::str(v.id.as_str())),
        ("feature_sets", Json::array(sets)),
        ("properties", Json::array(props)),
    ])
}

pub fn variant_json(v: &ResolvedVariant) -> Json {
    Json::object([
        ("service_id", Json::str(v.service_id.as_str())),
        ("variant_id", Json::str(v.variant_id.as_str())),
        ("properties", properties_json(&v.properties)),
        ("prices", prices_json(&v.price_components)),
    ])
}

pub fn quote_json(q: &PriceQuote, components: &[PriceComponent]) -> Json {
    let items = q.line_items.iter().map(|li| {
        let kind = components
            .get(li.component)
            .map_or("", PriceComponent::kind);
        Json::object([
            ("component", Json::int(li.component as u64)),
            ("kind", Json::str(kind)),
            ("billed_quantity", Json::decimal(li.billed_quantity)),
            ("cost", Json::decimal(li.cost)),
        ])
    });
    Json::object([
        (
            "currency",
            q.currency
                .as_ref()
                .map_or(Json::Null, |c| Json::str(c.as_str())),
        ),
        ("total", Json::decimal(q.total)),
        ("line_items", Json::array(items)),
    ])
}

pub fn ranked_json(r: &RankedVariant) -> Json {
    Json::object([
        ("service_id", Json::str(r.service_id.as_str())),
        ("variant_id", Json::str(r.variant_id.as_str())),
        ("score", Json::float(r.score)),
        (
            "constraint_scores",
            Json::array(r.constraint_scores.iter().map(|&s| Json::float(s))),
        ),
    ])
}
