//! Type checking of service descriptions against a vocabulary.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::error::ParseError;
use super::parser::is_http_url;

/// Checks every assignment, exclusion, price and fetch rule of `service`
/// against `vocab`.
pub fn validate(service: &ServiceDescription, vocab: &Vocabulary) -> Result<(), Vec<ParseError>> {
    check_service(service, vocab).map(|_| ())
}

/// Validates `service` and returns a copy whose values carry their declared
/// types: strings become text where declared, integers widen to decimals,
/// quantities are converted into the property's unit. The result is the
/// form that expansion, pricing, matching and export operate on.
pub fn check_service(
    service: &ServiceDescription,
    vocab: &Vocabulary,
) -> Result<ServiceDescription, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut out = service.clone();
    if service.vocabulary_id != vocab.id {
        errors.push(ParseError::error(
            service.origin,
            format!(
                "service `{}` uses vocabulary `{}`, not `{}`",
                service.id, service.vocabulary_id, vocab.id
            ),
        ));
    }

    check_assignments(&mut out.assignments, vocab, &mut errors);
    for dim in &mut out.dimensions {
        for option in &mut dim.options {
            check_assignments(&mut option.assignments, vocab, &mut errors);
        }
    }
    check_exclusions(service, &mut errors);
    check_currencies(service, &mut errors);
    check_fetch_rules(service, vocab, &mut errors);

    if errors.is_empty() {
        Ok(out)
    } else {
        errors.sort_by_key(|e| (e.line, e.column));
        Err(errors)
    }
}

fn check_assignments(
    assignments: &mut [Assignment],
    vocab: &Vocabulary,
    errors: &mut Vec<ParseError>,
) {
    for a in assignments {
        let Some(def) = vocab.property(&a.property) else {
            errors.push(ParseError::error(
                a.origin,
                format!(
                    "unknown property `{}` in vocabulary `{}`",
                    a.property, vocab.id
                ),
            ));
            continue;
        };
        match coerce(&a.value, &def.ty, vocab) {
            Ok(v) => a.value = v,
            Err(msg) => errors.push(ParseError::error(
                a.origin,
                format!("`{}`: {msg}", a.property),
            )),
        }
    }
}

fn mismatch(ty: &PropertyType, value: &TypedValue) -> String {
    format!("type mismatch: expected {ty}, found {}", value.kind_name())
}

/// Converts a parsed value into the declared type, or explains why it
/// does not fit.
pub fn coerce(
    value: &TypedValue,
    ty: &PropertyType,
    vocab: &Vocabulary,
) -> Result<TypedValue, String> {
    use TypedValue as V;
    match (ty, value) {
        (PropertyType::String, V::String(s) | V::Text(s)) => Ok(V::String(s.clone())),
        (PropertyType::Text, V::String(s) | V::Text(s)) => Ok(V::Text(s.clone())),
        (PropertyType::Boolean, V::Bool(b)) => Ok(V::Bool(*b)),
        (PropertyType::Integer, V::Integer(i)) => Ok(V::Integer(*i)),
        (PropertyType::Decimal, V::Integer(i)) => Ok(V::Decimal((*i).into())),
        (PropertyType::Decimal, V::Decimal(d)) => Ok(V::Decimal(d.normalize())),
        (PropertyType::Money, V::Money(m)) => Ok(V::Money(Money::new(
            m.amount.normalize(),
            m.currency.clone(),
        ))),
        (PropertyType::Url, V::Url(u) | V::String(u)) if is_http_url(u) => Ok(V::Url(u.clone())),
        (PropertyType::Url, V::String(u)) => Err(format!("`{u}` is not an absolute http(s) url")),
        (PropertyType::Quantity(target), V::Quantity { magnitude, unit }) => unit
            .convert(*magnitude, *target)
            .map(|magnitude| V::Quantity {
                magnitude: magnitude.normalize(),
                unit: *target,
            })
            .ok_or_else(|| format!("cannot convert {unit} into {target}")),
        (PropertyType::Enum(members), V::Enum(m)) => {
            if members.contains(m) {
                Ok(V::Enum(m.clone()))
            } else {
                Err(format!(
                    "unknown enum member `{m}` (expected one of {})",
                    members.join(", ")
                ))
            }
        }
        (PropertyType::Features(set_name), V::Features(_) | V::Enum(_)) => {
            let offered: BTreeSet<String> = match value {
                V::Features(f) => f.clone(),
                V::Enum(single) => [single.clone()].into_iter().collect(),
                _ => unreachable!(),
            };
            let declared = vocab
                .feature_set(set_name)
                .ok_or_else(|| format!("undeclared feature set `{set_name}`"))?;
            for f in &offered {
                if !declared.features.contains(f) {
                    return Err(format!("unknown feature `{f}` in set `{set_name}`"));
                }
            }
            Ok(V::Features(offered))
        }
        _ => Err(mismatch(ty, value)),
    }
}

fn check_exclusions(service: &ServiceDescription, errors: &mut Vec<ParseError>) {
    for ex in &service.exclusions {
        let mut seen = BTreeSet::new();
        for (dim, opt) in &ex.bindings {
            if !seen.insert(dim.as_str()) {
                errors.push(ParseError::error(
                    ex.origin,
                    format!("exclusion binds dimension `{dim}` more than once"),
                ));
            }
            match service.dimension(dim) {
                None => errors.push(ParseError::error(
                    ex.origin,
                    format!("exclusion references unknown dimension `{dim}`"),
                )),
                Some(d) if d.option_index(opt).is_none() => errors.push(ParseError::error(
                    ex.origin,
                    format!("exclusion references unknown option `{opt}` of dimension `{dim}`"),
                )),
                Some(_) => {}
            }
        }
    }
}

fn check_currencies(service: &ServiceDescription, errors: &mut Vec<ParseError>) {
    let mut first: Option<&Currency> = None;
    let base = service.prices.iter().map(|p| (service.origin, p));
    let options = service
        .dimensions
        .iter()
        .flat_map(|d| d.options.iter())
        .flat_map(|o| o.prices.iter().map(move |p| (o.origin, p)));
    for (origin, component) in base.chain(options) {
        for money in component.money_values() {
            match first {
                None => first = Some(&money.currency),
                Some(c) if c != &money.currency => {
                    errors.push(ParseError::error(
                        origin,
                        format!(
                            "mixed currencies in price model: {c} and {}",
                            money.currency
                        ),
                    ));
                    return;
                }
                Some(_) => {}
            }
        }
    }
}

fn types_compatible(fetched: &PropertyType, declared: &PropertyType) -> bool {
    use PropertyType as T;
    match (fetched, declared) {
        (T::String | T::Text, T::String | T::Text) => true,
        (T::Integer, T::Decimal) => true,
        (T::Quantity(a), T::Quantity(b)) => a.kind() == b.kind(),
        (T::Enum(_), T::Enum(_)) => true,
        (a, b) => a == b,
    }
}

fn check_fetch_rules(
    service: &ServiceDescription,
    vocab: &Vocabulary,
    errors: &mut Vec<ParseError>,
) {
    let mut targets = BTreeSet::new();
    for rule in &service.fetch_rules {
        let at = rule.origin;
        if !targets.insert(rule.target.as_str()) {
            errors.push(ParseError::error(
                at,
                format!("more than one fetch rule targets `{}`", rule.target),
            ));
        }
        match vocab.property(&rule.target) {
            None => errors.push(ParseError::error(
                at,
                format!(
                    "fetch target `{}` is not a property of `{}`",
                    rule.target, vocab.id
                ),
            )),
            Some(def) if !types_compatible(&rule.parse_as, &def.ty) => {
                errors.push(ParseError::error(
                    at,
                    format!(
                        "fetch rule parses `{}` as {}, but the property is {}",
                        rule.target, rule.parse_as, def.ty
                    ),
                ))
            }
            Some(_) => {}
        }
        if matches!(rule.parse_as, PropertyType::Features(_)) {
            errors.push(ParseError::error(
                at,
                "fetch rules cannot produce feature lists",
            ));
        }
        if let Extractor::Regex(pattern) = &rule.extractor {
            let groups = capture_groups(pattern);
            if groups != 1 {
                errors.push(ParseError::error(
                    at,
                    format!("regex extractor needs exactly one capture group, found {groups}"),
                ));
            }
        }
    }
}

/// Counts capturing groups in a regular expression without compiling it.
pub fn capture_groups(pattern: &str) -> usize {
    let mut count = 0;
    let mut chars = pattern.chars().peekable();
    let mut in_class = false;
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                chars.next();
            }
            '[' if !in_class => {
                in_class = true;
                // a leading ']' is literal inside a class
                if chars.peek() == Some(&'^') {
                    chars.next();
                }
                if chars.peek() == Some(&']') {
                    chars.next();
                }
            }
            ']' if in_class => in_class = false,
            '(' if !in_class => {
                if chars.peek() == Some(&'?') {
                    chars.next();
                    let rest: String = chars.clone().take(2).collect();
                    if rest.starts_with('P')
                        || (rest.starts_with('<')
                            && !rest.starts_with("<=")
                            && !rest.starts_with("<!"))
                    {
                        count += 1;
                    }
                } else {
                    count += 1;
                }
            }
            _ => {}
        }
    }
    count
}
