//! Canonical source formatter. Parsing the printed text yields a document
//! structurally equal to the one printed.

use alloc::string::String;
use core::fmt::Write;

use rust_decimal::Decimal;

use super::ast::*;
use crate::pricing::{PerUnitPrice, PriceComponent};

const INDENT: &str = "    ";

pub fn print_document(doc: &Document) -> String {
    let mut out = String::new();
    for v in &doc.vocabularies {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_vocabulary(v));
    }
    for s in &doc.services {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_service(s));
    }
    out
}

pub fn print_vocabulary(v: &Vocabulary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vocabulary {} {{", v.id);
    for set in &v.feature_sets {
        let _ = writeln!(
            out,
            "{INDENT}features {} {{ {} }}",
            set.name,
            set.features.join(" ")
        );
    }
    for p in &v.properties {
        let _ = writeln!(out, "{INDENT}property {} : {} {{", p.name, p.ty);
        let _ = writeln!(out, "{INDENT}{INDENT}doc {}", quote(&p.doc));
        if !p.relevance.is_empty() {
            let _ = writeln!(out, "{INDENT}{INDENT}relevance {}", quote(&p.relevance));
        }
        let _ = writeln!(out, "{INDENT}{INDENT}importance {}", p.importance);
        let _ = writeln!(out, "{INDENT}}}");
    }
    out.push_str("}\n");
    out
}

pub fn print_service(s: &ServiceDescription) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "service {} uses {} {{", s.id, s.vocabulary_id);
    for a in &s.assignments {
        let _ = writeln!(out, "{INDENT}set {} {}", a.property, value(&a.value));
    }
    for p in &s.prices {
        let _ = writeln!(out, "{INDENT}{}", price(p));
    }
    for r in &s.fetch_rules {
        let _ = writeln!(
            out,
            "{INDENT}fetch {} from {} extract {} {} as {} every {}s",
            r.target,
            quote(&r.url),
            r.extractor.kind(),
            quote(r.extractor.expression()),
            r.parse_as,
            r.interval_secs
        );
    }
    for d in &s.dimensions {
        let _ = writeln!(out, "{INDENT}dimension {} {{", d.name);
        for o in &d.options {
            if o.assignments.is_empty() && o.prices.is_empty() {
                let _ = writeln!(out, "{INDENT}{INDENT}option {} {{ }}", o.id);
                continue;
            }
            let _ = writeln!(out, "{INDENT}{INDENT}option {} {{", o.id);
            for a in &o.assignments {
                let _ = writeln!(
                    out,
                    "{INDENT}{INDENT}{INDENT}set {} {}",
                    a.property,
                    value(&a.value)
                );
            }
            for p in &o.prices {
                let _ = writeln!(out, "{INDENT}{INDENT}{INDENT}{}", price(p));
            }
            let _ = writeln!(out, "{INDENT}{INDENT}}}");
        }
        let _ = writeln!(out, "{INDENT}}}");
    }
    for e in &s.exclusions {
        out.push_str(INDENT);
        out.push_str("exclude {");
        for (d, o) in &e.bindings {
            let _ = write!(out, " {d} = {o}");
        }
        out.push_str(" }\n");
    }
    out.push_str("}\n");
    out
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Decimal literal that re-lexes as a decimal (always has a point).
fn decimal_literal(d: Decimal) -> String {
    let mut s = alloc::format!("{}", d.normalize());
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

fn number(d: Decimal) -> String {
    alloc::format!("{}", d.normalize())
}

fn value(v: &TypedValue) -> String {
    match v {
        TypedValue::String(s) | TypedValue::Text(s) => quote(s),
        TypedValue::Bool(b) => alloc::format!("{b}"),
        TypedValue::Integer(i) => alloc::format!("{i}"),
        TypedValue::Decimal(d) => decimal_literal(*d),
        TypedValue::Money(m) => alloc::format!("{} {}", number(m.amount), m.currency),
        TypedValue::Url(u) => u.clone(),
        TypedValue::Quantity { magnitude, unit } => alloc::format!("{} {unit}", number(*magnitude)),
        TypedValue::Enum(m) => m.clone(),
        TypedValue::Features(f) => {
            let items: alloc::vec::Vec<&str> = f.iter().map(String::as_str).collect();
            alloc::format!("[{}]", items.join(", "))
        }
    }
}

fn money(m: &Money) -> String {
    alloc::format!("{} {}", number(m.amount), m.currency)
}

fn price(p: &PriceComponent) -> String {
    match p {
        PriceComponent::Fixed { amount, period } => {
            alloc::format!("price fixed {} per {}", money(amount), period.as_str())
        }
        PriceComponent::OneTime { amount } => alloc::format!("price one_time {}", money(amount)),
        PriceComponent::PerUnit(PerUnitPrice {
            metric,
            unit_price,
            period,
            included,
            tiers,
        }) => {
            let mut out = alloc::format!(
                "price per_unit {metric} {} per {}",
                money(unit_price),
                period.as_str()
            );
            if !included.is_zero() {
                let _ = write!(out, " included {}", number(*included));
            }
            if let Some(t) = tiers {
                let _ = write!(out, " tiers {} {{", t.mode.as_str());
                for band in &t.bands {
                    match band.upto {
                        Some(b) => {
                            let _ = write!(out, " upto {} {}", number(b), money(&band.unit_price));
                        }
                        None => {
                            let _ = write!(out, " upto inf {}", money(&band.unit_price));
                        }
                    }
                }
                out.push_str(" }");
            }
            out
        }
    }
}
