use alloc::string::String;
use core::fmt::Write;

use super::ast::{PropertyType, Vocabulary};

pub fn importance_label(level: u8) -> &'static str {
    match level {
        1 => "indispensable",
        2 => "very important",
        3 => "important",
        4 => "less important",
        _ => "irrelevant",
    }
}

/// Renders a markdown overview of every property of `vocab`, one `###`
/// section per property in declaration order.
pub fn export_cheatsheet(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Vocabulary `{}`\n", vocab.id);
    let _ = writeln!(out, "## Properties\n");
    for p in &vocab.properties {
        let _ = writeln!(out, "### `{}`\n", p.name);
        let _ = writeln!(out, "- **Type:** `{}`", p.ty);
        let _ = writeln!(
            out,
            "- **Importance:** {} ({})",
            p.importance,
            importance_label(p.importance)
        );
        if let PropertyType::Enum(members) = &p.ty {
            out.push_str("- **Values:**");
            for m in members {
                let _ = write!(out, " `{m}`");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\n{}\n", p.doc.trim());
        if !p.relevance.trim().is_empty() {
            let _ = writeln!(out, "**Why it matters:** {}\n", p.relevance.trim());
        }
    }
    if !vocab.feature_sets.is_empty() {
        let _ = writeln!(out, "## Feature Sets\n");
        for set in &vocab.feature_sets {
            let _ = write!(out, "- **{}**:", set.name);
            for f in &set.features {
                let _ = write!(out, " `{f}`");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdl::parse_vocabulary;

    #[test]
    fn one_section_per_property() {
        let v = parse_vocabulary(
            r#"vocabulary v {
                property a : enum(DE, US, EU) { doc "Where." relevance "Law." importance 1 }
                property b : integer { doc "How many." importance 5 }
            }"#,
        )
        .unwrap();
        let md = export_cheatsheet(&v);
        assert_eq!(md.matches("\n### ").count(), 2);
        assert!(md.contains("`DE` `US` `EU`"));
        assert!(md.contains("(indispensable)"));
        assert!(!md.contains("Feature Sets"));
        assert!(md.find("`a`").unwrap() < md.find("`b`").unwrap());
    }

    #[test]
    fn feature_sets_listed() {
        let v = parse_vocabulary(
            r#"vocabulary v { features fs { x y } property f : features(fs) { doc "d" importance 3 } }"#,
        )
        .unwrap();
        assert!(export_cheatsheet(&v).contains("## Feature Sets\n\n- **fs**: `x` `y`"));
    }
}
