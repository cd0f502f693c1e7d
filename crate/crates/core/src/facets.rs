//! Faceted filtering over discrete-valued properties.
//!
//! Selections combine conjunctively across properties and disjunctively
//! within one property. A feature-list value matches when it offers any of
//! the selected features. The counts of a facet are taken over the variants
//! that pass every selection except the facet's own.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::matchmaker::RequestError;
use crate::sdl::{PropertyDef, PropertyType, TypedValue, Vocabulary};
use crate::variants::ResolvedVariant;

/// Selected values per property.
pub type FacetSelection = BTreeMap<String, BTreeSet<String>>;

/// Count per value per facetable property.
pub type FacetResult = BTreeMap<String, BTreeMap<String, u64>>;

pub fn facet_properties(vocab: &Vocabulary) -> impl Iterator<Item = &PropertyDef> {
    vocab.properties.iter().filter(|p| p.ty.is_facetable())
}

/// Every value a facetable property can take, in declaration order.
pub fn declared_values(def: &PropertyDef, vocab: &Vocabulary) -> Vec<String> {
    match &def.ty {
        PropertyType::Enum(members) => members.clone(),
        PropertyType::Boolean => alloc::vec!["false".into(), "true".into()],
        PropertyType::Features(set) => vocab
            .feature_set(set)
            .map(|s| s.features.clone())
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

/// Facet labels a value contributes to.
pub fn value_labels(value: &TypedValue) -> Vec<&str> {
    match value {
        TypedValue::Enum(m) => alloc::vec![m.as_str()],
        TypedValue::Bool(b) => alloc::vec![if *b { "true" } else { "false" }],
        TypedValue::Features(f) => f.iter().map(String::as_str).collect(),
        _ => Vec::new(),
    }
}

pub fn validate_selection(
    selection: &FacetSelection,
    vocab: &Vocabulary,
) -> Result<(), Vec<RequestError>> {
    let mut errors = Vec::new();
    for (property, values) in selection {
        let Some(def) = vocab.property(property) else {
            errors.push(RequestError {
                path: property.clone(),
                message: format!("unknown property `{property}`"),
            });
            continue;
        };
        if !def.ty.is_facetable() {
            errors.push(RequestError {
                path: property.clone(),
                message: format!("property `{property}` of type {} is not facetable", def.ty),
            });
            continue;
        }
        let declared = declared_values(def, vocab);
        for v in values {
            if !declared.contains(v) {
                errors.push(RequestError {
                    path: property.clone(),
                    message: format!("unknown value `{v}`"),
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn passes(variant: &ResolvedVariant, selection: &FacetSelection, skip: Option<&str>) -> bool {
    selection.iter().all(|(property, values)| {
        if Some(property.as_str()) == skip || values.is_empty() {
            return true;
        }
        variant
            .properties
            .get(property)
            .is_some_and(|v| value_labels(v).iter().any(|l| values.contains(*l)))
    })
}

pub fn variant_matches(variant: &ResolvedVariant, selection: &FacetSelection) -> bool {
    passes(variant, selection, None)
}

/// Ids of the services with at least one variant passing `selection`.
pub fn matching_services<'a>(
    variants: impl IntoIterator<Item = &'a ResolvedVariant>,
    selection: &FacetSelection,
) -> BTreeSet<String> {
    variants
        .into_iter()
        .filter(|v| variant_matches(v, selection))
        .map(|v| v.service_id.clone())
        .collect()
}

/// Per-value variant counts for every facetable property of `vocab`.
/// Declared values that no variant has appear with count 0.
pub fn compute_facets<'a>(
    variants: impl IntoIterator<Item = &'a ResolvedVariant> + Clone,
    vocab: &Vocabulary,
    selection: &FacetSelection,
) -> FacetResult {
    let mut result = FacetResult::new();
    for def in facet_properties(vocab) {
        let mut counts: BTreeMap<String, u64> = declared_values(def, vocab)
            .into_iter()
            .map(|v| (v, 0))
            .collect();
        for variant in variants.clone() {
            if !passes(variant, selection, Some(&def.name)) {
                continue;
            }
            if let Some(value) = variant.properties.get(&def.name) {
                for label in value_labels(value) {
                    if let Some(c) = counts.get_mut(label) {
                        *c += 1;
                    }
                }
            }
        }
        result.insert(def.name.clone(), counts);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdl::parse_vocabulary;

    fn vocab() -> Vocabulary {
        parse_vocabulary(
            r#"vocabulary v {
                features pay { card invoice paypal }
                property jurisdiction : enum(DE, US, EU) { doc "j" importance 1 }
                property payment : features(pay) { doc "p" importance 2 }
                property free : boolean { doc "f" importance 3 }
                property name : string { doc "n" importance 5 }
            }"#,
        )
        .unwrap()
    }

    fn v(service: &str, j: &str, pay: &[&str]) -> ResolvedVariant {
        let mut properties = BTreeMap::new();
        properties.insert("jurisdiction".into(), TypedValue::Enum(j.into()));
        properties.insert(
            "payment".into(),
            TypedValue::Features(pay.iter().map(|s| String::from(*s)).collect()),
        );
        ResolvedVariant {
            service_id: service.into(),
            variant_id: String::new(),
            properties,
            price_components: Vec::new(),
        }
    }

    fn sel(entries: &[(&str, &[&str])]) -> FacetSelection {
        entries
            .iter()
            .map(|(k, vs)| ((*k).into(), vs.iter().map(|s| String::from(*s)).collect()))
            .collect()
    }

    #[test]
    fn empty_catalog_all_zero() {
        let f = compute_facets(&[], &vocab(), &FacetSelection::new());
        assert_eq!(f.len(), 3);
        assert!(f.values().flat_map(|m| m.values()).all(|&c| c == 0));
        assert!(!f.contains_key("name"));
    }

    #[test]
    fn own_filter_is_excluded() {
        let vs = [
            v("a", "DE", &["card"]),
            v("b", "DE", &[]),
            v("c", "US", &["card", "invoice"]),
        ];
        let none = compute_facets(&vs, &vocab(), &FacetSelection::new());
        assert_eq!(none["jurisdiction"]["DE"], 2);
        assert_eq!(none["jurisdiction"]["US"], 1);
        assert_eq!(none["jurisdiction"]["EU"], 0);
        let de = sel(&[("jurisdiction", &["DE"])]);
        let f = compute_facets(&vs, &vocab(), &de);
        assert_eq!(f["jurisdiction"], none["jurisdiction"]);
        assert_eq!(f["payment"]["card"], 1);
        assert_eq!(f["payment"]["invoice"], 0);
    }

    #[test]
    fn conjunctive_across_disjunctive_within() {
        let vs = [
            v("a", "DE", &["card"]),
            v("b", "US", &["invoice"]),
            v("c", "EU", &["card"]),
        ];
        let s = sel(&[
            ("jurisdiction", &["DE", "US"]),
            ("payment", &["card", "paypal"]),
        ]);
        assert_eq!(matching_services(&vs, &s), ["a".into()].into());
        assert_eq!(matching_services(&vs, &FacetSelection::new()).len(), 3);
    }

    #[test]
    fn selection_validation() {
        assert!(validate_selection(&sel(&[("jurisdiction", &["DE"])]), &vocab()).is_ok());
        assert!(validate_selection(&sel(&[("jurisdiction", &["FR"])]), &vocab()).is_err());
        assert!(validate_selection(&sel(&[("name", &["x"])]), &vocab()).is_err());
        assert!(validate_selection(&sel(&[("nope", &["x"])]), &vocab()).is_err());
        assert!(validate_selection(&sel(&[("free", &["true"])]), &vocab()).is_ok());
    }
}
