//! Filtering and ranking of variants against user requirements.
//!
//! Hard constraints filter; soft constraints score the survivors. Each soft
//! constraint yields a score in `[0, 1]`:
//!
//! * `prefer_values`: 1 when the value is one of the preferred values.
//! * `tendency`: min–max normalisation over the surviving cohort, so the
//!   best present value scores 1 and the worst 0; an all-equal cohort
//!   scores 1.
//! * `cover_features`: share of the requested features that are offered.
//!
//! Missing properties fail hard constraints and score 0. The total is the
//! weighted arithmetic mean of the per-constraint scores, or 1 when there
//! are no soft constraints. Ranking is by descending total, ties broken by
//! ascending `(service id, variant id)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::sdl::{Currency, PropertyType, ServiceDescription, TypedValue, Vocabulary};
use crate::variants::{expand, ResolvedVariant, VariantError};

/// A discrete value named in a request.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Text(String),
    Bool(bool),
    Number(Decimal),
}

impl Scalar {
    pub fn matches(&self, value: &TypedValue) -> bool {
        match (self, value) {
            (Scalar::Text(t), v) => v.as_text() == Some(t.as_str()),
            (Scalar::Bool(b), TypedValue::Bool(v)) => b == v,
            (
                Scalar::Number(n),
                v @ (TypedValue::Integer(_) | TypedValue::Decimal(_) | TypedValue::Quantity { .. }),
            ) => v.numeric() == Some(*n),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Higher is better.
    Positive,
    /// Lower is better.
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HardConstraint {
    EqualsOneOf {
        property: String,
        values: Vec<Scalar>,
    },
    InRange {
        property: String,
        min: Option<Decimal>,
        max: Option<Decimal>,
    },
    HasAllFeatures {
        property: String,
        features: BTreeSet<String>,
    },
}

impl HardConstraint {
    pub fn property(&self) -> &str {
        match self {
            HardConstraint::EqualsOneOf { property, .. }
            | HardConstraint::InRange { property, .. }
            | HardConstraint::HasAllFeatures { property, .. } => property,
        }
    }

    pub fn is_satisfied_by(&self, variant: &ResolvedVariant) -> bool {
        let Some(value) = variant.properties.get(self.property()) else {
            return false;
        };
        match self {
            HardConstraint::EqualsOneOf { values, .. } => values.iter().any(|s| s.matches(value)),
            HardConstraint::InRange { min, max, .. } => match value.numeric() {
                Some(v) => min.is_none_or(|m| v >= m) && max.is_none_or(|m| v <= m),
                None => false,
            },
            HardConstraint::HasAllFeatures { features, .. } => value
                .features()
                .is_some_and(|offered| features.is_subset(offered)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    PreferValues {
        property: String,
        values: Vec<Scalar>,
    },
    Tendency {
        property: String,
        direction: Direction,
    },
    CoverFeatures {
        property: String,
        features: BTreeSet<String>,
    },
}

impl Goal {
    pub fn property(&self) -> &str {
        match self {
            Goal::PreferValues { property, .. }
            | Goal::Tendency { property, .. }
            | Goal::CoverFeatures { property, .. } => property,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftConstraint {
    pub weight: f64,
    pub goal: Goal,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchRequest {
    pub hard: Vec<HardConstraint>,
    pub soft: Vec<SoftConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedVariant {
    pub service_id: String,
    pub variant_id: String,
    pub score: f64,
    pub constraint_scores: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub ranked: Vec<RankedVariant>,
    pub excluded_count: usize,
}

/// A request problem, located by a field path such as `soft[1].weight`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for RequestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchError {
    MixedCurrencies {
        property: String,
        currencies: Vec<Currency>,
    },
    Variants {
        service_id: String,
        error: VariantError,
    },
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchError::MixedCurrencies {
                property,
                currencies,
            } => {
                let names: Vec<&str> = currencies.iter().map(Currency::as_str).collect();
                write!(
                    f,
                    "cannot compare `{property}` across currencies {}",
                    names.join(", ")
                )
            }
            MatchError::Variants { service_id, error } => {
                write!(f, "service `{service_id}`: {error}")
            }
        }
    }
}

impl core::error::Error for MatchError {}

// ---- validation ------------------------------------------------------------

fn discrete(ty: &PropertyType) -> bool {
    !matches!(ty, PropertyType::Money | PropertyType::Features(_))
}

fn check_values(path: &str, ty: &PropertyType, values: &[Scalar], errors: &mut Vec<RequestError>) {
    if values.is_empty() {
        errors.push(err(format!("{path}.values"), "value set must not be empty"));
    }
    for (i, v) in values.iter().enumerate() {
        let ok = match (ty, v) {
            (PropertyType::Enum(members), Scalar::Text(t)) => {
                if !members.contains(t) {
                    errors.push(err(
                        format!("{path}.values[{i}]"),
                        format!("unknown enum member `{t}`"),
                    ));
                }
                true
            }
            (PropertyType::String | PropertyType::Text | PropertyType::Url, Scalar::Text(_)) => {
                true
            }
            (PropertyType::Boolean, Scalar::Bool(_)) => true,
            (
                PropertyType::Integer | PropertyType::Decimal | PropertyType::Quantity(_),
                Scalar::Number(_),
            ) => true,
            _ => false,
        };
        if !ok {
            errors.push(err(
                format!("{path}.values[{i}]"),
                format!("value does not fit type {ty}"),
            ));
        }
    }
}

fn check_features(
    path: &str,
    ty: &PropertyType,
    features: &BTreeSet<String>,
    vocab: &Vocabulary,
    errors: &mut Vec<RequestError>,
) {
    let PropertyType::Features(set) = ty else {
        errors.push(err(
            format!("{path}.property"),
            format!("property has type {ty}, not a feature list"),
        ));
        return;
    };
    if features.is_empty() {
        errors.push(err(
            format!("{path}.features"),
            "feature set must not be empty",
        ));
    }
    if let Some(declared) = vocab.feature_set(set) {
        for f in features {
            if !declared.features.contains(f) {
                errors.push(err(
                    format!("{path}.features"),
                    format!("unknown feature `{f}`"),
                ));
            }
        }
    }
}

fn err(path: String, message: impl Into<String>) -> RequestError {
    RequestError {
        path,
        message: message.into(),
    }
}

/// Checks that every constraint names an existing property of a compatible
/// type and that weights, value sets and ranges are well formed.
pub fn validate_request(r: &MatchRequest, vocab: &Vocabulary) -> Result<(), Vec<RequestError>> {
    let mut errors = Vec::new();
    for (i, h) in r.hard.iter().enumerate() {
        let path = format!("hard[{i}]");
        let Some(def) = vocab.property(h.property()) else {
            errors.push(err(
                format!("{path}.property"),
                format!("unknown property `{}`", h.property()),
            ));
            continue;
        };
        match h {
            HardConstraint::EqualsOneOf { values, .. } => {
                if discrete(&def.ty) {
                    check_values(&path, &def.ty, values, &mut errors);
                } else {
                    errors.push(err(
                        format!("{path}.property"),
                        format!("equals_one_of does not apply to {}", def.ty),
                    ));
                }
            }
            HardConstraint::InRange { min, max, .. } => {
                if !def.ty.is_numeric() {
                    errors.push(err(
                        format!("{path}.property"),
                        format!("in_range needs a numeric property, not {}", def.ty),
                    ));
                }
                if let (Some(lo), Some(hi)) = (min, max) {
                    if lo > hi {
                        errors.push(err(format!("{path}.min"), "min must not exceed max"));
                    }
                }
            }
            HardConstraint::HasAllFeatures { features, .. } => {
                check_features(&path, &def.ty, features, vocab, &mut errors);
            }
        }
    }
    let mut tendencies = BTreeSet::new();
    for (i, s) in r.soft.iter().enumerate() {
        let path = format!("soft[{i}]");
        if !(s.weight.is_finite() && s.weight > 0.0) {
            errors.push(err(
                format!("{path}.weight"),
                "weight must be a positive number",
            ));
        }
        let gpath = format!("{path}.goal");
        let Some(def) = vocab.property(s.goal.property()) else {
            errors.push(err(
                format!("{gpath}.property"),
                format!("unknown property `{}`", s.goal.property()),
            ));
            continue;
        };
        match &s.goal {
            Goal::PreferValues { values, .. } => {
                if discrete(&def.ty) {
                    check_values(&gpath, &def.ty, values, &mut errors);
                } else {
                    errors.push(err(
                        format!("{gpath}.property"),
                        format!("prefer_values does not apply to {}", def.ty),
                    ));
                }
            }
            Goal::Tendency { property, .. } => {
                if !def.ty.is_numeric() {
                    errors.push(err(
                        format!("{gpath}.property"),
                        format!("tendency needs a numeric property, not {}", def.ty),
                    ));
                }
                if !tendencies.insert(property.as_str()) {
                    errors.push(err(
                        format!("{gpath}.property"),
                        format!("more than one tendency on `{property}`"),
                    ));
                }
            }
            Goal::CoverFeatures { features, .. } => {
                check_features(&gpath, &def.ty, features, vocab, &mut errors);
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

// ---- filtering ---------------------------------------------------------------

fn uniform_currency<'a>(
    property: &str,
    variants: impl Iterator<Item = &'a ResolvedVariant>,
) -> Result<(), MatchError> {
    let currencies: BTreeSet<&Currency> = variants
        .filter_map(|v| v.properties.get(property).and_then(TypedValue::currency))
        .collect();
    if currencies.len() > 1 {
        return Err(MatchError::MixedCurrencies {
            property: property.into(),
            currencies: currencies.into_iter().cloned().collect(),
        });
    }
    Ok(())
}

/// Keeps the variants that satisfy every hard constraint.
pub fn filter<'a>(
    variants: &'a [ResolvedVariant],
    hard: &[HardConstraint],
) -> Result<Vec<&'a ResolvedVariant>, MatchError> {
    for h in hard {
        if let HardConstraint::InRange { property, .. } = h {
            uniform_currency(property, variants.iter())?;
        }
    }
    Ok(variants
        .iter()
        .filter(|v| hard.iter().all(|h| h.is_satisfied_by(v)))
        .collect())
}

// ---- scoring -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub total: f64,
    pub per_constraint: Vec<f64>,
}

/// Scores variants of one cohort. Tendency bounds are computed once from
/// the cohort's present values.
pub struct Scorer<'a> {
    soft: &'a [SoftConstraint],
    bounds: Vec<Option<(Decimal, Decimal)>>,
}

impl<'a> Scorer<'a> {
    pub fn new(soft: &'a [SoftConstraint], cohort: &[&ResolvedVariant]) -> Self {
        let bounds = soft
            .iter()
            .map(|s| match &s.goal {
                Goal::Tendency { property, .. } => cohort
                    .iter()
                    .filter_map(|v| v.properties.get(property).and_then(TypedValue::numeric))
                    .fold(None, |acc: Option<(Decimal, Decimal)>, x| match acc {
                        None => Some((x, x)),
                        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
                    }),
                _ => None,
            })
            .collect();
        Scorer { soft, bounds }
    }

    pub fn score(&self, variant: &ResolvedVariant) -> Score {
        let per_constraint: Vec<f64> = self
            .soft
            .iter()
            .zip(&self.bounds)
            .map(|(s, bounds)| constraint_score(&s.goal, *bounds, variant))
            .collect();
        if self.soft.is_empty() {
            return Score {
                total: 1.0,
                per_constraint,
            };
        }
        let weights: f64 = self.soft.iter().map(|s| s.weight).sum();
        let weighted: f64 = self
            .soft
            .iter()
            .zip(&per_constraint)
            .map(|(s, x)| s.weight * x)
            .sum();
        Score {
            total: settle((weighted / weights).clamp(0.0, 1.0)),
            per_constraint,
        }
    }
}

/// Decimal places kept in a total score.
pub const SCORE_DIGITS: u32 = 12;

/// Rounds a total to [`SCORE_DIGITS`] places. Summation order can make
/// equal weighted means differ in the last bits; rounding lets such ties
/// compare equal so they fall back to the id order.
fn settle(x: f64) -> f64 {
    Decimal::from_f64_retain(x)
        .map(|d| {
            d.round_dp_with_strategy(
                SCORE_DIGITS,
                rust_decimal::RoundingStrategy::MidpointNearestEven,
            )
        })
        .and_then(|d| d.to_f64())
        .unwrap_or(x)
}

fn constraint_score(
    goal: &Goal,
    bounds: Option<(Decimal, Decimal)>,
    variant: &ResolvedVariant,
) -> f64 {
    let Some(value) = variant.properties.get(goal.property()) else {
        return 0.0;
    };
    match goal {
        Goal::PreferValues { values, .. } => {
            if values.iter().any(|s| s.matches(value)) {
                1.0
            } else {
                0.0
            }
        }
        Goal::Tendency { direction, .. } => {
            let (Some(v), Some((lo, hi))) = (value.numeric(), bounds) else {
                return 0.0;
            };
            if lo == hi {
                return 1.0;
            }
            let (num, den) = match direction {
                Direction::Positive => (v - lo, hi - lo),
                Direction::Negative => (hi - v, hi - lo),
            };
            let ratio = num
                .checked_div(den)
                .and_then(|r| r.to_f64())
                .unwrap_or_else(|| num.to_f64().unwrap_or(0.0) / den.to_f64().unwrap_or(1.0));
            ratio.clamp(0.0, 1.0)
        }
        Goal::CoverFeatures { features, .. } => {
            let Some(offered) = value.features() else {
                return 0.0;
            };
            if features.is_empty() {
                return 1.0;
            }
            features.intersection(offered).count() as f64 / features.len() as f64
        }
    }
}

/// Score of one variant relative to `cohort`.
pub fn score(
    variant: &ResolvedVariant,
    soft: &[SoftConstraint],
    cohort: &[&ResolvedVariant],
) -> Score {
    Scorer::new(soft, cohort).score(variant)
}

fn rank_order(a: &RankedVariant, b: &RankedVariant) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.service_id.cmp(&b.service_id))
        .then_with(|| a.variant_id.cmp(&b.variant_id))
}

/// Filters, scores and ranks already expanded variants.
pub fn rank(
    variants: &[ResolvedVariant],
    request: &MatchRequest,
) -> Result<MatchResult, MatchError> {
    let survivors = filter(variants, &request.hard)?;
    for s in &request.soft {
        if let Goal::Tendency { property, .. } = &s.goal {
            uniform_currency(property, survivors.iter().copied())?;
        }
    }
    let scorer = Scorer::new(&request.soft, &survivors);
    let mut ranked: Vec<RankedVariant> = survivors
        .iter()
        .map(|v| {
            let s = scorer.score(v);
            RankedVariant {
                service_id: v.service_id.clone(),
                variant_id: v.variant_id.clone(),
                score: s.total,
                constraint_scores: s.per_constraint,
            }
        })
        .collect();
    ranked.sort_by(rank_order);
    Ok(MatchResult {
        excluded_count: variants.len() - ranked.len(),
        ranked,
    })
}

/// Expands every service of the catalog and ranks all variants together.
pub fn match_catalog(
    catalog: &[ServiceDescription],
    request: &MatchRequest,
) -> Result<MatchResult, MatchError> {
    let mut variants = Vec::new();
    for service in catalog {
        variants.extend(expand(service).map_err(|error| MatchError::Variants {
            service_id: service.id.clone(),
            error,
        })?);
    }
    rank(&variants, request)
}

/// Per-property value ranges present in a set of variants; handy for UIs
/// building range controls.
pub fn numeric_ranges(variants: &[ResolvedVariant]) -> BTreeMap<String, (Decimal, Decimal)> {
    let mut out: BTreeMap<String, (Decimal, Decimal)> = BTreeMap::new();
    for v in variants {
        for (k, value) in &v.properties {
            if let Some(x) = value.numeric() {
                out.entry(k.clone())
                    .and_modify(|(lo, hi)| {
                        *lo = (*lo).min(x);
                        *hi = (*hi).max(x);
                    })
                    .or_insert((x, x));
            }
        }
    }
    out
}
