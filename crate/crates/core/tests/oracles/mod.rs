//! Reference implementations for the property tests and the acceptance
//! run. Each follows the written rules literally (brute force, exact
//! rationals, unit-by-unit sums) and shares nothing with the library but
//! its data types.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use osc_core::facets::FacetSelection;
use osc_core::matchmaker::{
    Direction, Goal, HardConstraint, MatchRequest, MatchResult, Scalar, SoftConstraint,
};
use osc_core::pricing::{TierBand, TierMode, TierSchedule};
use osc_core::sdl::{
    self, Assignment, Currency, Dimension, Exclusion, Money, Origin, PropertyType,
    ServiceDescription, TypedValue, VariantOption, Vocabulary,
};
use osc_core::variants::ResolvedVariant;
use osc_core::Decimal;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

// ---- exact rationals ---------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct Frac {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Frac {
        assert!(den != 0);
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Frac {
            num: s * num / g,
            den: s * den / g,
        }
    }

    pub fn int(n: i128) -> Frac {
        Frac::new(n, 1)
    }

    pub fn of_decimal(d: Decimal) -> Frac {
        Frac::new(d.mantissa(), 10i128.pow(d.scale()))
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn sub(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Frac) -> Frac {
        Frac::new(self.num * o.num, self.den * o.den)
    }

    pub fn div(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den, self.den * o.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Frac {
    fn eq(&self, o: &Frac) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, o: &Frac) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Frac {
    fn cmp(&self, o: &Frac) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

// ---- random catalogs ---------------------------------------------------------

pub const VOCABULARY: &str = r#"vocabulary lab {
    features kit { F1 F2 F3 F4 F5 }
    property e : enum(A, B, C, D) { doc "e" importance 1 }
    property g : enum(X, Y) { doc "g" importance 2 }
    property b : boolean { doc "b" importance 2 }
    property n : integer { doc "n" importance 3 }
    property q : decimal { doc "q" importance 3 }
    property m : money { doc "m" importance 1 }
    property f : features(kit) { doc "f" importance 2 }
}"#;

pub const ENUM_E: [&str; 4] = ["A", "B", "C", "D"];
pub const ENUM_G: [&str; 2] = ["X", "Y"];
pub const FEATURES: [&str; 5] = ["F1", "F2", "F3", "F4", "F5"];

pub fn vocabulary() -> Vocabulary {
    sdl::parse_vocabulary(VOCABULARY).expect("test vocabulary parses")
}

fn eur(amount: Decimal) -> TypedValue {
    TypedValue::Money(Money::new(amount, Currency::new("EUR").unwrap()))
}

fn random_features(rng: &mut StdRng) -> BTreeSet<String> {
    FEATURES
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .map(|f| f.to_string())
        .collect()
}

fn random_value(rng: &mut StdRng, property: &str) -> TypedValue {
    match property {
        "e" => TypedValue::Enum(ENUM_E.choose(rng).unwrap().to_string()),
        "g" => TypedValue::Enum(ENUM_G.choose(rng).unwrap().to_string()),
        "b" => TypedValue::Bool(rng.random_bool(0.5)),
        "n" => TypedValue::Integer(rng.random_range(0..=50)),
        "q" => TypedValue::Decimal(Decimal::new(rng.random_range(0..=200), 1)),
        "m" => eur(Decimal::new(rng.random_range(0..=10_000), 2)),
        "f" => TypedValue::Features(random_features(rng)),
        _ => unreachable!(),
    }
}

pub const PROPERTIES: [&str; 7] = ["e", "g", "b", "n", "q", "m", "f"];

/// Up to `max_variants` variants spread over a few services; every property
/// is missing now and then.
pub fn random_variants(rng: &mut StdRng, max_variants: usize) -> Vec<ResolvedVariant> {
    let n = rng.random_range(0..=max_variants);
    let services = rng.random_range(1..=6);
    (0..n)
        .map(|i| {
            let mut properties = BTreeMap::new();
            for p in PROPERTIES {
                if rng.random_bool(0.9) {
                    properties.insert(p.to_string(), random_value(rng, p));
                }
            }
            ResolvedVariant {
                service_id: format!("s{}", rng.random_range(0..services)),
                variant_id: format!("v{i:03}"),
                properties,
                price_components: Vec::new(),
            }
        })
        .collect()
}

fn random_subset(rng: &mut StdRng, pool: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = pool
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .map(|s| s.to_string())
        .collect();
    if out.is_empty() {
        out.push(pool.choose(rng).unwrap().to_string());
    }
    out
}

fn random_hard(rng: &mut StdRng) -> HardConstraint {
    match rng.random_range(0..6) {
        0 => HardConstraint::EqualsOneOf {
            property: "e".into(),
            values: random_subset(rng, &ENUM_E)
                .into_iter()
                .map(Scalar::Text)
                .collect(),
        },
        1 => HardConstraint::EqualsOneOf {
            property: "b".into(),
            values: vec![Scalar::Bool(rng.random_bool(0.5))],
        },
        2 => HardConstraint::EqualsOneOf {
            property: "n".into(),
            values: (0..rng.random_range(1..=20))
                .map(|_| Scalar::Number(rng.random_range(0..=50).into()))
                .collect(),
        },
        3 => {
            let (property, lo, hi, scale) = match rng.random_range(0..3) {
                0 => ("n", 0, 50, 0),
                1 => ("q", 0, 200, 1),
                _ => ("m", 0, 10_000, 2),
            };
            let a = rng.random_range(lo..=hi);
            let b = rng.random_range(a..=hi);
            let (lo, hi) = (Decimal::new(a, scale), Decimal::new(b, scale));
            HardConstraint::InRange {
                property: property.into(),
                min: rng.random_bool(0.7).then_some(lo),
                max: rng.random_bool(0.7).then_some(hi),
            }
        }
        _ => HardConstraint::HasAllFeatures {
            property: "f".into(),
            features: random_subset(rng, &FEATURES[..3]).into_iter().collect(),
        },
    }
}

fn random_goal(rng: &mut StdRng, tendencies: &mut BTreeSet<&'static str>) -> Goal {
    loop {
        match rng.random_range(0..4) {
            0 => {
                let (property, pool): (&str, &[&str]) = if rng.random_bool(0.5) {
                    ("e", &ENUM_E)
                } else {
                    ("g", &ENUM_G)
                };
                return Goal::PreferValues {
                    property: property.into(),
                    values: random_subset(rng, pool)
                        .into_iter()
                        .map(Scalar::Text)
                        .collect(),
                };
            }
            1 | 2 => {
                let property = *["n", "q", "m"].choose(rng).unwrap();
                if !tendencies.insert(property) {
                    continue;
                }
                let direction = if rng.random_bool(0.5) {
                    Direction::Positive
                } else {
                    Direction::Negative
                };
                return Goal::Tendency {
                    property: property.into(),
                    direction,
                };
            }
            _ => {
                return Goal::CoverFeatures {
                    property: "f".into(),
                    features: random_subset(rng, &FEATURES).into_iter().collect(),
                }
            }
        }
    }
}

/// At most six constraints with whole or half weights.
pub fn random_request(rng: &mut StdRng) -> MatchRequest {
    let total = rng.random_range(0..=6);
    let hard_count = rng.random_range(0..=total.min(3));
    let mut tendencies = BTreeSet::new();
    MatchRequest {
        hard: (0..hard_count).map(|_| random_hard(rng)).collect(),
        soft: (hard_count..total)
            .map(|_| SoftConstraint {
                weight: rng.random_range(1..=10) as f64 / 2.0,
                goal: random_goal(rng, &mut tendencies),
            })
            .collect(),
    }
}

// ---- matchmaker oracle -------------------------------------------------------

fn number(v: &TypedValue) -> Option<Frac> {
    match v {
        TypedValue::Integer(i) => Some(Frac::int(*i as i128)),
        TypedValue::Decimal(d) => Some(Frac::of_decimal(*d)),
        TypedValue::Money(m) => Some(Frac::of_decimal(m.amount)),
        TypedValue::Quantity { magnitude, .. } => Some(Frac::of_decimal(*magnitude)),
        _ => None,
    }
}

fn scalar_hit(s: &Scalar, v: &TypedValue) -> bool {
    match (s, v) {
        (
            Scalar::Text(t),
            TypedValue::Enum(x) | TypedValue::String(x) | TypedValue::Text(x) | TypedValue::Url(x),
        ) => t == x,
        (Scalar::Bool(a), TypedValue::Bool(b)) => a == b,
        (Scalar::Number(n), v) if !matches!(v, TypedValue::Money(_)) => {
            number(v).is_some_and(|x| x == Frac::of_decimal(*n))
        }
        _ => false,
    }
}

fn offered(v: &TypedValue) -> Option<&BTreeSet<String>> {
    match v {
        TypedValue::Features(f) => Some(f),
        _ => None,
    }
}

pub fn oracle_survives(v: &ResolvedVariant, hard: &[HardConstraint]) -> bool {
    hard.iter().all(|h| {
        let (property, ok): (&str, &dyn Fn(&TypedValue) -> bool) = match h {
            HardConstraint::EqualsOneOf { property, values } => {
                (property, &|x| values.iter().any(|s| scalar_hit(s, x)))
            }
            HardConstraint::InRange { property, min, max } => (property, &|x| {
                number(x).is_some_and(|n| {
                    min.is_none_or(|m| n >= Frac::of_decimal(m))
                        && max.is_none_or(|m| n <= Frac::of_decimal(m))
                })
            }),
            HardConstraint::HasAllFeatures { property, features } => (property, &|x| {
                offered(x).is_some_and(|o| features.iter().all(|f| o.contains(f)))
            }),
        };
        v.properties.get(property).is_some_and(ok)
    })
}

#[derive(Debug, Clone)]
pub struct OracleRanked {
    pub service_id: String,
    pub variant_id: String,
    pub total: Frac,
    pub per_constraint: Vec<Frac>,
}

pub fn oracle_constraint(goal: &Goal, v: &ResolvedVariant, cohort: &[&ResolvedVariant]) -> Frac {
    let property = match goal {
        Goal::PreferValues { property, .. }
        | Goal::Tendency { property, .. }
        | Goal::CoverFeatures { property, .. } => property,
    };
    let Some(value) = v.properties.get(property) else {
        return Frac::int(0);
    };
    match goal {
        Goal::PreferValues { values, .. } => {
            Frac::int(values.iter().any(|s| scalar_hit(s, value)) as i128)
        }
        Goal::Tendency { direction, .. } => {
            let Some(x) = number(value) else {
                return Frac::int(0);
            };
            let present: Vec<Frac> = cohort
                .iter()
                .filter_map(|c| c.properties.get(property).and_then(number))
                .collect();
            let lo = *present.iter().min().unwrap();
            let hi = *present.iter().max().unwrap();
            if lo == hi {
                return Frac::int(1);
            }
            match direction {
                Direction::Positive => x.sub(lo).div(hi.sub(lo)),
                Direction::Negative => hi.sub(x).div(hi.sub(lo)),
            }
        }
        Goal::CoverFeatures { features, .. } => match offered(value) {
            Some(o) => Frac::new(
                features.iter().filter(|f| o.contains(*f)).count() as i128,
                features.len() as i128,
            ),
            None => Frac::int(0),
        },
    }
}

/// Brute-force match: filter each variant, score against the survivors,
/// sort by exact total then ids.
pub fn oracle_match(
    variants: &[ResolvedVariant],
    request: &MatchRequest,
) -> (Vec<OracleRanked>, usize) {
    let survivors: Vec<&ResolvedVariant> = variants
        .iter()
        .filter(|v| oracle_survives(v, &request.hard))
        .collect();
    let mut ranked: Vec<OracleRanked> = survivors
        .iter()
        .map(|v| {
            let per: Vec<Frac> = request
                .soft
                .iter()
                .map(|s| oracle_constraint(&s.goal, v, &survivors))
                .collect();
            let total = if request.soft.is_empty() {
                Frac::int(1)
            } else {
                let mut weighted = Frac::int(0);
                let mut weights = Frac::int(0);
                for (s, x) in request.soft.iter().zip(&per) {
                    let w = Frac::of_decimal(
                        Decimal::from_f64_retain(s.weight).expect("finite weight"),
                    );
                    weighted = weighted.add(w.mul(*x));
                    weights = weights.add(w);
                }
                weighted.div(weights)
            };
            OracleRanked {
                service_id: v.service_id.clone(),
                variant_id: v.variant_id.clone(),
                total,
                per_constraint: per,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.total
            .cmp(&a.total)
            .then_with(|| a.service_id.cmp(&b.service_id))
            .then_with(|| a.variant_id.cmp(&b.variant_id))
    });
    (ranked, variants.len() - survivors.len())
}

/// Compares a library result with the oracle: same survivors in the same
/// order, scores within `tolerance`.
pub fn compare_ranking(
    got: &MatchResult,
    want: &(Vec<OracleRanked>, usize),
    tolerance: f64,
) -> Result<(), String> {
    let (want, excluded) = want;
    if got.excluded_count != *excluded {
        return Err(format!(
            "excluded {} vs oracle {}",
            got.excluded_count, excluded
        ));
    }
    if got.ranked.len() != want.len() {
        return Err(format!(
            "{} ranked vs oracle {}",
            got.ranked.len(),
            want.len()
        ));
    }
    for (i, (g, w)) in got.ranked.iter().zip(want).enumerate() {
        if (g.service_id.as_str(), g.variant_id.as_str())
            != (w.service_id.as_str(), w.variant_id.as_str())
        {
            return Err(format!(
                "position {i}: {}/{} vs oracle {}/{}",
                g.service_id, g.variant_id, w.service_id, w.variant_id
            ));
        }
        if (g.score - w.total.to_f64()).abs() > tolerance {
            return Err(format!(
                "position {i}: score {} vs oracle {}",
                g.score,
                w.total.to_f64()
            ));
        }
        for (j, (gs, ws)) in g
            .constraint_scores
            .iter()
            .zip(&w.per_constraint)
            .enumerate()
        {
            if (gs - ws.to_f64()).abs() > tolerance {
                return Err(format!(
                    "position {i} constraint {j}: {gs} vs oracle {}",
                    ws.to_f64()
                ));
            }
        }
    }
    Ok(())
}

// ---- pricing oracle ----------------------------------------------------------

/// Price of the `k`-th unit (1-based): the first band whose bound reaches it.
fn band_price(schedule: &TierSchedule, k: Decimal) -> Decimal {
    schedule
        .bands
        .iter()
        .find(|b| b.upto.is_none_or(|u| k <= u))
        .expect("last band is unbounded")
        .unit_price
        .amount
}

/// Monthly cost of `quantity` units with `included` free ones, adding one
/// unit at a time.
pub fn oracle_tier_cost(schedule: &TierSchedule, included: u64, quantity: u64) -> Decimal {
    let volume_price = band_price(schedule, Decimal::from(quantity));
    let mut total = Decimal::ZERO;
    for k in (included + 1)..=quantity {
        total += match schedule.mode {
            TierMode::Graduated => band_price(schedule, Decimal::from(k)),
            TierMode::Volume => volume_price,
        };
    }
    total
}

/// Graduated costs for every quantity `0..=max`, as one running sum.
pub fn oracle_graduated_sweep(schedule: &TierSchedule, included: u64, max: u64) -> Vec<Decimal> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut total = Decimal::ZERO;
    out.push(total);
    for k in 1..=max {
        if k > included {
            total += band_price(schedule, Decimal::from(k));
        }
        out.push(total);
    }
    out
}

/// Volume costs for every quantity `0..=max`. Each band keeps its own
/// running sum of one band price per billable unit; a quantity reads the
/// sum of the band it falls in.
pub fn oracle_volume_sweep(schedule: &TierSchedule, included: u64, max: u64) -> Vec<Decimal> {
    let mut sums = vec![Decimal::ZERO; schedule.bands.len()];
    let mut out = Vec::with_capacity(max as usize + 1);
    for q in 0..=max {
        if q > included {
            for (sum, band) in sums.iter_mut().zip(&schedule.bands) {
                *sum += band.unit_price.amount;
            }
        }
        let k = Decimal::from(q);
        let band = schedule
            .bands
            .iter()
            .position(|b| b.upto.is_none_or(|u| k <= u))
            .expect("last band is unbounded");
        out.push(sums[band]);
    }
    out
}

pub fn random_schedule(rng: &mut StdRng, mode: TierMode) -> TierSchedule {
    let n = rng.random_range(1..=4);
    let mut bound = 0i64;
    let bands = (0..n)
        .map(|i| {
            let upto = if i + 1 == n {
                None
            } else {
                bound += rng.random_range(1..=3000);
                Some(Decimal::from(bound))
            };
            let scale = rng.random_range(0..=4);
            let amount = Decimal::new(rng.random_range(0..=20_000) / 10i64.pow(4 - scale), scale);
            TierBand {
                upto,
                unit_price: Money::new(amount, Currency::new("EUR").unwrap()),
            }
        })
        .collect();
    TierSchedule { mode, bands }
}

// ---- variant oracle ----------------------------------------------------------

/// A random description: up to four dimensions of up to five options,
/// a few exclusions, and `n` assigned at base level and by some options.
pub fn random_service(rng: &mut StdRng) -> ServiceDescription {
    let dims = rng.random_range(0..=4);
    let dimensions: Vec<Dimension> = (0..dims)
        .map(|d| Dimension {
            name: format!("d{d}"),
            options: (0..rng.random_range(1..=5))
                .map(|o| VariantOption {
                    id: format!("o{o}"),
                    assignments: if rng.random_bool(0.5) {
                        vec![Assignment {
                            property: "n".into(),
                            value: TypedValue::Integer(rng.random_range(0..100)),
                            origin: Origin::default(),
                        }]
                    } else {
                        Vec::new()
                    },
                    prices: Vec::new(),
                    origin: Origin::default(),
                })
                .collect(),
            origin: Origin::default(),
        })
        .collect();
    let exclusions = if dims == 0 {
        Vec::new()
    } else {
        (0..rng.random_range(0..=4))
            .map(|_| {
                let mut bound: Vec<usize> = (0..dims).filter(|_| rng.random_bool(0.5)).collect();
                if bound.is_empty() {
                    bound.push(rng.random_range(0..dims));
                }
                Exclusion {
                    bindings: bound
                        .into_iter()
                        .map(|d| {
                            let o = rng.random_range(0..dimensions[d].options.len());
                            (
                                dimensions[d].name.clone(),
                                dimensions[d].options[o].id.clone(),
                            )
                        })
                        .collect(),
                    origin: Origin::default(),
                }
            })
            .collect()
    };
    ServiceDescription {
        id: "svc".into(),
        vocabulary_id: "lab".into(),
        assignments: vec![Assignment {
            property: "n".into(),
            value: TypedValue::Integer(-1),
            origin: Origin::default(),
        }],
        dimensions,
        exclusions,
        prices: Vec::new(),
        fetch_rules: Vec::new(),
        origin: Origin::default(),
    }
}

/// Every surviving combination as `(variant id, resolved n)`, in nested
/// loop order.
pub fn oracle_enumerate(s: &ServiceDescription) -> Vec<(String, TypedValue)> {
    fn walk(
        s: &ServiceDescription,
        d: usize,
        picked: &mut Vec<usize>,
        out: &mut Vec<(String, TypedValue)>,
    ) {
        if d == s.dimensions.len() {
            let excluded = s.exclusions.iter().any(|ex| {
                ex.bindings.iter().all(|(dim, opt)| {
                    let i = s.dimensions.iter().position(|x| &x.name == dim).unwrap();
                    s.dimensions[i].options[picked[i]].id == *opt
                })
            });
            if !excluded {
                let ids: Vec<&str> = picked
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| s.dimensions[i].options[o].id.as_str())
                    .collect();
                let mut n = s.assignments[0].value.clone();
                for (i, &o) in picked.iter().enumerate() {
                    for a in &s.dimensions[i].options[o].assignments {
                        n = a.value.clone();
                    }
                }
                out.push((ids.join("/"), n));
            }
            return;
        }
        for o in 0..s.dimensions[d].options.len() {
            picked.push(o);
            walk(s, d + 1, picked, out);
            picked.pop();
        }
    }
    let mut out = Vec::new();
    walk(s, 0, &mut Vec::new(), &mut out);
    out
}

// ---- facet oracle ------------------------------------------------------------

fn labels(v: &TypedValue) -> BTreeSet<String> {
    match v {
        TypedValue::Enum(m) => [m.clone()].into(),
        TypedValue::Bool(b) => [b.to_string()].into(),
        TypedValue::Features(f) => f.clone(),
        _ => BTreeSet::new(),
    }
}

fn passes(v: &ResolvedVariant, property: &str, wanted: &BTreeSet<String>) -> bool {
    v.properties
        .get(property)
        .is_some_and(|x| labels(x).iter().any(|l| wanted.contains(l)))
}

/// For every facetable property and declared value: variants passing every
/// selection except the property's own and carrying that value.
pub fn oracle_facets(
    variants: &[ResolvedVariant],
    vocab: &Vocabulary,
    selection: &FacetSelection,
) -> BTreeMap<String, BTreeMap<String, u64>> {
    let mut out = BTreeMap::new();
    for def in &vocab.properties {
        let declared: Vec<String> = match &def.ty {
            PropertyType::Enum(m) => m.clone(),
            PropertyType::Boolean => vec!["false".into(), "true".into()],
            PropertyType::Features(set) => vocab.feature_set(set).unwrap().features.clone(),
            _ => continue,
        };
        let mut counts = BTreeMap::new();
        for value in declared {
            let n = variants
                .iter()
                .filter(|v| {
                    selection
                        .iter()
                        .filter(|(p, _)| **p != def.name)
                        .all(|(p, s)| passes(v, p, s))
                })
                .filter(|v| {
                    v.properties
                        .get(&def.name)
                        .is_some_and(|x| labels(x).contains(&value))
                })
                .count();
            counts.insert(value, n as u64);
        }
        out.insert(def.name.clone(), counts);
    }
    out
}

pub fn random_selection(rng: &mut StdRng) -> FacetSelection {
    let mut s = FacetSelection::new();
    let pools: [(&str, &[&str]); 4] = [
        ("e", &ENUM_E),
        ("g", &ENUM_G),
        ("b", &["false", "true"]),
        ("f", &FEATURES),
    ];
    for (p, pool) in pools {
        if rng.random_bool(0.4) {
            s.insert(p.into(), random_subset(rng, pool).into_iter().collect());
        }
    }
    s
}
