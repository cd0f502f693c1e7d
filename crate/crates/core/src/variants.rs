//! Expansion of a description into its concrete variants.
//!
//! A variant picks one option per dimension. Properties merge in order
//! (base first, then each dimension's option, later dimensions winning) and
//! price components concatenate the same way. Combinations that agree with
//! every binding of some exclusion are dropped.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::pricing::PriceComponent;
use crate::sdl::{Exclusion, ServiceDescription, TypedValue};

/// Hard cap on the number of variants one description may expand to.
pub const MAX_VARIANTS: u64 = 1_000_000;

/// Exclusion lists up to this size are counted by inclusion–exclusion;
/// longer lists fall back to enumerating index tuples.
const INCLUSION_EXCLUSION_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedVariant {
    pub service_id: String,
    /// Option ids joined by `/` in dimension order; empty without dimensions.
    pub variant_id: String,
    pub properties: BTreeMap<String, TypedValue>,
    pub price_components: Vec<PriceComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VariantError {
    TooManyVariants { count: u64 },
}

impl fmt::Display for VariantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantError::TooManyVariants { count } => write!(
                f,
                "description expands to {count} variants, more than the limit of {MAX_VARIANTS}"
            ),
        }
    }
}

impl core::error::Error for VariantError {}

/// Exclusion bindings resolved to `(dimension index, option index)`.
/// Bindings that do not resolve make the exclusion inert; validation
/// rejects them before expansion.
fn compiled_exclusions(service: &ServiceDescription) -> Vec<Vec<(usize, usize)>> {
    service
        .exclusions
        .iter()
        .filter_map(|ex: &Exclusion| {
            ex.bindings
                .iter()
                .map(|(dim, opt)| {
                    let d = service.dimensions.iter().position(|x| &x.name == dim)?;
                    let o = service.dimensions[d].option_index(opt)?;
                    Some((d, o))
                })
                .collect::<Option<Vec<_>>>()
        })
        .collect()
}

fn excluded(choice: &[usize], exclusions: &[Vec<(usize, usize)>]) -> bool {
    exclusions
        .iter()
        .any(|ex| ex.iter().all(|&(d, o)| choice[d] == o))
}

/// Steps `choice` to the next tuple in lexicographic order. Returns false
/// after the last tuple.
fn advance(choice: &mut [usize], sizes: &[usize]) -> bool {
    for d in (0..choice.len()).rev() {
        choice[d] += 1;
        if choice[d] < sizes[d] {
            return true;
        }
        choice[d] = 0;
    }
    false
}

fn sizes(service: &ServiceDescription) -> Vec<usize> {
    service.dimensions.iter().map(|d| d.options.len()).collect()
}

/// Number of variants `expand` would produce, computed without building them.
pub fn count(service: &ServiceDescription) -> u64 {
    let sizes = sizes(service);
    if sizes.contains(&0) {
        return 0;
    }
    let exclusions = compiled_exclusions(service);
    let total: u128 = sizes.iter().map(|&s| s as u128).product();
    if exclusions.is_empty() {
        return saturate(total);
    }
    if exclusions.len() <= INCLUSION_EXCLUSION_LIMIT {
        return saturate(inclusion_exclusion(&sizes, &exclusions, total));
    }
    let mut choice = alloc::vec![0usize; sizes.len()];
    let mut n = 0u64;
    loop {
        if !excluded(&choice, &exclusions) {
            n += 1;
        }
        if !advance(&mut choice, &sizes) {
            return n;
        }
    }
}

fn saturate(n: u128) -> u64 {
    u64::try_from(n).unwrap_or(u64::MAX)
}

/// |all| − |⋃ excluded sets|, where each exclusion's set is the product of
/// the unbound dimensions and the intersection of several exclusions is
/// empty when they bind a dimension to different options.
fn inclusion_exclusion(sizes: &[usize], exclusions: &[Vec<(usize, usize)>], total: u128) -> u128 {
    let k = exclusions.len();
    let mut union: i128 = 0;
    for mask in 1u32..(1u32 << k) {
        let mut bound: BTreeMap<usize, usize> = BTreeMap::new();
        let mut consistent = true;
        'members: for (i, ex) in exclusions.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            for &(d, o) in ex {
                match bound.insert(d, o) {
                    Some(prev) if prev != o => {
                        consistent = false;
                        break 'members;
                    }
                    _ => {}
                }
            }
        }
        if !consistent {
            continue;
        }
        let size: i128 = sizes
            .iter()
            .enumerate()
            .filter(|(d, _)| !bound.contains_key(d))
            .map(|(_, &s)| s as i128)
            .product();
        if mask.count_ones() % 2 == 1 {
            union += size;
        } else {
            union -= size;
        }
    }
    total - union as u128
}

fn build(service: &ServiceDescription, choice: &[usize]) -> ResolvedVariant {
    let mut properties = service.base_properties();
    let mut price_components = service.prices.clone();
    let mut ids: Vec<&str> = Vec::with_capacity(choice.len());
    for (dim, &o) in service.dimensions.iter().zip(choice) {
        let option = &dim.options[o];
        ids.push(&option.id);
        for a in &option.assignments {
            properties.insert(a.property.clone(), a.value.clone());
        }
        price_components.extend(option.prices.iter().cloned());
    }
    ResolvedVariant {
        service_id: service.id.clone(),
        variant_id: ids.join("/"),
        properties,
        price_components,
    }
}

/// Expands a validated description into its variants in lexicographic
/// order of option indices.
pub fn expand(service: &ServiceDescription) -> Result<Vec<ResolvedVariant>, VariantError> {
    let n = count(service);
    if n > MAX_VARIANTS {
        return Err(VariantError::TooManyVariants { count: n });
    }
    let sizes = sizes(service);
    if sizes.contains(&0) {
        return Ok(Vec::new());
    }
    let exclusions = compiled_exclusions(service);
    let mut out = Vec::with_capacity(n as usize);
    let mut choice = alloc::vec![0usize; sizes.len()];
    loop {
        if !excluded(&choice, &exclusions) {
            out.push(build(service, &choice));
        }
        if !advance(&mut choice, &sizes) {
            return Ok(out);
        }
    }
}

/// Builds the single variant named by `variant_id`, if it exists and is not
/// excluded.
pub fn resolve_variant(service: &ServiceDescription, variant_id: &str) -> Option<ResolvedVariant> {
    let choice: Vec<usize> = if service.dimensions.is_empty() {
        if !variant_id.is_empty() {
            return None;
        }
        Vec::new()
    } else {
        let parts: Vec<&str> = variant_id.split('/').collect();
        if parts.len() != service.dimensions.len() {
            return None;
        }
        service
            .dimensions
            .iter()
            .zip(parts)
            .map(|(d, id)| d.option_index(id))
            .collect::<Option<_>>()?
    };
    if excluded(&choice, &compiled_exclusions(service)) {
        return None;
    }
    Some(build(service, &choice))
}
