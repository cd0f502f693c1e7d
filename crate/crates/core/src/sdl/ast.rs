use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rust_decimal::Decimal;

use super::error::Origin;
use super::units::Unit;
use crate::pricing::PriceComponent;

/// An ISO-4217 style currency code: exactly three ASCII uppercase letters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Currency(String);

impl Currency {
    pub fn new(code: &str) -> Option<Self> {
        if is_currency_code(code) {
            Some(Currency(code.into()))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_currency_code(word: &str) -> bool {
    word.len() == 3 && word.bytes().all(|b| b.is_ascii_uppercase())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Money {
    pub amount: Decimal,
    pub currency: Currency,
}

impl Money {
    pub fn new(amount: Decimal, currency: Currency) -> Self {
        Money { amount, currency }
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.amount, self.currency)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyType {
    String,
    Text,
    Boolean,
    Integer,
    Decimal,
    Money,
    Url,
    Quantity(Unit),
    Enum(Vec<String>),
    Features(String),
}

impl PropertyType {
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            PropertyType::Integer
                | PropertyType::Decimal
                | PropertyType::Quantity(_)
                | PropertyType::Money
        )
    }

    /// Types whose values can be listed as facets.
    pub fn is_facetable(&self) -> bool {
        matches!(
            self,
            PropertyType::Enum(_) | PropertyType::Boolean | PropertyType::Features(_)
        )
    }
}

impl fmt::Display for PropertyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyType::String => f.write_str("string"),
            PropertyType::Text => f.write_str("text"),
            PropertyType::Boolean => f.write_str("boolean"),
            PropertyType::Integer => f.write_str("integer"),
            PropertyType::Decimal => f.write_str("decimal"),
            PropertyType::Money => f.write_str("money"),
            PropertyType::Url => f.write_str("url"),
            PropertyType::Quantity(unit) => write!(f, "quantity<{unit}>"),
            PropertyType::Enum(members) => {
                f.write_str("enum(")?;
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(m)?;
                }
                f.write_str(")")
            }
            PropertyType::Features(set) => write!(f, "features({set})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedValue {
    String(String),
    Text(String),
    Bool(bool),
    Integer(i64),
    Decimal(Decimal),
    Money(Money),
    Url(String),
    Quantity { magnitude: Decimal, unit: Unit },
    Enum(String),
    Features(BTreeSet<String>),
}

impl TypedValue {
    /// Short name of the value's shape, used in diagnostics.
    pub fn kind_name(&self) -> &'static str {
        match self {
            TypedValue::String(_) => "string",
            TypedValue::Text(_) => "text",
            TypedValue::Bool(_) => "boolean",
            TypedValue::Integer(_) => "integer",
            TypedValue::Decimal(_) => "decimal",
            TypedValue::Money(_) => "money",
            TypedValue::Url(_) => "url",
            TypedValue::Quantity { .. } => "quantity",
            TypedValue::Enum(_) => "identifier",
            TypedValue::Features(_) => "feature list",
        }
    }

    /// Numeric magnitude for range and tendency comparisons. Money yields
    /// its amount; the currency is checked separately.
    pub fn numeric(&self) -> Option<Decimal> {
        match self {
            TypedValue::Integer(i) => Some(Decimal::from(*i)),
            TypedValue::Decimal(d) => Some(*d),
            TypedValue::Quantity { magnitude, .. } => Some(*magnitude),
            TypedValue::Money(m) => Some(m.amount),
            _ => None,
        }
    }

    pub fn currency(&self) -> Option<&Currency> {
        match self {
            TypedValue::Money(m) => Some(&m.currency),
            _ => None,
        }
    }

    pub fn features(&self) -> Option<&BTreeSet<String>> {
        match self {
            TypedValue::Features(f) => Some(f),
            _ => None,
        }
    }

    /// Textual form of discrete values (strings, urls, enum members).
    pub fn as_text(&self) -> Option<&str> {
        match self {
            TypedValue::String(s) | TypedValue::Text(s) | TypedValue::Url(s) => Some(s),
            TypedValue::Enum(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDef {
    pub name: String,
    pub ty: PropertyType,
    pub doc: String,
    pub relevance: String,
    pub importance: u8,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    pub name: String,
    pub features: Vec<String>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub id: String,
    pub feature_sets: Vec<FeatureSet>,
    pub properties: Vec<PropertyDef>,
    pub origin: Origin,
}

impl Vocabulary {
    pub fn property(&self, name: &str) -> Option<&PropertyDef> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn feature_set(&self, name: &str) -> Option<&FeatureSet> {
        self.feature_sets.iter().find(|s| s.name == name)
    }
}

/// One `set` statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub property: String,
    pub value: TypedValue,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantOption {
    pub id: String,
    pub assignments: Vec<Assignment>,
    pub prices: Vec<PriceComponent>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub name: String,
    pub options: Vec<VariantOption>,
    pub origin: Origin,
}

impl Dimension {
    pub fn option_index(&self, id: &str) -> Option<usize> {
        self.options.iter().position(|o| o.id == id)
    }
}

/// A conjunctive partial assignment of options; every combination that
/// agrees with all bindings is excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub bindings: Vec<(String, String)>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extractor {
    JsonPointer(String),
    Regex(String),
    Css(String),
}

impl Extractor {
    pub fn kind(&self) -> &'static str {
        match self {
            Extractor::JsonPointer(_) => "json_pointer",
            Extractor::Regex(_) => "regex",
            Extractor::Css(_) => "css",
        }
    }

    pub fn expression(&self) -> &str {
        match self {
            Extractor::JsonPointer(e) | Extractor::Regex(e) | Extractor::Css(e) => e,
        }
    }
}

pub const MIN_FETCH_INTERVAL_SECS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRule {
    pub target: String,
    pub url: String,
    pub extractor: Extractor,
    pub parse_as: PropertyType,
    pub interval_secs: u64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDescription {
    pub id: String,
    pub vocabulary_id: String,
    pub assignments: Vec<Assignment>,
    pub dimensions: Vec<Dimension>,
    pub exclusions: Vec<Exclusion>,
    pub prices: Vec<PriceComponent>,
    pub fetch_rules: Vec<FetchRule>,
    pub origin: Origin,
}

impl ServiceDescription {
    /// Base property values keyed by property name. Statement order does
    /// not matter since a property may be assigned only once.
    pub fn base_properties(&self) -> BTreeMap<String, TypedValue> {
        assignments_map(&self.assignments)
    }

    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name == name)
    }

    pub fn set_property(&mut self, property: &str, value: TypedValue) {
        match self.assignments.iter_mut().find(|a| a.property == property) {
            Some(a) => a.value = value,
            None => self.assignments.push(Assignment {
                property: property.into(),
                value,
                origin: Origin::default(),
            }),
        }
    }

    /// Smallest fetch interval, if the service has any fetch rules.
    pub fn refresh_interval_secs(&self) -> Option<u64> {
        self.fetch_rules.iter().map(|r| r.interval_secs).min()
    }
}

pub fn assignments_map(assignments: &[Assignment]) -> BTreeMap<String, TypedValue> {
    assignments
        .iter()
        .map(|a| (a.property.clone(), a.value.clone()))
        .collect()
}

/// Everything found in one source file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub vocabularies: Vec<Vocabulary>,
    pub services: Vec<ServiceDescription>,
}
