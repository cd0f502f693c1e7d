//! Price components and cost quotes for a usage profile.
//!
//! All arithmetic is exact decimal. Costs are rounded (banker's rounding,
//! four fractional digits) once per line item; totals are exact sums of the
//! rounded line items.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rust_decimal::{Decimal, RoundingStrategy};

use crate::sdl::{Currency, Money};
use crate::variants::ResolvedVariant;

/// Billing hours in one month.
pub const HOURS_PER_MONTH: u32 = 730;
pub const MONTHS_PER_YEAR: u32 = 12;
/// Fractional digits kept on every line item.
pub const LINE_ITEM_DIGITS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    Hour,
    Month,
    Year,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Hour => "hour",
            Period::Month => "month",
            Period::Year => "year",
        }
    }

    pub fn parse(s: &str) -> Option<Period> {
        match s {
            "hour" => Some(Period::Hour),
            "month" => Some(Period::Month),
            "year" => Some(Period::Year),
            _ => None,
        }
    }

    /// Number of these periods in `months` months.
    pub fn periods_in(self, months: u32) -> Decimal {
        let months = Decimal::from(months);
        match self {
            Period::Hour => months * Decimal::from(HOURS_PER_MONTH),
            Period::Month => months,
            Period::Year => months / Decimal::from(MONTHS_PER_YEAR),
        }
    }

    /// Cost over `months` months of `per_period` charged once per period.
    /// Multiplies before dividing so yearly charges stay exact.
    pub fn scale(self, per_period: Decimal, months: u32) -> Option<Decimal> {
        let months = Decimal::from(months);
        match self {
            Period::Hour => per_period
                .checked_mul(months)?
                .checked_mul(Decimal::from(HOURS_PER_MONTH)),
            Period::Month => per_period.checked_mul(months),
            Period::Year => per_period
                .checked_mul(months)?
                .checked_div(Decimal::from(MONTHS_PER_YEAR)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierMode {
    /// Each band prices the units that fall into it.
    Graduated,
    /// The band holding the last unit prices every billable unit.
    Volume,
}

impl TierMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TierMode::Graduated => "graduated",
            TierMode::Volume => "volume",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierBand {
    /// Inclusive cumulative upper bound; `None` is unbounded.
    pub upto: Option<Decimal>,
    pub unit_price: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierSchedule {
    pub mode: TierMode,
    pub bands: Vec<TierBand>,
}

impl TierSchedule {
    /// Checks that bounds strictly increase and only the last band is
    /// unbounded.
    pub fn check(&self) -> Result<(), String> {
        if self.bands.is_empty() {
            return Err("tier schedule needs at least one band".into());
        }
        let mut previous: Option<Decimal> = None;
        for (i, band) in self.bands.iter().enumerate() {
            let last = i + 1 == self.bands.len();
            match (band.upto, last) {
                (None, true) => {}
                (None, false) => return Err("only the last tier may be unbounded".into()),
                (Some(_), true) => return Err("the last tier must be unbounded (upto inf)".into()),
                (Some(bound), false) => {
                    if bound <= Decimal::ZERO || previous.is_some_and(|p| bound <= p) {
                        return Err("tier bounds must be positive and strictly increasing".into());
                    }
                    previous = Some(bound);
                }
            }
            if band.unit_price.amount.is_sign_negative() && !band.unit_price.amount.is_zero() {
                return Err("tier prices must not be negative".into());
            }
        }
        Ok(())
    }

    /// Monthly cost of the units between `included` and `quantity`.
    pub fn cost(&self, quantity: Decimal, included: Decimal) -> Decimal {
        if quantity <= included {
            return Decimal::ZERO;
        }
        match self.mode {
            TierMode::Graduated => {
                let mut lower = Decimal::ZERO;
                let mut total = Decimal::ZERO;
                for band in &self.bands {
                    let start = lower.max(included);
                    let end = match band.upto {
                        Some(upper) => upper.min(quantity),
                        None => quantity,
                    };
                    if end > start {
                        total += (end - start) * band.unit_price.amount;
                    }
                    match band.upto {
                        Some(upper) if upper < quantity => lower = upper,
                        _ => break,
                    }
                }
                total
            }
            TierMode::Volume => {
                let band = self
                    .bands
                    .iter()
                    .find(|b| b.upto.is_none_or(|upper| quantity <= upper))
                    .unwrap_or_else(|| self.bands.last().expect("checked schedule"));
                (quantity - included) * band.unit_price.amount
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerUnitPrice {
    pub metric: String,
    pub unit_price: Money,
    pub period: Period,
    pub included: Decimal,
    /// When present the band prices govern and `unit_price` is nominal.
    pub tiers: Option<TierSchedule>,
}

impl PerUnitPrice {
    /// Monthly cost for `quantity` units used in one month, before the
    /// period factor is applied.
    pub fn monthly_cost(&self, quantity: Decimal) -> Decimal {
        match &self.tiers {
            Some(tiers) => tiers.cost(quantity, self.included),
            None => (quantity - self.included).max(Decimal::ZERO) * self.unit_price.amount,
        }
    }

    /// Units billed in one month.
    pub fn billable(&self, quantity: Decimal) -> Decimal {
        (quantity - self.included).max(Decimal::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriceComponent {
    Fixed { amount: Money, period: Period },
    OneTime { amount: Money },
    PerUnit(PerUnitPrice),
}

impl PriceComponent {
    pub fn kind(&self) -> &'static str {
        match self {
            PriceComponent::Fixed { .. } => "fixed",
            PriceComponent::OneTime { .. } => "one_time",
            PriceComponent::PerUnit(_) => "per_unit",
        }
    }

    pub fn currency(&self) -> &Currency {
        match self {
            PriceComponent::Fixed { amount, .. } | PriceComponent::OneTime { amount } => {
                &amount.currency
            }
            PriceComponent::PerUnit(p) => &p.unit_price.currency,
        }
    }

    /// Every money value the component carries.
    pub fn money_values(&self) -> Vec<&Money> {
        match self {
            PriceComponent::Fixed { amount, .. } | PriceComponent::OneTime { amount } => {
                alloc::vec![amount]
            }
            PriceComponent::PerUnit(p) => {
                let mut all = alloc::vec![&p.unit_price];
                if let Some(t) = &p.tiers {
                    all.extend(t.bands.iter().map(|b| &b.unit_price));
                }
                all
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageProfile {
    pub horizon_months: u32,
    /// Monthly quantity per metric; missing metrics count as zero.
    pub metrics: BTreeMap<String, Decimal>,
}

impl UsageProfile {
    pub fn new(horizon_months: u32) -> Self {
        UsageProfile {
            horizon_months,
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, metric: &str, quantity: Decimal) -> Self {
        self.metrics.insert(metric.into(), quantity);
        self
    }

    pub fn quantity(&self, metric: &str) -> Decimal {
        self.metrics.get(metric).copied().unwrap_or(Decimal::ZERO)
    }

    pub fn check(&self) -> Result<(), PricingError> {
        if self.horizon_months == 0 {
            return Err(PricingError::InvalidHorizon);
        }
        for (metric, q) in &self.metrics {
            if q.is_sign_negative() && !q.is_zero() {
                return Err(PricingError::NegativeUsage(metric.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PricingError {
    MixedCurrencies { expected: Currency, found: Currency },
    NegativeUsage(String),
    InvalidHorizon,
    Overflow,
}

impl fmt::Display for PricingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PricingError::MixedCurrencies { expected, found } => {
                write!(f, "mixed currencies: {expected} and {found}")
            }
            PricingError::NegativeUsage(m) => write!(f, "negative usage for metric `{m}`"),
            PricingError::InvalidHorizon => f.write_str("horizon must be at least one month"),
            PricingError::Overflow => f.write_str("arithmetic overflow while pricing"),
        }
    }
}

impl core::error::Error for PricingError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineItem {
    /// Index of the component within the priced list.
    pub component: usize,
    pub billed_quantity: Decimal,
    pub cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceQuote {
    /// `None` only when there is nothing to price.
    pub currency: Option<Currency>,
    pub total: Decimal,
    pub line_items: Vec<LineItem>,
}

pub fn round_line_item(cost: Decimal) -> Decimal {
    cost.round_dp_with_strategy(LINE_ITEM_DIGITS, RoundingStrategy::MidpointNearestEven)
        .normalize()
}

fn mul(a: Decimal, b: Decimal) -> Result<Decimal, PricingError> {
    a.checked_mul(b).ok_or(PricingError::Overflow)
}

fn line_item(
    index: usize,
    c: &PriceComponent,
    usage: &UsageProfile,
) -> Result<LineItem, PricingError> {
    let horizon = usage.horizon_months;
    let (billed_quantity, cost) = match c {
        PriceComponent::Fixed { amount, period } => {
            let cost = period
                .scale(amount.amount, horizon)
                .ok_or(PricingError::Overflow)?;
            (period.periods_in(horizon), cost)
        }
        PriceComponent::OneTime { amount } => (Decimal::ONE, amount.amount),
        PriceComponent::PerUnit(p) => {
            let quantity = usage.quantity(&p.metric);
            let months = Decimal::from(horizon);
            let billed = mul(p.billable(quantity), months)?;
            let cost = p
                .period
                .scale(p.monthly_cost(quantity), horizon)
                .ok_or(PricingError::Overflow)?;
            (billed, cost)
        }
    };
    Ok(LineItem {
        component: index,
        billed_quantity: billed_quantity.normalize(),
        cost: round_line_item(cost),
    })
}

/// Cost of one component over the usage horizon, rounded to the line-item
/// precision.
pub fn component_cost(c: &PriceComponent, usage: &UsageProfile) -> Result<Money, PricingError> {
    usage.check()?;
    let item = line_item(0, c, usage)?;
    Ok(Money::new(item.cost, c.currency().clone()))
}

/// Prices a list of components that must share one currency.
pub fn quote_components(
    components: &[PriceComponent],
    usage: &UsageProfile,
) -> Result<PriceQuote, PricingError> {
    usage.check()?;
    let currency = match components.first() {
        Some(first) => {
            let expected = first.currency();
            for c in components {
                for m in c.money_values() {
                    if &m.currency != expected {
                        return Err(PricingError::MixedCurrencies {
                            expected: expected.clone(),
                            found: m.currency.clone(),
                        });
                    }
                }
            }
            Some(expected.clone())
        }
        None => None,
    };
    let line_items = components
        .iter()
        .enumerate()
        .map(|(i, c)| line_item(i, c, usage))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = Decimal::ZERO;
    for item in &line_items {
        total = total.checked_add(item.cost).ok_or(PricingError::Overflow)?;
    }
    Ok(PriceQuote {
        currency,
        total: total.normalize(),
        line_items,
    })
}

pub fn quote(variant: &ResolvedVariant, usage: &UsageProfile) -> Result<PriceQuote, PricingError> {
    quote_components(&variant.price_components, usage)
}
