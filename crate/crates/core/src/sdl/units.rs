use core::fmt;
use core::str::FromStr;

use rust_decimal::Decimal;

/// Built-in measurement units. Storage is decimal SI with GB as base,
/// time uses seconds as base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unit {
    Megabyte,
    Gigabyte,
    Terabyte,
    Millisecond,
    Second,
    Minute,
    Hour,
    Percent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Storage,
    Time,
    Ratio,
}

impl Unit {
    pub const ALL: [Unit; 8] = [
        Unit::Megabyte,
        Unit::Gigabyte,
        Unit::Terabyte,
        Unit::Millisecond,
        Unit::Second,
        Unit::Minute,
        Unit::Hour,
        Unit::Percent,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Megabyte => "MB",
            Unit::Gigabyte => "GB",
            Unit::Terabyte => "TB",
            Unit::Millisecond => "ms",
            Unit::Second => "s",
            Unit::Minute => "min",
            Unit::Hour => "h",
            Unit::Percent => "percent",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Unit> {
        Unit::ALL.into_iter().find(|u| u.symbol() == symbol)
    }

    pub fn kind(self) -> UnitKind {
        match self {
            Unit::Megabyte | Unit::Gigabyte | Unit::Terabyte => UnitKind::Storage,
            Unit::Millisecond | Unit::Second | Unit::Minute | Unit::Hour => UnitKind::Time,
            Unit::Percent => UnitKind::Ratio,
        }
    }

    /// Size of one of this unit expressed in the base unit of its kind.
    fn base_factor(self) -> Decimal {
        match self {
            Unit::Megabyte | Unit::Millisecond => Decimal::new(1, 3),
            Unit::Gigabyte | Unit::Second | Unit::Percent => Decimal::ONE,
            Unit::Terabyte => Decimal::new(1000, 0),
            Unit::Minute => Decimal::new(60, 0),
            Unit::Hour => Decimal::new(3600, 0),
        }
    }

    /// Converts `magnitude` from `self` into `target`. Returns `None` when
    /// the units measure different things or the result overflows.
    pub fn convert(self, magnitude: Decimal, target: Unit) -> Option<Decimal> {
        if self.kind() != target.kind() {
            return None;
        }
        if self == target {
            return Some(magnitude);
        }
        magnitude
            .checked_mul(self.base_factor())?
            .checked_div(target.base_factor())
            .map(|d| d.normalize())
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::from_symbol(s).ok_or(())
    }
}
