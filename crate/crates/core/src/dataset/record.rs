use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Macroeconomic conditions at issue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroSnapshot {
    pub tbill_3m: f64,
    pub gdp_growth_prior_year: f64,
    pub core_cpi: f64,
}

impl MacroSnapshot {
    pub fn is_finite(&self) -> bool {
        self.tbill_3m.is_finite() && self.gdp_growth_prior_year.is_finite() && self.core_cpi.is_finite()
    }
}

/// Agency rating on a single ordinal scale, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rating {
    Aaa,
    AaPlus,
    Aa,
    AaMinus,
    APlus,
    A,
    AMinus,
    BbbPlus,
    Bbb,
    BbbMinus,
    BbPlus,
    Bb,
    BbMinus,
    BPlus,
    B,
    BMinus,
    Ccc,
    Cc,
    C,
    D,
}

impl Rating {
    pub const SCALE: [Rating; 20] = [
        Rating::Aaa,
        Rating::AaPlus,
        Rating::Aa,
        Rating::AaMinus,
        Rating::APlus,
        Rating::A,
        Rating::AMinus,
        Rating::BbbPlus,
        Rating::Bbb,
        Rating::BbbMinus,
        Rating::BbPlus,
        Rating::Bb,
        Rating::BbMinus,
        Rating::BPlus,
        Rating::B,
        Rating::BMinus,
        Rating::Ccc,
        Rating::Cc,
        Rating::C,
        Rating::D,
    ];

    /// Position on the scale, 0 = AAA.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn from_rank(rank: usize) -> Option<Rating> {
        Self::SCALE.get(rank).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rating::Aaa => "AAA",
            Rating::AaPlus => "AA+",
            Rating::Aa => "AA",
            Rating::AaMinus => "AA-",
            Rating::APlus => "A+",
            Rating::A => "A",
            Rating::AMinus => "A-",
            Rating::BbbPlus => "BBB+",
            Rating::Bbb => "BBB",
            Rating::BbbMinus => "BBB-",
            Rating::BbPlus => "BB+",
            Rating::Bb => "BB",
            Rating::BbMinus => "BB-",
            Rating::BPlus => "B+",
            Rating::B => "B",
            Rating::BMinus => "B-",
            Rating::Ccc => "CCC",
            Rating::Cc => "CC",
            Rating::C => "C",
            Rating::D => "D",
        }
    }

    /// C and anything below it.
    pub fn is_default_grade(self) -> bool {
        self >= Rating::C
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Rating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // Accept the typographic minus as well as ASCII.
        let norm = s.trim().replace('\u{2212}', "-");
        Rating::SCALE
            .iter()
            .copied()
            .find(|r| r.symbol() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown rating symbol {s:?}")))
    }
}

impl Serialize for Rating {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const UNDISCLOSED: &str = "undisclosed";

/// One maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondRecord {
    pub id: String,
    pub state: String,
    pub use_of_proceeds: String,
    pub source_of_repayment: String,
    pub seniority: String,
    pub call_provision: String,
    pub tax_status: String,
    pub coupon: f64,
    pub duration_years: f64,
    pub spread: f64,
    pub rating: Rating,
    pub description: String,
    #[serde(rename = "macro")]
    pub macro_: MacroSnapshot,
    pub defaulted: bool,
}

impl BondRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("record {}: {what}", self.id)));
        if self.id.is_empty() {
            return Err(Error::invalid("record with empty id"));
        }
        if !(self.duration_years > 0.0 && self.duration_years.is_finite()) {
            return bad("duration_years must be positive");
        }
        if !(self.coupon >= 0.0 && self.coupon.is_finite()) {
            return bad("coupon must be non-negative");
        }
        if !self.spread.is_finite() {
            return bad("spread must be finite");
        }
        if self.description.trim().is_empty() {
            return bad("description must be non-empty");
        }
        if !self.macro_.is_finite() {
            return bad("macro snapshot must be finite");
        }
        Ok(())
    }
}

/// A record type that can be turned into a feature row.
///
/// Names are per type; values are looked up by position in those lists.
pub trait TabularRecord {
    fn categorical_names() -> &'static [&'static str];
    fn continuous_names() -> &'static [&'static str];
    fn key(&self) -> &str;
    fn label(&self) -> bool;
    fn categorical(&self, i: usize) -> &str;
    fn continuous(&self, i: usize) -> f64;
}

impl TabularRecord for BondRecord {
    fn categorical_names() -> &'static [&'static str] {
        &[
            "state",
            "use_of_proceeds",
            "source_of_repayment",
            "seniority",
            "call_provision",
            "tax_status",
        ]
    }

    fn continuous_names() -> &'static [&'static str] {
        &[
            "coupon",
            "duration_years",
            "tbill_3m",
            "gdp_growth_prior_year",
            "core_cpi",
        ]
    }

    fn key(&self) -> &str {
        &self.id
    }

    fn label(&self) -> bool {
        self.defaulted
    }

    fn categorical(&self, i: usize) -> &str {
        match i {
            0 => &self.state,
            1 => &self.use_of_proceeds,
            2 => &self.source_of_repayment,
            3 => &self.seniority,
            4 => &self.call_provision,
            5 => &self.tax_status,
            _ => panic!("categorical feature index {i} out of range"),
        }
    }

    fn continuous(&self, i: usize) -> f64 {
        match i {
            0 => self.coupon,
            1 => self.duration_years,
            2 => self.macro_.tbill_3m,
            3 => self.macro_.gdp_growth_prior_year,
            4 => self.macro_.core_cpi,
            _ => panic!("continuous feature index {i} out of range"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_order_and_default_grade() {
        assert!(Rating::Aaa < Rating::C);
        assert!(Rating::C.is_default_grade());
        assert!(Rating::D.is_default_grade());
        assert!(!Rating::Cc.is_default_grade());
        assert!(!Rating::Aaa.is_default_grade());
        for (i, r) in Rating::SCALE.iter().enumerate() {
            assert_eq!(r.rank(), i);
            assert_eq!(r.symbol().parse::<Rating>().unwrap(), *r);
        }
        assert_eq!("AA\u{2212}".parse::<Rating>().unwrap(), Rating::AaMinus);
        assert!("Z".parse::<Rating>().is_err());
    }
}
