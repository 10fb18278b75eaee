//! Market- and agency-implied default judgements.

use crate::dataset::Rating;
use crate::error::{Error, Result};

/// Spread at which the market is taken to price near-certain default.
pub const SPREAD_SATURATION: f64 = 0.10;

/// Implied default probability: spreads mapped linearly onto [0, 1],
/// saturating at [`SPREAD_SATURATION`].
pub fn spread_baseline(spreads: &[f64]) -> Result<Vec<f64>> {
    spreads
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s.is_finite() {
                Ok((s / SPREAD_SATURATION).clamp(0.0, 1.0))
            } else {
                Err(Error::invalid(format!("spread {i} is not finite")))
            }
        })
        .collect()
}

/// Default predicted for grades C and below.
pub fn rating_predictions(ratings: &[Rating]) -> Vec<bool> {
    ratings.iter().map(|r| r.is_default_grade()).collect()
}

/// As [`rating_predictions`], parsing rating symbols first.
pub fn rating_baseline<S: AsRef<str>>(symbols: &[S]) -> Result<Vec<bool>> {
    symbols
        .iter()
        .map(|s| {
            s.as_ref()
                .parse::<Rating>()
                .map(|r| r.is_default_grade())
                .map_err(|_| Error::invalid(format!("unknown rating symbol {:?}", s.as_ref())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_map() {
        assert_eq!(spread_baseline(&[0.10, 0.0, 0.05, 0.2, -0.01]).unwrap(), vec![1.0, 0.0, 0.5, 1.0, 0.0]);
        assert!(spread_baseline(&[f64::NAN]).is_err());
    }

    #[test]
    fn rating_threshold() {
        assert_eq!(rating_baseline(&["C", "AAA", "D", "CC", "CCC"]).unwrap(), vec![true, false, true, false, false]);
        assert!(rating_baseline(&["Z"]).is_err());
    }
}
