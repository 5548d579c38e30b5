//! Exact percentages.

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};

/// A percentage held as an exact rational in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percentage(Ratio<u64>);

impl Percentage {
    /// `100 * numerator / denominator`. Returns `None` when the denominator is zero.
    pub fn of(numerator: u64, denominator: u64) -> Option<Self> {
        if denominator == 0 {
            return None;
        }
        Some(Percentage(Ratio::new(numerator * 100, denominator)))
    }

    pub fn zero() -> Self {
        Percentage(Ratio::from_integer(0))
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Render with `places` decimals, truncating rather than rounding.
    ///
    /// Reported tables truncate: 8863 of 9999 claims is shown as `88.63`,
    /// not `88.64`.
    pub fn truncated(&self, places: u32) -> String {
        let scale = 10u64.pow(places);
        let scaled = (self.0 * Ratio::from_integer(scale)).to_integer();
        let whole = scaled / scale;
        if places == 0 {
            return whole.to_string();
        }
        let frac = scaled % scale;
        format!("{whole}.{frac:0width$}", width = places as usize)
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.truncated(2))
    }
}

impl Serialize for Percentage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_matches_reported_tables() {
        assert_eq!(Percentage::of(131969, 145449).unwrap().truncated(2), "90.73");
        assert_eq!(Percentage::of(17749, 19998).unwrap().truncated(2), "88.75");
        assert_eq!(Percentage::of(8863, 9999).unwrap().truncated(2), "88.63");
    }

    #[test]
    fn exact_values() {
        assert_eq!(Percentage::of(4, 5).unwrap().truncated(1), "80.0");
        assert_eq!(Percentage::of(1, 1).unwrap().to_f64(), 100.0);
        assert_eq!(Percentage::of(0, 3).unwrap().truncated(0), "0");
        assert!(Percentage::of(1, 0).is_none());
    }
}
