//! Exact non-negative rationals for sampling fractions, tolerances and
//! theoretical means. Kept as integer pairs so bound checks never go
//! through floating point.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Ratio { num, den }.reduced()
    }

    fn reduced(self) -> Self {
        let g = gcd(self.num.max(1), self.den);
        Ratio {
            num: self.num / g,
            den: self.den / g,
        }
    }

    /// ceil(x * num / den), exact in u128.
    pub fn ceil_mul(&self, x: u64) -> u64 {
        let p = x as u128 * self.num as u128;
        p.div_ceil(self.den as u128) as u64
    }

    /// x * num / den as an unreduced rational against `x`.
    pub fn mul_int(&self, x: u64) -> Ratio {
        Ratio::new(self.num.checked_mul(x).expect("ratio overflow"), self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Round to two decimal places, half away from zero, exactly.
    pub fn round2(&self) -> f64 {
        let scaled = self.num as u128 * 200 + self.den as u128;
        let cents = scaled / (2 * self.den as u128);
        cents as f64 / 100.0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_mul_matches_definition() {
        let tenth = Ratio::new(1, 10);
        assert_eq!(tenth.ceil_mul(97), 10);
        assert_eq!(tenth.ceil_mul(10), 1);
        assert_eq!(tenth.ceil_mul(11), 2);
        assert_eq!(tenth.ceil_mul(0), 0);
    }

    #[test]
    fn round2_half_away_from_zero() {
        assert_eq!(Ratio::new(97, 10).round2(), 9.7);
        assert_eq!(Ratio::new(1438, 500).round2(), 2.88); // 2.876
        assert_eq!(Ratio::new(5, 1000).round2(), 0.01); // 0.005 rounds up
    }
}
