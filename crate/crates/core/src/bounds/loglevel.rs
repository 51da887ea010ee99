use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Level-0 values above this move up a level, and likewise level 1 to 2.
pub const PROMOTE_ABOVE: f64 = 500.0;

/// A magnitude `v`, `eᵛ` or `e^{eᵛ}` by `level`.
///
/// Levels 1 and 2 always denote positive numbers; negative numbers and zero
/// live at level 0. Values are promoted when they exceed
/// [`PROMOTE_ABOVE`] and never demoted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLevelNumber {
    level: u8,
    value: f64,
}

impl LogLevelNumber {
    pub const ZERO: Self = LogLevelNumber { level: 0, value: 0.0 };
    pub const ONE: Self = LogLevelNumber { level: 0, value: 1.0 };

    pub fn new(level: u8, value: f64) -> Result<Self> {
        if level > 2 {
            return Err(invalid(format!("level {level} is beyond e^e^v")));
        }
        if value.is_nan() || (level > 0 && value == f64::INFINITY) {
            return Err(invalid("log-level value must be a number"));
        }
        Ok(Self::canonical(level, value))
    }

    fn canonical(mut level: u8, mut value: f64) -> Self {
        while level < 2 && value > PROMOTE_ABOVE && value.is_finite() {
            value = value.ln();
            level += 1;
        }
        LogLevelNumber { level, value }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::canonical(0, x)
    }

    /// `eˣ`.
    pub fn exp_of(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self::canonical(1, x)
    }

    /// `e^{eˣ}`.
    pub fn exp_exp_of(x: f64) -> Self {
        Self::canonical(2, x)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_positive(&self) -> bool {
        self.level > 0 || self.value > 0.0
    }

    /// Nearest double (may be `inf`).
    pub fn to_f64(&self) -> f64 {
        match self.level {
            0 => self.value,
            1 => self.value.exp(),
            _ => self.value.exp().exp(),
        }
    }

    /// `ln` of a positive number as a double (may be `inf` at level 2).
    pub fn ln_f64(&self) -> Result<f64> {
        match self.level {
            0 if self.value > 0.0 => Ok(self.value.ln()),
            0 => Err(invalid("logarithm of a non-positive number")),
            1 => Ok(self.value),
            _ => Ok(self.value.exp()),
        }
    }

    /// `ln` of a positive number, one level down.
    pub fn ln(&self) -> Result<Self> {
        match self.level {
            0 => Ok(Self::from_f64(self.ln_f64()?)),
            1 => Ok(Self::from_f64(self.value)),
            _ => Ok(Self::exp_of(self.value)),
        }
    }

    /// `eˢᵉˡᶠ`.
    pub fn exp(&self) -> Result<Self> {
        match self.level {
            0 => Ok(Self::exp_of(self.value)),
            1 => Ok(Self::exp_exp_of(self.value)),
            _ => Err(invalid("e^ of a level-2 number overflows the tower")),
        }
    }

    pub fn neg(&self) -> Result<Self> {
        if self.level == 0 {
            Ok(LogLevelNumber { level: 0, value: -self.value })
        } else {
            Err(invalid("negative numbers beyond level 0 are not representable"))
        }
    }

    fn abs0(&self) -> Self {
        if self.level == 0 {
            Self::canonical(0, self.value.abs())
        } else {
            *self
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.level == 0 && other.level == 0 {
            return Ok(Self::from_f64(self.value + other.value));
        }
        match (self.is_positive(), other.is_positive()) {
            (true, true) => Ok(Self::log_sum(self, other)),
            (true, false) => self.sub(&other.abs0()),
            (false, true) => other.sub(&self.abs0()),
            (false, false) => Ok(Self::from_f64(self.value + other.value)),
        }
    }

    fn log_sum(a: &Self, b: &Self) -> Self {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let (Ok(lh), Ok(ll)) = (hi.ln_f64(), lo.ln_f64()) else {
            // one side is zero
            return *hi;
        };
        if !lh.is_finite() {
            return *hi;
        }
        Self::exp_of(lh + (ll - lh).exp().ln_1p())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.level == 0 && other.level == 0 {
            return Ok(Self::from_f64(self.value - other.value));
        }
        if !other.is_positive() {
            return self.add(&other.neg()?);
        }
        if !self.is_positive() {
            // −(|a| + b)
            let s = self.abs0().add(other)?;
            return Ok(LogLevelNumber { level: 0, value: -s.to_f64() });
        }
        match (*self).partial_cmp(other) {
            Some(Ordering::Equal) => Ok(Self::ZERO),
            Some(Ordering::Greater) => {
                let la = self.ln_f64()?;
                let lb = other.ln_f64()?;
                if !la.is_finite() {
                    return Ok(*self);
                }
                Ok(Self::exp_of(la + (-(lb - la).exp_m1()).ln()))
            }
            _ => Ok(LogLevelNumber { level: 0, value: -other.sub(self)?.to_f64() }),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.level == 0 && other.level == 0 {
            return Ok(Self::from_f64(self.value * other.value));
        }
        if (self.level == 0 && self.value == 0.0) || (other.level == 0 && other.value == 0.0) {
            return Ok(Self::ZERO);
        }
        let negative = !self.is_positive() ^ !other.is_positive();
        let l = self.abs0().ln()?.add(&other.abs0().ln()?)?;
        let m = l.exp()?;
        if negative {
            m.neg()
        } else {
            Ok(m)
        }
    }

    /// `selfᵖ` for a positive base.
    pub fn pow(&self, p: f64) -> Result<Self> {
        if !self.is_positive() {
            return Err(invalid("power of a non-positive number"));
        }
        if p == 0.0 {
            return Ok(Self::ONE);
        }
        self.ln()?.mul(&Self::from_f64(p))?.exp()
    }
}

impl PartialOrd for LogLevelNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl LogLevelNumber {
    /// Total order agreeing with the real values denoted.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self.is_positive(), other.is_positive()) {
            (false, false) => self.value.total_cmp(&other.value),
            (false, true) => Ordering::Less,
            (true, false) => Ordering::Greater,
            (true, true) => {
                if self.level == 2 && other.level == 2 {
                    return self.value.total_cmp(&other.value);
                }
                if self.level == other.level {
                    return self.value.total_cmp(&other.value);
                }
                let a = self.ln_f64().expect("positive");
                let b = other.ln_f64().expect("positive");
                a.total_cmp(&b)
            }
        }
    }
}

impl fmt::Display for LogLevelNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level {
            0 => write!(f, "{}", self.value),
            1 => write!(f, "exp({})", self.value),
            _ => write!(f, "exp(exp({}))", self.value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn promotion_is_canonical() {
        let x = LogLevelNumber::from_f64(1000.0);
        assert_eq!(x.level(), 1);
        assert!((x.value() - 1000f64.ln()).abs() < 1e-12);
        assert_eq!(LogLevelNumber::from_f64(-1e6).level(), 0);
        let y = LogLevelNumber::exp_of(1e4);
        assert_eq!(y.level(), 2);
        assert!((y.ln().unwrap().to_f64() - 1e4).abs() < 1e-8);
    }

    #[test]
    fn tower_ordering() {
        let a = LogLevelNumber::exp_exp_of(3.0);
        let b = LogLevelNumber::exp_of(499.0);
        let c = LogLevelNumber::exp_exp_of(7.0);
        assert!(b < c);
        assert!(a < b, "e^e^3 ≈ e^20 < e^499");
        assert!(LogLevelNumber::from_f64(-3.0) < LogLevelNumber::exp_of(-50.0));
    }

    #[test]
    fn big_arithmetic() {
        // 193^256
        let x = LogLevelNumber::from_f64(193.0).pow(256.0).unwrap();
        assert!((x.ln_f64().unwrap() - 256.0 * 193f64.ln()).abs() < 1e-9);
        let sq = x.mul(&x).unwrap();
        assert!((sq.ln_f64().unwrap() - 512.0 * 193f64.ln()).abs() < 1e-9);
        let huge = LogLevelNumber::exp_exp_of(800.0);
        assert_eq!(huge.add(&LogLevelNumber::from_f64(5.0)).unwrap(), huge);
        let d = LogLevelNumber::exp_of(600.0).sub(&LogLevelNumber::exp_of(599.0)).unwrap();
        assert!((d.ln_f64().unwrap() - (600.0 + (-(-1f64).exp_m1()).ln())).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn order_matches_reals(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (x, y) = (LogLevelNumber::from_f64(a), LogLevelNumber::from_f64(b));
            prop_assert_eq!(x.total_cmp(&y), a.total_cmp(&b));
        }

        #[test]
        fn arithmetic_matches_reals(a in 1e-3f64..1e4, b in 1e-3f64..1e4) {
            let (x, y) = (LogLevelNumber::from_f64(a), LogLevelNumber::from_f64(b));
            let close = |l: LogLevelNumber, r: f64| ((l.to_f64() - r) / r.abs().max(1e-300)).abs() < 1e-9;
            prop_assert!(close(x.mul(&y).unwrap(), a * b));
            prop_assert!(close(x.add(&y).unwrap(), a + b));
            prop_assert!(close(x.pow(1.5).unwrap(), a.powf(1.5)));
            let diff = x.sub(&y).unwrap().to_f64();
            prop_assert!((diff - (a - b)).abs() <= 1e-9 * a.max(b));
        }

        #[test]
        fn monotone_in_log_domain(u in -400f64..2000.0, v in -400f64..2000.0) {
            let (x, y) = (LogLevelNumber::exp_of(u), LogLevelNumber::exp_of(v));
            prop_assert_eq!(x.total_cmp(&y), u.total_cmp(&v));
        }
    }
}
