//! The two-group privacy setting: a fraction `f` of `n` users at level
//! `eps1`, the rest at `eps2 >= eps1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::PrivacyVector;

/// Which branch of the two-group solution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `r <= R`: weights proportional to the privacy levels.
    A,
    /// `r >= R`: weights saturated at ratio `R`, independent of `eps2`.
    B,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::A => write!(f, "A"),
            Regime::B => write!(f, "B"),
        }
    }
}

/// Saturation ratio `R` together with the `eps2` threshold `R * eps1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub ratio: f64,
    pub threshold: f64,
    /// Set when `eps1 = 0` or `f = 0`: the first group carries no usable
    /// signal and `R` is infinite.
    pub degenerate_group: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupProfile {
    pub eps1: f64,
    pub eps2: f64,
    pub n: u64,
    pub f: f64,
}

impl TwoGroupProfile {
    /// Validates and normalizes so that `eps1 <= eps2`, swapping the groups
    /// (and `f` with `1 - f`) if needed.
    pub fn new(eps1: f64, eps2: f64, n: u64, f: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be positive"));
        }
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::domain(format!("f must lie in [0, 1], got {f}")));
        }
        for e in [eps1, eps2] {
            if e.is_nan() || e < 0.0 {
                return Err(Error::domain(format!("privacy levels must be >= 0, got {e}")));
            }
        }
        Ok(if eps1 <= eps2 {
            TwoGroupProfile { eps1, eps2, n, f }
        } else {
            TwoGroupProfile {
                eps1: eps2,
                eps2: eps1,
                n,
                f: 1.0 - f,
            }
        })
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// Real-valued size of the first group, `n f`.
    pub fn mass1(&self) -> f64 {
        self.n_f64() * self.f
    }

    /// Real-valued size of the second group, `n (1 - f)`.
    pub fn mass2(&self) -> f64 {
        self.n_f64() * (1.0 - self.f)
    }

    pub fn saturation(&self) -> Saturation {
        if self.eps1 == 0.0 || self.f == 0.0 {
            return Saturation {
                ratio: f64::INFINITY,
                threshold: f64::INFINITY,
                degenerate_group: true,
            };
        }
        let ratio = 1.0 + 8.0 / (self.eps1 * self.eps1 * self.mass1());
        Saturation {
            ratio,
            threshold: ratio * self.eps1,
            degenerate_group: false,
        }
    }

    /// `R = 1 + 8 / (eps1^2 n f)`.
    pub fn saturation_ratio(&self) -> f64 {
        self.saturation().ratio
    }

    /// `R * eps1`, the level beyond which raising `eps2` no longer helps.
    pub fn saturation_eps2(&self) -> f64 {
        self.saturation().threshold
    }

    /// `r = eps2 / eps1`.
    pub fn privacy_ratio(&self) -> f64 {
        if self.eps1 == self.eps2 {
            1.0
        } else {
            self.eps2 / self.eps1
        }
    }

    /// Regime B exactly when `eps2 >= R eps1` with a finite threshold; ties
    /// go to B.
    pub fn regime(&self) -> Regime {
        let threshold = self.saturation_eps2();
        if threshold.is_finite() && self.eps2 >= threshold {
            Regime::B
        } else {
            Regime::A
        }
    }

    /// True when `eps2` equals the saturation threshold, where both regimes apply.
    pub fn on_boundary(&self) -> bool {
        self.eps2 == self.saturation_eps2()
    }

    /// `f eps1 + (1 - f) eps2`, with empty groups contributing nothing.
    pub fn eps_bar(&self) -> f64 {
        group_average(self.f, self.eps1, self.eps2)
    }

    /// `f eps1^2 + (1 - f) eps2^2`.
    pub fn eps_sq_bar(&self) -> f64 {
        group_average(self.f, self.eps1 * self.eps1, self.eps2 * self.eps2)
    }

    /// Integer group sizes `(round(n f), n - round(n f))` used when the
    /// profile is materialized as a dataset.
    pub fn group_sizes(&self) -> (usize, usize) {
        let n1 = (self.mass1().round() as u64).min(self.n);
        (n1 as usize, (self.n - n1) as usize)
    }

    /// The fraction actually realized by [`group_sizes`](Self::group_sizes).
    pub fn realized_f(&self) -> f64 {
        self.group_sizes().0 as f64 / self.n_f64()
    }

    /// Same profile with `f` replaced by the realized integer fraction.
    pub fn realized(&self) -> Self {
        TwoGroupProfile {
            f: self.realized_f(),
            ..*self
        }
    }

    pub fn with_eps2(&self, eps2: f64) -> Result<Self> {
        Self::new(self.eps1, eps2, self.n, self.f)
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.eps1, self.eps2, n, self.f)
    }

    /// Per-user privacy vector: the first group, then the second.
    pub fn to_privacy_vector(&self) -> PrivacyVector {
        let (n1, n2) = self.group_sizes();
        PrivacyVector::two_groups(self.eps1, n1, self.eps2, n2)
            .expect("validated profile yields a valid privacy vector")
    }
}

fn group_average(f: f64, a: f64, b: f64) -> f64 {
    let first = if f == 0.0 { 0.0 } else { f * a };
    let second = if f == 1.0 { 0.0 } else { (1.0 - f) * b };
    first + second
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_examples() {
        let p = TwoGroupProfile::new(0.1, 1.0, 1000, 0.7).unwrap();
        assert!((p.saturation_ratio() - (1.0 + 8.0 / 7.0)).abs() < 1e-12);
        assert!((p.saturation_eps2() - 0.2142857).abs() < 1e-7);

        let p = TwoGroupProfile::new(1e-2, 1.0, 80_000, 0.5).unwrap();
        assert!((p.saturation_ratio() - 3.0).abs() < 1e-12);

        let p = TwoGroupProfile::new(0.1, 1.0, 1_000_000_000_000, 0.5).unwrap();
        assert!((p.saturation_ratio() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_group_has_infinite_ratio() {
        let s = TwoGroupProfile::new(0.0, 1.0, 10, 0.5).unwrap().saturation();
        assert!(s.degenerate_group && s.ratio.is_infinite());
        let s = TwoGroupProfile::new(0.1, 1.0, 10, 0.0).unwrap().saturation();
        assert!(s.degenerate_group);
        assert_eq!(
            TwoGroupProfile::new(0.0, f64::INFINITY, 10, 0.5).unwrap().regime(),
            Regime::A
        );
    }

    #[test]
    fn normalization_swaps_groups() {
        let p = TwoGroupProfile::new(1.0, 0.1, 100, 0.3).unwrap();
        assert_eq!(p.eps1, 0.1);
        assert_eq!(p.eps2, 1.0);
        assert!((p.f - 0.7).abs() < 1e-15);
    }

    #[test]
    fn derived_quantities() {
        let p = TwoGroupProfile::new(0.1, 0.15, 1000, 0.5).unwrap();
        assert!((p.saturation_ratio() - 2.6).abs() < 1e-12);
        assert!((p.privacy_ratio() - 1.5).abs() < 1e-12);
        assert!((p.eps_bar() - 0.125).abs() < 1e-15);
        assert!((p.eps_sq_bar() - 0.01625).abs() < 1e-15);
        assert_eq!(p.regime(), Regime::A);

        let p = TwoGroupProfile::new(0.1, f64::INFINITY, 1000, 1.0).unwrap();
        assert_eq!(p.eps_bar(), 0.1);
    }

    #[test]
    fn regime_boundary_is_b() {
        let p = TwoGroupProfile::new(0.1, 1.0, 1000, 0.7).unwrap();
        let q = p.with_eps2(p.saturation_eps2()).unwrap();
        assert!(q.on_boundary());
        assert_eq!(q.regime(), Regime::B);
    }

    #[test]
    fn invalid_profiles() {
        assert!(TwoGroupProfile::new(0.1, 0.2, 0, 0.5).is_err());
        assert!(TwoGroupProfile::new(0.1, 0.2, 10, 1.5).is_err());
        assert!(TwoGroupProfile::new(-0.1, 0.2, 10, 0.5).is_err());
    }

    #[test]
    fn group_sizes_round() {
        let p = TwoGroupProfile::new(0.1, 0.2, 10, 0.33).unwrap();
        assert_eq!(p.group_sizes(), (3, 7));
        assert!((p.realized_f() - 0.3).abs() < 1e-15);
        assert_eq!(p.to_privacy_vector().len(), 10);
    }
}
