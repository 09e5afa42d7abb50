//! Bounded data, Laplace noise and the affine release mechanism.
//!
//! Every datum lives in `[-0.5, 0.5]`. An affine release `<w, x> + Lap(eta)`
//! changes by at most `w_i` when user `i` swaps their datum, so its output
//! density ratio between neighbouring datasets is at most `exp(w_i / eta)`.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the data domain.
pub const DOMAIN_MIN: f64 = -0.5;
/// Upper end of the data domain.
pub const DOMAIN_MAX: f64 = 0.5;

/// Relative slack used when comparing an effective privacy level with the
/// declared one.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-12;

/// Per-user privacy levels. `+inf` marks a public user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PrivacyVector(Vec<f64>);

impl PrivacyVector {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::domain("privacy vector must be nonempty"));
        }
        if let Some(bad) = levels.iter().find(|e| e.is_nan() || **e < 0.0) {
            return Err(Error::domain(format!("privacy levels must be >= 0, got {bad}")));
        }
        Ok(PrivacyVector(levels))
    }

    /// `n` users at the same level.
    pub fn homogeneous(eps: f64, n: usize) -> Result<Self> {
        Self::new(vec![eps; n])
    }

    /// `n1` users at `eps1` followed by `n2` users at `eps2`.
    pub fn two_groups(eps1: f64, n1: usize, eps2: f64, n2: usize) -> Result<Self> {
        let mut levels = vec![eps1; n1];
        levels.extend(std::iter::repeat_n(eps2, n2));
        Self::new(levels)
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// `‖ε‖₁`; infinite as soon as one user is public.
    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn has_public(&self) -> bool {
        self.0.iter().any(|e| e.is_infinite())
    }
}

impl TryFrom<Vec<f64>> for PrivacyVector {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<PrivacyVector> for Vec<f64> {
    fn from(v: PrivacyVector) -> Self {
        v.0
    }
}

/// A dataset whose values all lie in `[-0.5, 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDataset(Vec<f64>);

impl BoundedDataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|x| !(DOMAIN_MIN..=DOMAIN_MAX).contains(*x)) {
            return Err(Error::domain(format!(
                "datum {bad} outside [{DOMAIN_MIN}, {DOMAIN_MAX}]"
            )));
        }
        Ok(BoundedDataset(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Effective privacy level of an affine mechanism, per user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpCertificate {
    pub effective_levels: Vec<f64>,
    pub satisfied: Vec<bool>,
}

impl DpCertificate {
    /// Certificate of a mechanism whose output ignores the data.
    pub fn constant(n: usize) -> Self {
        DpCertificate {
            effective_levels: vec![0.0; n],
            satisfied: vec![true; n],
        }
    }

    /// Checks already computed effective levels against the declared ones.
    pub fn compare(effective_levels: Vec<f64>, declared: &PrivacyVector) -> Self {
        let satisfied = effective_levels
            .iter()
            .zip(declared.levels())
            .map(|(e, d)| *e <= d + CERTIFICATE_TOLERANCE * d)
            .collect();
        DpCertificate {
            effective_levels,
            satisfied,
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|s| *s)
    }

    /// Largest ratio effective/declared over users with a finite declared level.
    pub fn worst_ratio(&self, declared: &PrivacyVector) -> f64 {
        self.effective_levels
            .iter()
            .zip(declared.levels())
            .filter(|(_, d)| d.is_finite())
            .map(|(e, d)| {
                if *d == 0.0 {
                    if *e == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    e / d
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Quantile function of the zero-mean Laplace law with the given scale.
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    // ln(1 - 2|u - 1/2|) via ln_1p keeps precision near the median.
    -scale * centered.signum() * (-2.0 * centered.abs()).ln_1p()
}

/// One draw from the zero-mean Laplace law with density `exp(-|x|/scale) / (2 scale)`.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!(
            "laplace scale must be positive and finite, got {scale}"
        )));
    }
    let u: f64 = rng.sample(Open01);
    Ok(laplace_inverse_cdf(u, scale))
}

fn check_weights(x: &BoundedDataset, w: &[f64]) -> Result<()> {
    if w.len() != x.len() {
        return Err(Error::usage(format!(
            "weight length {} does not match dataset length {}",
            w.len(),
            x.len()
        )));
    }
    if let Some(bad) = w.iter().find(|wi| !wi.is_finite() || **wi < 0.0) {
        return Err(Error::usage(format!("weights must be finite and >= 0, got {bad}")));
    }
    Ok(())
}

/// `<w, x> + noise` for an already drawn noise value.
pub fn affine_output(x: &BoundedDataset, w: &[f64], noise: f64) -> Result<f64> {
    check_weights(x, w)?;
    Ok(dot(w, x.values()) + noise)
}

/// `<w, x> + Lap(eta)`, unclipped.
pub fn affine_release<R: Rng + ?Sized>(x: &BoundedDataset, w: &[f64], eta: f64, rng: &mut R) -> Result<f64> {
    check_weights(x, w)?;
    let noise = sample_laplace(eta, rng)?;
    Ok(dot(w, x.values()) + noise)
}

/// Post-processing clamp onto the data domain.
pub fn clamp_to_domain(y: f64) -> f64 {
    y.clamp(DOMAIN_MIN, DOMAIN_MAX)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Effective per-user levels `w_i / eta` of an affine release and whether
/// each stays within the declared level.
///
/// `eta = 0` is accepted: users with zero weight get level 0, everyone else
/// gets `+inf` (only public users can carry weight without noise).
pub fn dp_certificate(w: &[f64], eta: f64, declared: &PrivacyVector) -> Result<DpCertificate> {
    if w.len() != declared.len() {
        return Err(Error::usage(format!(
            "weight length {} does not match privacy vector length {}",
            w.len(),
            declared.len()
        )));
    }
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::domain(format!("noise scale must be >= 0, got {eta}")));
    }
    let effective_levels: Vec<f64> = w
        .iter()
        .map(|wi| if *wi == 0.0 { 0.0 } else { wi.abs() / eta })
        .collect();
    Ok(DpCertificate::compare(effective_levels, declared))
}
