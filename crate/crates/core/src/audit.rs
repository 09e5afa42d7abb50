//! Empirical privacy audit.
//!
//! Runs a mechanism many times on two neighbouring datasets (user `i` at
//! `+0.5` versus `-0.5`), histograms both output samples on a common grid
//! and checks every bin, in both directions, against
//! `P(M(x) ∈ B) <= e^ε P(M(x') ∈ B)`. A bin only counts as a violation when
//! the excess is beyond `sigmas` binomial standard deviations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::Mechanism;
use crate::privacy::{BoundedDataset, DOMAIN_MAX, DOMAIN_MIN};

/// Histograms never get more bins than this; the last bin absorbs the rest.
const MAX_BINS: usize = 200_000;

/// Minimum count on both sides for a bin to enter `max_log_ratio`.
const RATIO_MIN_COUNT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditConfig {
    /// Releases drawn on each of the two datasets.
    pub draws: u64,
    pub bin_width: f64,
    /// Width of the binomial tolerance band, in standard deviations.
    pub sigmas: f64,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            draws: 1_000_000,
            bin_width: 0.05,
            sigmas: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub user: usize,
    /// Level the outputs were tested against.
    pub level: f64,
    pub draws: u64,
    pub bins: usize,
    /// Bins where the ratio bound failed beyond the tolerance band.
    pub violations: usize,
    /// Largest `(p̂ - e^ε q̂) / σ` over bins and directions; `-inf` when no
    /// bin exceeds the bound at all.
    pub worst_excess_sigmas: f64,
    /// Largest `|ln(p̂/q̂)|` over bins where both sides saw at least 1000 draws.
    pub max_log_ratio: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// The two neighbours of `x` that differ at `user`: `+0.5` and `-0.5` there.
pub fn neighbours(x: &BoundedDataset, user: usize) -> Result<(BoundedDataset, BoundedDataset)> {
    if user >= x.len() {
        return Err(Error::usage(format!("user {user} out of range for {} users", x.len())));
    }
    let mut hi = x.values().to_vec();
    let mut lo = hi.clone();
    hi[user] = DOMAIN_MAX;
    lo[user] = DOMAIN_MIN;
    Ok((BoundedDataset::new(hi)?, BoundedDataset::new(lo)?))
}

fn histogram(samples: &[f64], origin: f64, width: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for s in samples {
        let k = ((s - origin) / width).floor().max(0.0) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    counts
}

/// Histogram ratio test of two output samples against level `level`.
pub fn ratio_test(sample_a: &[f64], sample_b: &[f64], user: usize, level: f64, cfg: &AuditConfig) -> AuditReport {
    let lo = sample_a.iter().chain(sample_b).copied().fold(f64::INFINITY, f64::min);
    let hi = sample_a
        .iter()
        .chain(sample_b)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let bins = if lo.is_finite() && hi.is_finite() {
        (((hi - lo) / cfg.bin_width).floor() as usize + 1).min(MAX_BINS)
    } else {
        1
    };
    let origin = if lo.is_finite() { lo } else { 0.0 };
    let ca = histogram(sample_a, origin, cfg.bin_width, bins);
    let cb = histogram(sample_b, origin, cfg.bin_width, bins);
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);

    let mut report = AuditReport {
        user,
        level,
        draws: sample_a.len() as u64,
        bins,
        violations: 0,
        worst_excess_sigmas: f64::NEG_INFINITY,
        max_log_ratio: 0.0,
    };
    for (&a, &b) in ca.iter().zip(&cb) {
        if a >= RATIO_MIN_COUNT && b >= RATIO_MIN_COUNT {
            let r = ((a as f64 / na) / (b as f64 / nb)).ln().abs();
            report.max_log_ratio = report.max_log_ratio.max(r);
        }
    }
    let bound = level.exp();
    if !bound.is_finite() {
        return report;
    }
    let mut check = |p: f64, q: f64, np: f64, nq: f64| {
        let excess = p - bound * q;
        if excess <= 0.0 {
            return;
        }
        // Standard error at the boundary p = e^ε q, fitted to both counts.
        // The plug-in error collapses when the q side saw no draws at all.
        let q0 = (p * np + q * nq) / (bound * np + nq);
        let p0 = (bound * q0).min(1.0);
        let sigma = (p0 * (1.0 - p0) / np + bound * bound * q0 * (1.0 - q0) / nq).sqrt();
        let z = excess / sigma;
        report.worst_excess_sigmas = report.worst_excess_sigmas.max(z);
        if z > cfg.sigmas {
            report.violations += 1;
        }
    };
    for (&a, &b) in ca.iter().zip(&cb) {
        let (p, q) = (a as f64 / na, b as f64 / nb);
        check(p, q, na, nb);
        check(q, p, nb, na);
    }
    report
}

/// Audits an arbitrary release function on the neighbouring datasets
/// `a` and `b` against `level`.
pub fn audit_release<F>(
    mut release: F,
    a: &BoundedDataset,
    b: &BoundedDataset,
    user: usize,
    level: f64,
    cfg: &AuditConfig,
) -> Result<AuditReport>
where
    F: FnMut(&BoundedDataset, &mut ChaCha8Rng) -> Result<f64>,
{
    let mut rng_a = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rng_b = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_a.set_stream(0);
    rng_b.set_stream(1);
    let sample_a = (0..cfg.draws)
        .map(|_| release(a, &mut rng_a))
        .collect::<Result<Vec<f64>>>()?;
    let sample_b = (0..cfg.draws)
        .map(|_| release(b, &mut rng_b))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratio_test(&sample_a, &sample_b, user, level, cfg))
}

/// Audits `mechanism` for `user` around the dataset `base`, against the
/// effective level from the mechanism's own certificate.
pub fn audit_mechanism(
    mechanism: &Mechanism,
    base: &BoundedDataset,
    user: usize,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let (a, b) = neighbours(base, user)?;
    let level = mechanism.certificate().effective_levels[user];
    audit_release(|x, rng| mechanism.estimate(x, rng), &a, &b, user, level, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{MechanismKind, MechanismSpec};
    use crate::privacy::{affine_release, PrivacyVector};

    fn cfg(draws: u64) -> AuditConfig {
        AuditConfig {
            draws,
            seed: 17,
            ..AuditConfig::default()
        }
    }

    #[test]
    fn neighbours_differ_in_one_place() {
        let x = BoundedDataset::new(vec![0.1, 0.2, 0.3]).unwrap();
        let (a, b) = neighbours(&x, 1).unwrap();
        assert_eq!(a.values(), &[0.1, 0.5, 0.3]);
        assert_eq!(b.values(), &[0.1, -0.5, 0.3]);
        assert!(neighbours(&x, 3).is_err());
    }

    #[test]
    fn histogram_edges_absorb_outliers() {
        let counts = histogram(&[-1.0, 0.0, 0.04, 0.05, 9.0], 0.0, 0.05, 2);
        assert_eq!(counts, vec![3, 2]);
    }

    #[test]
    fn laplace_release_passes_at_its_level() {
        let x = BoundedDataset::new(vec![0.0; 4]).unwrap();
        let (a, b) = neighbours(&x, 0).unwrap();
        let w = [0.25; 4];
        let eta = 0.5;
        let r = audit_release(|d, rng| affine_release(d, &w, eta, rng), &a, &b, 0, 0.5, &cfg(200_000)).unwrap();
        assert!(r.passed(), "{r:?}");
        // A 0.05 bin of a Laplace(0.5) shifted by 0.25 shows nearly the full ratio.
        assert!(r.max_log_ratio > 0.4 && r.max_log_ratio < 0.6, "{r:?}");
    }

    #[test]
    fn understated_noise_is_caught() {
        let x = BoundedDataset::new(vec![0.0; 4]).unwrap();
        let (a, b) = neighbours(&x, 0).unwrap();
        let w = [0.25; 4];
        // Claims level 0.5 but uses a third of the required noise.
        let r = audit_release(
            |d, rng| affine_release(d, &w, 0.5 / 3.0, rng),
            &a,
            &b,
            0,
            0.5,
            &cfg(200_000),
        )
        .unwrap();
        assert!(!r.passed());
        assert!(r.worst_excess_sigmas > 10.0);
    }

    #[test]
    fn every_mechanism_passes_its_certificate() {
        let eps = PrivacyVector::new(vec![0.3, 0.6, 1.2, 2.0]).unwrap();
        let base = BoundedDataset::new(vec![0.1, -0.2, 0.4, 0.0]).unwrap();
        for kind in MechanismKind::ALL {
            let m = Mechanism::prepare(&MechanismSpec::vector(kind, eps.clone())).unwrap();
            for user in [0, 3] {
                let r = audit_mechanism(&m, &base, user, &cfg(100_000)).unwrap();
                assert!(r.passed(), "{kind} user {user}: {r:?}");
            }
        }
    }

    #[test]
    fn empty_bins_on_one_side_are_not_flagged() {
        // 25 draws against none is well within reach of a 5-level bound.
        let mut a = vec![0.0; 1000];
        a[..25].fill(10.0);
        let r = ratio_test(&a, &[0.0; 1000], 0, 5.0, &cfg(1000));
        assert!(r.passed(), "{r:?}");
        assert!(r.worst_excess_sigmas < 1.0);
        // At level 0 the same imbalance is a clear violation.
        let r = ratio_test(&a, &[0.0; 1000], 0, 0.0, &cfg(1000));
        assert!(!r.passed());
    }

    #[test]
    fn public_users_are_not_tested() {
        let r = ratio_test(&[0.0, 1.0], &[5.0, 6.0], 0, f64::INFINITY, &cfg(2));
        assert!(r.passed());
    }
}
