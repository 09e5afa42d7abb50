//! Upper and lower bounds on the two-group minimax risk.
//!
//! The upper bound is the worst-case MSE of the optimal affine estimator.
//! The lower bound comes from a two-point (Le Cam) argument with the pair
//! of `±0.5` distributions whose means are `±δ/2`; differential privacy
//! limits how far apart their output laws can drift, user by user, through
//! `|P(M(x) ∈ S) - P(M(x') ∈ S)| <= 1 - e^{-ε_i}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::privacy::PrivacyVector;
use crate::profile::{Regime, TwoGroupProfile};
use crate::solver::{golden_section_minimize, TRIVIAL_RISK};

/// Constant in front of the lower bound when `eps2 >= R eps1`.
pub const LOWER_CONSTANT_SATURATED: f64 = 1.0 / 1048.0;
/// Constant in front of the lower bound when `eps2 <= R eps1`.
pub const LOWER_CONSTANT_PROPORTIONAL: f64 = 1.0 / 1560.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerTerms {
    /// `1/(6n)`.
    pub l1: f64,
    /// `R / (4n [f + (1-f) R])`.
    pub l2: f64,
    /// `f (R-1) / (4n [f + r (1-f)]²)`.
    pub l3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub upper: f64,
    pub lower: f64,
    pub regime: Regime,
    pub saturation_eps2: f64,
    pub lower_terms: LowerTerms,
}

/// Le Cam pair: `P±` put mass `(1 ± δ)/2` on `0.5`, the rest on `-0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeCamInstance {
    pub delta: f64,
    pub means: (f64, f64),
    pub tv_p: f64,
    /// `3 δ²`, valid for `δ <= 0.5`.
    pub kl_p_bound: f64,
    pub gamma: f64,
}

impl LeCamInstance {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&delta) {
            return Err(Error::domain(format!("delta must lie in [0, 0.5], got {delta}")));
        }
        Ok(LeCamInstance {
            delta,
            means: (delta / 2.0, -delta / 2.0),
            tv_p: delta,
            kl_p_bound: 3.0 * delta * delta,
            gamma: delta / 2.0,
        })
    }

    /// Exact `KL(P+ || P-) = δ ln((1+δ)/(1-δ))`.
    pub fn kl_exact(&self) -> f64 {
        let d = self.delta;
        d * ((1.0 + d) / (1.0 - d)).ln()
    }
}

/// Regime-A risk in its averaged form,
/// `mean(ε²) / (4 n mean(ε)²) + 2 / (n mean(ε))²`.
pub fn proportional_risk(p: &TwoGroupProfile) -> f64 {
    let n = p.n_f64();
    if p.eps1.is_infinite() {
        return 1.0 / (4.0 * n);
    }
    if p.eps2.is_infinite() {
        // Only the public group is used.
        return if p.f == 1.0 {
            f64::INFINITY
        } else {
            1.0 / (4.0 * p.mass2())
        };
    }
    let eps_bar = p.eps_bar();
    if eps_bar == 0.0 {
        return f64::INFINITY;
    }
    p.eps_sq_bar() / (4.0 * n * eps_bar * eps_bar) + 2.0 / (n * eps_bar).powi(2)
}

/// Regime-A risk in ratio form, `U(r) = (f R + (1-f) r²) / (4n [f + (1-f) r]²)`.
/// Requires a finite `R`.
pub fn proportional_risk_ratio_form(p: &TwoGroupProfile) -> f64 {
    let (f, r, big_r) = (p.f, p.privacy_ratio(), p.saturation_ratio());
    let d = f + (1.0 - f) * r;
    (f * big_r + (1.0 - f) * r * r) / (4.0 * p.n_f64() * d * d)
}

/// Regime-B risk `(n f ε1² + 8) / (4n [n f ε1² + 8 (1-f)])`; independent of `eps2`.
pub fn saturated_risk(p: &TwoGroupProfile) -> f64 {
    let n = p.n_f64();
    if p.eps1.is_infinite() {
        return 1.0 / (4.0 * n);
    }
    let a = p.mass1() * p.eps1 * p.eps1;
    (a + 8.0) / (4.0 * n * (a + 8.0 * (1.0 - p.f)))
}

/// Regime-B risk in ratio form, `R / (4n [f + (1-f) R])`.
pub fn saturated_risk_ratio_form(p: &TwoGroupProfile) -> f64 {
    let big_r = p.saturation_ratio();
    big_r / (4.0 * p.n_f64() * (p.f + (1.0 - p.f) * big_r))
}

/// Worst-case MSE achieved by the optimal affine estimator, capped at 1/4.
pub fn upper_bound(p: &TwoGroupProfile) -> f64 {
    let risk = match p.regime() {
        Regime::A => proportional_risk(p),
        Regime::B => saturated_risk(p),
    };
    risk.min(TRIVIAL_RISK)
}

pub fn lower_bound_terms(p: &TwoGroupProfile) -> LowerTerms {
    let n = p.n_f64();
    let l1 = 1.0 / (6.0 * n);
    let l2 = saturated_risk(p);
    // f (R-1) = 8 / (n ε1²), so L3 = 2 / (n ε̄)²; this form survives ε1 = 0.
    let eps_bar = p.eps_bar();
    let l3 = if p.f == 0.0 || p.eps2.is_infinite() {
        0.0
    } else if eps_bar == 0.0 {
        f64::INFINITY
    } else {
        2.0 / (n * eps_bar).powi(2)
    };
    LowerTerms { l1, l2, l3 }
}

/// Closed-form lower bound with explicit constants: `L2/1048` in regime B
/// and `U(r)/1560` in regime A, each capped at 1/4 before scaling. On the
/// boundary `r = R` the larger of the two is returned.
pub fn lower_bound(p: &TwoGroupProfile) -> f64 {
    let saturated = LOWER_CONSTANT_SATURATED * saturated_risk(p).min(TRIVIAL_RISK);
    let proportional = LOWER_CONSTANT_PROPORTIONAL * proportional_risk(p).min(TRIVIAL_RISK);
    if p.on_boundary() {
        return saturated.max(proportional);
    }
    match p.regime() {
        Regime::A => proportional,
        Regime::B => saturated,
    }
}

pub fn bound_report(p: &TwoGroupProfile) -> BoundReport {
    BoundReport {
        upper: upper_bound(p),
        lower: lower_bound(p),
        regime: p.regime(),
        saturation_eps2: p.saturation_eps2(),
        lower_terms: lower_bound_terms(p),
    }
}

/// `1 - e^{-ε}`, equal to 1 for a public user.
fn drift(eps: f64) -> f64 {
    -(-eps).exp_m1()
}

/// Bound on `‖Q1 - Q2‖_TV` for the output laws of any `ε`-DP mechanism fed
/// `P1^n` versus `P2^n`:
/// `2 ‖P1-P2‖_TV Σ_{i<=k} (1 - e^{-ε_(i)}) + sqrt((n-k)/2 · KL)`,
/// with the levels taken in ascending order.
pub fn tv_upper_bound(eps: &PrivacyVector, k: usize, tv_p: f64, kl_p: f64) -> Result<f64> {
    let n = eps.len();
    if k > n {
        return Err(Error::usage(format!("k = {k} exceeds n = {n}")));
    }
    let mut sorted = eps.levels().to_vec();
    sorted.sort_by(f64::total_cmp);
    let dp_part: f64 = sorted[..k].iter().map(|e| drift(*e)).sum();
    Ok(2.0 * tv_p * dp_part + ((n - k) as f64 / 2.0 * kl_p).sqrt())
}

/// Le Cam's two-point bound `γ²/2 (1 - TV)`, floored at 0.
pub fn lecam_value(gamma: f64, tv_q_bound: f64) -> f64 {
    let tv = tv_q_bound.clamp(0.0, 1.0);
    (gamma * gamma / 2.0 * (1.0 - tv)).max(0.0)
}

/// Two-group TV bound for the Le Cam pair at `delta`, with the `k` most
/// private users handled by the DP drift and the rest by Pinsker. `k` is
/// one of `0`, `n f`, `n` (real-valued masses).
fn two_group_tv(p: &TwoGroupProfile, split: Split, delta: f64) -> f64 {
    let kl = LeCamInstance::new(delta).expect("delta in range").kl_exact();
    let (m1, m2) = (p.mass1(), p.mass2());
    let g1 = if m1 > 0.0 { m1 * drift(p.eps1) } else { 0.0 };
    let g2 = if m2 > 0.0 { m2 * drift(p.eps2) } else { 0.0 };
    match split {
        Split::None => (p.n_f64() / 2.0 * kl).sqrt(),
        Split::FirstGroup => 2.0 * delta * g1 + (m2 / 2.0 * kl).sqrt(),
        Split::All => 2.0 * delta * (g1 + g2),
    }
}

#[derive(Debug, Clone, Copy)]
enum Split {
    None,
    FirstGroup,
    All,
}

/// Lower bound obtained by running the two-point argument directly:
/// maximize `δ²/8 (1 - TV(δ))` over `δ ∈ (0, 0.5]` for each split
/// `k ∈ {0, n f, n}`, using the exact Bernoulli KL and the exact
/// `1 - e^{-ε}` drift.
pub fn lower_bound_from_first_principles(p: &TwoGroupProfile) -> f64 {
    [Split::None, Split::FirstGroup, Split::All]
        .into_iter()
        .map(|split| {
            let value = |delta: f64| {
                let gamma = LeCamInstance::new(delta).expect("delta in range").gamma;
                lecam_value(gamma, two_group_tv(p, split, delta))
            };
            best_delta_value(value)
        })
        .fold(0.0, f64::max)
}

/// Same argument for an explicit privacy vector, over every split `k`.
pub fn lower_bound_from_first_principles_vector(eps: &PrivacyVector) -> f64 {
    (0..=eps.len())
        .map(|k| {
            best_delta_value(|delta| {
                let inst = LeCamInstance::new(delta).expect("delta in range");
                let tv = tv_upper_bound(eps, k, inst.tv_p, inst.kl_exact()).expect("k in range");
                lecam_value(inst.gamma, tv)
            })
        })
        .fold(0.0, f64::max)
}

/// Maximizes a Le Cam value over `δ ∈ (0, 0.5]`: a log-spaced scan to
/// bracket the peak, then golden-section refinement.
fn best_delta_value(value: impl Fn(f64) -> f64) -> f64 {
    const SCAN: usize = 200;
    let grid: Vec<f64> = (0..=SCAN)
        .map(|i| 0.5 * 10f64.powf(-9.0 * (1.0 - i as f64 / SCAN as f64)))
        .collect();
    let (best_i, best) =
        grid.iter().map(|d| value(*d)).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(SCAN)];
    let refined = golden_section_minimize(|d| -value(d), lo, hi, 1e-12);
    best.max(value(refined))
}
