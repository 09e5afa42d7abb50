//! ADPM and the baseline mechanisms behind one interface.
//!
//! A [`MechanismSpec`] names the mechanism and the privacy levels; [`Mechanism::prepare`]
//! does all the data-independent work (weights, sampling probabilities,
//! noise scales) once, after which [`Mechanism::estimate`] is cheap and can be
//! called from many threads. Every mechanism also reports its exact MSE
//! under an i.i.d. distribution with known mean and variance, and a per-user
//! privacy certificate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{
    clamp_to_domain, dot, dp_certificate, sample_laplace, BoundedDataset, DpCertificate, PrivacyVector,
};
use crate::profile::TwoGroupProfile;
use crate::solver::{solve_general, solve_two_group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    /// Optimal affine weights plus Laplace noise.
    Adpm,
    /// Everyone gets the strictest level; sample mean plus Laplace noise.
    Uni,
    /// Subsample user `i` with probability `(e^{ε_i} - 1)/(e^t - 1)`,
    /// `t = max ε`, then run the homogeneous `t`-DP estimator.
    Sm,
    /// Affine weights proportional to `ε`, noise `1/‖ε‖₁`.
    PropDpm,
    /// Per-group private means combined with inverse worst-case-variance weights.
    Ldpe,
    /// Scale `x_i` by `ε_i / max ε`, then the homogeneous estimator; biased.
    Stretch,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 6] = [
        MechanismKind::Adpm,
        MechanismKind::PropDpm,
        MechanismKind::Ldpe,
        MechanismKind::Sm,
        MechanismKind::Uni,
        MechanismKind::Stretch,
    ];

    /// Display name used in tables.
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Adpm => "ADPM",
            MechanismKind::Uni => "UNI",
            MechanismKind::Sm => "SM",
            MechanismKind::PropDpm => "PropDPM",
            MechanismKind::Ldpe => "LDPE",
            MechanismKind::Stretch => "STRETCH",
        }
    }

    /// Lowercase identifier used on the command line.
    pub fn id(self) -> &'static str {
        match self {
            MechanismKind::Adpm => "adpm",
            MechanismKind::Uni => "uni",
            MechanismKind::Sm => "sm",
            MechanismKind::PropDpm => "propdpm",
            MechanismKind::Ldpe => "ldpe",
            MechanismKind::Stretch => "stretch",
        }
    }

    /// Small stable index, used to derive per-mechanism random streams.
    pub fn index(self) -> u64 {
        match self {
            MechanismKind::Adpm => 0,
            MechanismKind::Uni => 1,
            MechanismKind::Sm => 2,
            MechanismKind::PropDpm => 3,
            MechanismKind::Ldpe => 4,
            MechanismKind::Stretch => 5,
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.id() == lower)
            .ok_or_else(|| Error::usage(format!("unknown mechanism {s:?}")))
    }
}

/// Privacy levels as either a full vector or a two-group profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyInput {
    Vector(PrivacyVector),
    TwoGroup(TwoGroupProfile),
}

impl PrivacyInput {
    pub fn to_vector(&self) -> PrivacyVector {
        match self {
            PrivacyInput::Vector(v) => v.clone(),
            PrivacyInput::TwoGroup(p) => p.to_privacy_vector(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub privacy: PrivacyInput,
    /// Clamp the released value to `[-0.5, 0.5]`.
    #[serde(default)]
    pub clamp: bool,
}

impl MechanismSpec {
    pub fn vector(kind: MechanismKind, eps: PrivacyVector) -> Self {
        MechanismSpec {
            kind,
            privacy: PrivacyInput::Vector(eps),
            clamp: false,
        }
    }

    pub fn two_group(kind: MechanismKind, profile: TwoGroupProfile) -> Self {
        MechanismSpec {
            kind,
            privacy: PrivacyInput::TwoGroup(profile),
            clamp: false,
        }
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }
}

/// MSE of a mechanism split into its sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticMse {
    /// Contribution of the data's sampling variance.
    pub variance_term: f64,
    /// Contribution of the privacy noise.
    pub noise_term: f64,
    pub bias_sq_term: f64,
    pub total: f64,
    /// False when the output is clamped: the figure is then an upper bound.
    pub exact: bool,
}

impl AnalyticMse {
    fn new(variance_term: f64, noise_term: f64, bias_sq_term: f64) -> Self {
        AnalyticMse {
            variance_term,
            noise_term,
            bias_sq_term,
            total: variance_term + noise_term + bias_sq_term,
            exact: true,
        }
    }

    /// Marker for a mechanism that cannot run.
    pub fn infeasible() -> Self {
        AnalyticMse {
            variance_term: 0.0,
            noise_term: f64::INFINITY,
            bias_sq_term: 0.0,
            total: f64::INFINITY,
            exact: true,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        self.total.is_infinite()
    }
}

#[derive(Debug, Clone)]
struct LocalGroup {
    members: Vec<usize>,
    eps: f64,
    /// Laplace scale on the group mean, `1/(ε n_g)`; 0 for a public group.
    scale: f64,
    /// Coefficient in the final combination; 0 for a group at level 0.
    coef: f64,
}

#[derive(Debug, Clone)]
enum Plan {
    Affine {
        weights: Vec<f64>,
        eta: f64,
        degenerate: bool,
    },
    Sampling {
        probs: Vec<f64>,
        t: f64,
    },
    Local {
        groups: Vec<LocalGroup>,
    },
}

/// A mechanism with all data-independent quantities precomputed.
#[derive(Debug, Clone)]
pub struct Mechanism {
    kind: MechanismKind,
    declared: PrivacyVector,
    clamp: bool,
    plan: Plan,
}

fn noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if scale == 0.0 {
        Ok(0.0)
    } else {
        sample_laplace(scale, rng)
    }
}

/// `(e^a - 1)/(e^b - 1)` for `0 <= a <= b`, without overflow for large `b`.
fn expm1_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    (a - b).exp() * (-a).exp_m1() / (-b).exp_m1()
}

fn adpm_plan(privacy: &PrivacyInput) -> Plan {
    let solution = match privacy {
        PrivacyInput::TwoGroup(p) => solve_two_group(&p.realized()).expand(p),
        PrivacyInput::Vector(eps) => solve_general(eps),
    };
    Plan::Affine {
        weights: solution.weights,
        eta: solution.eta,
        degenerate: solution.degenerate,
    }
}

fn uni_plan(eps: &PrivacyVector) -> Result<Plan> {
    let strictest = eps.min();
    if strictest == 0.0 {
        return Err(Error::infeasible("UNI", "the strictest privacy level is 0"));
    }
    let n = eps.len() as f64;
    Ok(Plan::Affine {
        weights: vec![1.0 / n; eps.len()],
        eta: 1.0 / (n * strictest),
        degenerate: false,
    })
}

fn propdpm_plan(eps: &PrivacyVector) -> Result<Plan> {
    if eps.has_public() {
        return Err(Error::infeasible(
            "PropDPM",
            "proportional weights collapse onto public users",
        ));
    }
    let total = eps.l1();
    if total == 0.0 {
        return Err(Error::infeasible("PropDPM", "all privacy levels are 0"));
    }
    Ok(Plan::Affine {
        weights: eps.levels().iter().map(|e| e / total).collect(),
        eta: 1.0 / total,
        degenerate: false,
    })
}

fn loosest(eps: &PrivacyVector, name: &'static str) -> Result<f64> {
    let t = eps.max();
    if t.is_infinite() {
        return Err(Error::infeasible(name, "undefined for public users"));
    }
    if t == 0.0 {
        return Err(Error::infeasible(name, "all privacy levels are 0"));
    }
    Ok(t)
}

fn stretch_plan(eps: &PrivacyVector) -> Result<Plan> {
    let t = loosest(eps, "STRETCH")?;
    let n = eps.len() as f64;
    Ok(Plan::Affine {
        weights: eps.levels().iter().map(|e| e / (t * n)).collect(),
        eta: 1.0 / (n * t),
        degenerate: false,
    })
}

fn sm_plan(eps: &PrivacyVector) -> Result<Plan> {
    let t = loosest(eps, "SM")?;
    Ok(Plan::Sampling {
        probs: eps.levels().iter().map(|e| expm1_ratio(*e, t)).collect(),
        t,
    })
}

fn ldpe_plan(privacy: &PrivacyInput) -> Result<Plan> {
    if let PrivacyInput::TwoGroup(p) = privacy {
        let (n1, n2) = p.group_sizes();
        if n1 == 0 || n2 == 0 {
            return Err(Error::infeasible("LDPE", "one of the two groups is empty"));
        }
    }
    let partition: Vec<(f64, Vec<usize>)> = match privacy {
        PrivacyInput::TwoGroup(p) => {
            let (n1, n2) = p.group_sizes();
            vec![(p.eps1, (0..n1).collect()), (p.eps2, (n1..n1 + n2).collect())]
        }
        PrivacyInput::Vector(eps) => {
            // Users sharing a level form one group; keys are the level's
            // bits, which order like the levels for non-negative floats.
            let mut by_level: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, e) in eps.levels().iter().enumerate() {
                by_level.entry(e.to_bits()).or_default().push(i);
            }
            by_level
                .into_iter()
                .map(|(bits, members)| (f64::from_bits(bits), members))
                .collect()
        }
    };
    let mut groups: Vec<LocalGroup> = partition
        .into_iter()
        .map(|(eps, members)| {
            let size = members.len() as f64;
            let scale = if eps.is_infinite() { 0.0 } else { 1.0 / (eps * size) };
            LocalGroup {
                members,
                eps,
                scale,
                coef: 0.0,
            }
        })
        .collect();
    let precision: Vec<f64> = groups
        .iter()
        .map(|g| {
            if g.eps == 0.0 {
                0.0
            } else {
                1.0 / (0.25 / g.members.len() as f64 + 2.0 * g.scale * g.scale)
            }
        })
        .collect();
    let total: f64 = precision.iter().sum();
    if total == 0.0 {
        return Err(Error::infeasible("LDPE", "all privacy levels are 0"));
    }
    for (g, p) in groups.iter_mut().zip(&precision) {
        g.coef = p / total;
    }
    Ok(Plan::Local { groups })
}

/// Exact distribution of the number of successes among independent
/// Bernoulli trials; `O(n²)`.
fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (k, p) in probs.iter().enumerate() {
        for m in (1..=k + 1).rev() {
            pmf[m] = pmf[m] * (1.0 - p) + pmf[m - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

impl Mechanism {
    pub fn prepare(spec: &MechanismSpec) -> Result<Self> {
        let declared = spec.privacy.to_vector();
        let plan = match spec.kind {
            MechanismKind::Adpm => adpm_plan(&spec.privacy),
            MechanismKind::Uni => uni_plan(&declared)?,
            MechanismKind::Sm => sm_plan(&declared)?,
            MechanismKind::PropDpm => propdpm_plan(&declared)?,
            MechanismKind::Ldpe => ldpe_plan(&spec.privacy)?,
            MechanismKind::Stretch => stretch_plan(&declared)?,
        };
        Ok(Mechanism {
            kind: spec.kind,
            declared,
            clamp: spec.clamp,
            plan,
        })
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.declared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.declared.is_empty()
    }

    pub fn declared(&self) -> &PrivacyVector {
        &self.declared
    }

    /// True when the mechanism ignores the data and outputs 0.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.plan, Plan::Affine { degenerate: true, .. })
    }

    /// `(w, eta)` for affine mechanisms.
    pub fn affine_parts(&self) -> Option<(&[f64], f64)> {
        match &self.plan {
            Plan::Affine { weights, eta, .. } => Some((weights, *eta)),
            _ => None,
        }
    }

    /// Sampling probabilities of SM.
    pub fn sampling_probabilities(&self) -> Option<&[f64]> {
        match &self.plan {
            Plan::Sampling { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Per-user weight of the data in the output's mean, when it is linear.
    pub fn mean_weights(&self) -> Option<Vec<f64>> {
        match &self.plan {
            Plan::Affine { weights, .. } => Some(weights.clone()),
            Plan::Local { groups } => {
                let mut w = vec![0.0; self.len()];
                for g in groups {
                    for &i in &g.members {
                        w[i] = g.coef / g.members.len() as f64;
                    }
                }
                Some(w)
            }
            Plan::Sampling { .. } => None,
        }
    }

    pub fn estimate<R: Rng + ?Sized>(&self, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
        if x.len() != self.len() {
            return Err(Error::usage(format!(
                "dataset length {} does not match privacy vector length {}",
                x.len(),
                self.len()
            )));
        }
        let values = x.values();
        let y = match &self.plan {
            Plan::Affine { degenerate: true, .. } => return Ok(0.0),
            Plan::Affine { weights, eta, .. } => dot(weights, values) + noise(*eta, rng)?,
            Plan::Sampling { probs, t } => {
                let mut sum = 0.0;
                let mut m = 0usize;
                for (p, xi) in probs.iter().zip(values) {
                    if rng.random::<f64>() < *p {
                        sum += xi;
                        m += 1;
                    }
                }
                if m == 0 {
                    return Ok(0.0);
                }
                let m = m as f64;
                sum / m + sample_laplace(1.0 / (m * t), rng)?
            }
            Plan::Local { groups } => {
                let mut y = 0.0;
                for g in groups.iter().filter(|g| g.coef > 0.0) {
                    let mean = g.members.iter().map(|&i| values[i]).sum::<f64>() / g.members.len() as f64;
                    y += g.coef * (mean + noise(g.scale, rng)?);
                }
                y
            }
        };
        Ok(if self.clamp { clamp_to_domain(y) } else { y })
    }

    /// MSE when the data are i.i.d. with the given mean and variance.
    pub fn analytic_mse(&self, dist_variance: f64, dist_mean: f64) -> AnalyticMse {
        let mut mse = match &self.plan {
            Plan::Affine { degenerate: true, .. } => AnalyticMse::new(0.0, 0.0, dist_mean * dist_mean),
            Plan::Affine { weights, eta, .. } => {
                let sum: f64 = weights.iter().sum();
                let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
                let bias = dist_mean * (sum - 1.0);
                AnalyticMse::new(dist_variance * sum_sq, 2.0 * eta * eta, bias * bias)
            }
            Plan::Sampling { probs, t } => {
                // Given the subsample size m >= 1 the estimate is unbiased with
                // variance var/m + 2/(m t)²; m = 0 outputs 0.
                let pmf = poisson_binomial(probs);
                let mut inv_m = 0.0;
                let mut inv_m_sq = 0.0;
                for (m, p) in pmf.iter().enumerate().skip(1) {
                    let m = m as f64;
                    inv_m += p / m;
                    inv_m_sq += p / (m * m);
                }
                AnalyticMse::new(
                    dist_variance * inv_m,
                    2.0 * inv_m_sq / (t * t),
                    pmf[0] * dist_mean * dist_mean,
                )
            }
            Plan::Local { groups } => {
                let mut variance = 0.0;
                let mut noise = 0.0;
                for g in groups {
                    let c2 = g.coef * g.coef;
                    variance += c2 / g.members.len() as f64;
                    noise += c2 * 2.0 * g.scale * g.scale;
                }
                AnalyticMse::new(dist_variance * variance, noise, 0.0)
            }
        };
        mse.exact = !self.clamp;
        mse
    }

    /// Per-user effective privacy level of the mechanism.
    pub fn certificate(&self) -> DpCertificate {
        let effective = match &self.plan {
            Plan::Affine { degenerate: true, .. } => return DpCertificate::constant(self.len()),
            Plan::Affine { weights, eta, .. } => {
                return dp_certificate(weights, *eta, &self.declared)
                    .expect("weights match the declared privacy vector")
            }
            // Subsampling with probability p amplifies t-DP to ln(1 + p (e^t - 1)).
            Plan::Sampling { probs, t } => probs.iter().map(|p| (p * t.exp_m1()).ln_1p()).collect(),
            Plan::Local { groups } => {
                let mut levels = vec![0.0; self.len()];
                for g in groups.iter().filter(|g| g.coef > 0.0) {
                    // The group mean moves by at most 1/n_g.
                    let level = if g.scale == 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / (g.members.len() as f64 * g.scale)
                    };
                    for &i in &g.members {
                        levels[i] = level;
                    }
                }
                levels
            }
        };
        DpCertificate::compare(effective, &self.declared)
    }
}

/// Analytic MSE of `spec`, or [`AnalyticMse::infeasible`] when it cannot run.
pub fn analytic_mse(spec: &MechanismSpec, dist_variance: f64, dist_mean: f64) -> AnalyticMse {
    match Mechanism::prepare(spec) {
        Ok(m) => m.analytic_mse(dist_variance, dist_mean),
        Err(_) => AnalyticMse::infeasible(),
    }
}

/// LDPE's worst-case MSE `E1 E2 / (E1 + E2)` for real-valued group masses,
/// with `E_g = 1/(4 n_g) + 2/(n_g ε_g)²`.
pub fn ldpe_worst_case_bound(p: &TwoGroupProfile) -> f64 {
    let precision = |mass: f64, eps: f64| {
        if mass == 0.0 || eps == 0.0 {
            return 0.0;
        }
        let noise = if eps.is_infinite() {
            0.0
        } else {
            2.0 / (mass * eps).powi(2)
        };
        1.0 / (0.25 / mass + noise)
    };
    1.0 / (precision(p.mass1(), p.eps1) + precision(p.mass2(), p.eps2))
}

fn run<R: Rng + ?Sized>(spec: MechanismSpec, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    Mechanism::prepare(&spec)?.estimate(x, rng)
}

pub fn adpm_estimate<R: Rng + ?Sized>(eps: &PrivacyVector, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    run(MechanismSpec::vector(MechanismKind::Adpm, eps.clone()), x, rng)
}

/// Sample mean plus `Lap(1/(n eps1))`.
pub fn uni_estimate<R: Rng + ?Sized>(eps1: f64, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    if eps1.is_nan() || eps1 <= 0.0 {
        return Err(Error::infeasible("UNI", format!("eps1 must be positive, got {eps1}")));
    }
    let eps = PrivacyVector::homogeneous(eps1, x.len())?;
    run(MechanismSpec::vector(MechanismKind::Uni, eps), x, rng)
}

pub fn sm_estimate<R: Rng + ?Sized>(eps: &PrivacyVector, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    run(MechanismSpec::vector(MechanismKind::Sm, eps.clone()), x, rng)
}

pub fn propdpm_estimate<R: Rng + ?Sized>(eps: &PrivacyVector, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    run(MechanismSpec::vector(MechanismKind::PropDpm, eps.clone()), x, rng)
}

/// `x` holds the first group's `round(n f)` values, then the second group's.
pub fn ldpe_estimate<R: Rng + ?Sized>(profile: &TwoGroupProfile, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    run(MechanismSpec::two_group(MechanismKind::Ldpe, *profile), x, rng)
}

pub fn stretch_estimate<R: Rng + ?Sized>(eps: &PrivacyVector, x: &BoundedDataset, rng: &mut R) -> Result<f64> {
    run(MechanismSpec::vector(MechanismKind::Stretch, eps.clone()), x, rng)
}
