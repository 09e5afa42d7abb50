//! Monte Carlo MSE estimation and the parameter sweeps built on it.
//!
//! Every trial draws its dataset from its own ChaCha stream, derived from
//! `(seed, trial)`, and every mechanism draws its noise from a further
//! stream keyed by the mechanism. Results therefore do not depend on thread
//! count or scheduling, and a mechanism gives the same numbers whether it
//! is simulated alone or alongside others (which then share datasets).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::upper_bound;
use crate::error::{Error, Result};
use crate::estimators::{AnalyticMse, Mechanism, MechanismKind, MechanismSpec, PrivacyInput};
use crate::privacy::{BoundedDataset, PrivacyVector, DOMAIN_MAX, DOMAIN_MIN};
use crate::profile::{Regime, TwoGroupProfile};
use crate::solver::solve_two_group;

/// Smallest trial count accepted by [`estimate_mse`].
pub const MIN_TRIALS: u64 = 100;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_220_601;

/// Data distribution on `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform,
    /// `±0.5` with probability 1/2 each.
    RademacherHalf,
    /// `Beta(2, 3) - 0.5`.
    Beta23Shifted,
    PointMass {
        value: f64,
    },
    /// Mass `(1 + sign δ)/2` on `0.5`, the rest on `-0.5`.
    LeCam {
        delta: f64,
        positive: bool,
    },
}

impl DistributionSpec {
    pub fn point_mass(value: f64) -> Result<Self> {
        if !(DOMAIN_MIN..=DOMAIN_MAX).contains(&value) {
            return Err(Error::domain(format!("point mass {value} outside the data domain")));
        }
        Ok(DistributionSpec::PointMass { value })
    }

    pub fn lecam(delta: f64, positive: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::domain(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(DistributionSpec::LeCam { delta, positive })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform | DistributionSpec::RademacherHalf => 0.0,
            DistributionSpec::Beta23Shifted => -0.1,
            DistributionSpec::PointMass { value } => value,
            DistributionSpec::LeCam { delta, positive } => {
                if positive {
                    delta / 2.0
                } else {
                    -delta / 2.0
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform => 1.0 / 12.0,
            DistributionSpec::RademacherHalf => 0.25,
            DistributionSpec::Beta23Shifted => 0.04,
            DistributionSpec::PointMass { .. } => 0.0,
            DistributionSpec::LeCam { delta, .. } => (1.0 - delta * delta) / 4.0,
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            DistributionSpec::Uniform => Sampler::Uniform,
            DistributionSpec::RademacherHalf => Sampler::TwoPoint(0.5),
            DistributionSpec::Beta23Shifted => Sampler::Beta(Beta::new(2.0, 3.0).expect("valid shape parameters")),
            DistributionSpec::PointMass { value } => Sampler::Constant(value),
            DistributionSpec::LeCam { delta, positive } => {
                let d = if positive { delta } else { -delta };
                Sampler::TwoPoint((1.0 + d) / 2.0)
            }
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Uniform => write!(f, "uniform"),
            DistributionSpec::RademacherHalf => write!(f, "rademacher"),
            DistributionSpec::Beta23Shifted => write!(f, "beta23"),
            DistributionSpec::PointMass { value } => write!(f, "point:{value}"),
            DistributionSpec::LeCam { delta, positive } => {
                write!(f, "lecam:{delta}:{}", if *positive { "+" } else { "-" })
            }
        }
    }
}

/// Parses `uniform`, `rademacher` (or `bernoulli`), `beta23`, `point:V`
/// and `lecam:DELTA[:+|-]`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let number = |p: Option<&str>| -> Result<f64> {
            p.ok_or_else(|| Error::usage(format!("distribution {s:?} needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::usage(format!("bad number in {s:?}: {e}")))
        };
        let dist = match head.as_str() {
            "uniform" => DistributionSpec::Uniform,
            "rademacher" | "bernoulli" => DistributionSpec::RademacherHalf,
            "beta23" | "beta" => DistributionSpec::Beta23Shifted,
            "point" => DistributionSpec::point_mass(number(parts.next())?)?,
            "lecam" => {
                let delta = number(parts.next())?;
                let positive = match parts.next() {
                    None | Some("+") => true,
                    Some("-") => false,
                    Some(other) => return Err(Error::usage(format!("bad sign {other:?}"))),
                };
                DistributionSpec::lecam(delta, positive)?
            }
            _ => return Err(Error::usage(format!("unknown distribution {s:?}"))),
        };
        if parts.next().is_some() {
            return Err(Error::usage(format!("trailing fields in {s:?}")));
        }
        Ok(dist)
    }
}

enum Sampler {
    Uniform,
    /// `0.5` with the given probability, else `-0.5`.
    TwoPoint(f64),
    Beta(Beta<f64>),
    Constant(f64),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform => rng.random::<f64>() - 0.5,
            Sampler::TwoPoint(p) => {
                if rng.random::<f64>() < *p {
                    DOMAIN_MAX
                } else {
                    DOMAIN_MIN
                }
            }
            Sampler::Beta(b) => b.sample(rng) - 0.5,
            Sampler::Constant(v) => *v,
        }
    }
}

/// `n` i.i.d. draws from `dist`.
pub fn sample_dataset<R: Rng + ?Sized>(dist: &DistributionSpec, n: usize, rng: &mut R) -> Result<BoundedDataset> {
    if n == 0 {
        return Err(Error::domain("dataset size must be positive"));
    }
    let sampler = dist.sampler();
    BoundedDataset::new((0..n).map(|_| sampler.draw(rng)).collect())
}

/// Stream layout: each trial owns 8 consecutive ChaCha streams; stream 0
/// holds the data, stream `1 + k` the noise of mechanism `k`.
const STREAMS_PER_TRIAL: u64 = 8;

fn stream(seed: u64, trial: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial * STREAMS_PER_TRIAL + slot);
    rng
}

/// Independent seed for the `index`-th point of a sweep.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mechanism: MechanismKind,
    pub mse: f64,
    /// Sample standard deviation of the squared errors over `sqrt(trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub analytic_ref: AnalyticMse,
    /// Realized first-group fraction, for two-group inputs.
    pub realized_f: Option<f64>,
    /// Why the mechanism could not run; `mse` is then infinite.
    pub infeasible: Option<String>,
}

impl SimResult {
    fn infeasible(spec: &MechanismSpec, trials: u64, seed: u64, reason: String) -> Self {
        SimResult {
            mechanism: spec.kind,
            mse: f64::INFINITY,
            stderr: f64::INFINITY,
            trials,
            seed,
            analytic_ref: AnalyticMse::infeasible(),
            realized_f: realized_f(spec),
            infeasible: Some(reason),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        self.infeasible.is_some()
    }

    /// `|mse - analytic| / stderr`; 0 when both agree exactly.
    pub fn z_score(&self) -> f64 {
        let diff = (self.mse - self.analytic_ref.total).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

fn realized_f(spec: &MechanismSpec) -> Option<f64> {
    match &spec.privacy {
        PrivacyInput::TwoGroup(p) => Some(p.realized_f()),
        PrivacyInput::Vector(_) => None,
    }
}

/// Compensated sum; the order of the inputs is fixed, so the result is too.
fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_and_stderr(errors: &[f64]) -> (f64, f64) {
    let t = errors.len() as f64;
    let mean = neumaier_sum(errors.iter().copied()) / t;
    let ss = neumaier_sum(errors.iter().map(|e| (e - mean) * (e - mean)));
    (mean, (ss / (t - 1.0)).sqrt() / t.sqrt())
}

/// Simulates several mechanisms on shared datasets. All specs must have the
/// same number of users; infeasible ones yield tagged rows.
pub fn estimate_mse_batch(
    specs: &[MechanismSpec],
    dist: &DistributionSpec,
    trials: u64,
    seed: u64,
) -> Result<Vec<SimResult>> {
    if trials < MIN_TRIALS {
        return Err(Error::usage(format!(
            "at least {MIN_TRIALS} trials are required, got {trials}"
        )));
    }
    let Some(first) = specs.first() else {
        return Ok(Vec::new());
    };
    let n = first.privacy.to_vector().len();
    let mut prepared: Vec<Option<Mechanism>> = Vec::with_capacity(specs.len());
    let mut reasons: Vec<Option<String>> = Vec::with_capacity(specs.len());
    for spec in specs {
        match Mechanism::prepare(spec) {
            Ok(m) => {
                if m.len() != n {
                    return Err(Error::usage("all mechanisms in a batch need the same number of users"));
                }
                prepared.push(Some(m));
                reasons.push(None);
            }
            Err(e) => {
                prepared.push(None);
                reasons.push(Some(e.to_string()));
            }
        }
    }
    let active: Vec<&Mechanism> = prepared.iter().flatten().collect();
    let truth = dist.mean();
    let sampler = dist.sampler();

    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<f64>> {
            let mut data_rng = stream(seed, trial, 0);
            let x = BoundedDataset::new((0..n).map(|_| sampler.draw(&mut data_rng)).collect())?;
            active
                .iter()
                .map(|m| {
                    let mut rng = stream(seed, trial, 1 + m.kind().index());
                    let y = m.estimate(&x, &mut rng)?;
                    Ok((y - truth) * (y - truth))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::with_capacity(specs.len());
    let mut column = 0;
    for ((spec, mechanism), reason) in specs.iter().zip(&prepared).zip(reasons) {
        let Some(m) = mechanism else {
            results.push(SimResult::infeasible(spec, trials, seed, reason.unwrap_or_default()));
            continue;
        };
        let errors: Vec<f64> = per_trial.iter().map(|row| row[column]).collect();
        column += 1;
        let (mse, stderr) = mean_and_stderr(&errors);
        results.push(SimResult {
            mechanism: spec.kind,
            mse,
            stderr,
            trials,
            seed,
            analytic_ref: m.analytic_mse(dist.variance(), truth),
            realized_f: realized_f(spec),
            infeasible: None,
        });
    }
    Ok(results)
}

/// Monte Carlo MSE of one mechanism.
pub fn estimate_mse(spec: &MechanismSpec, dist: &DistributionSpec, trials: u64, seed: u64) -> Result<SimResult> {
    let mut out = estimate_mse_batch(std::slice::from_ref(spec), dist, trials, seed)?;
    Ok(out.remove(0))
}

fn two_group_specs(kinds: &[MechanismKind], p: TwoGroupProfile) -> Vec<MechanismSpec> {
    kinds.iter().map(|k| MechanismSpec::two_group(*k, p)).collect()
}

/// One row of the MSE-versus-`n` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepNRow {
    pub n: u64,
    pub result: SimResult,
    /// `(mse - 1/(12n)) n²`.
    pub transform: f64,
    pub transform_stderr: f64,
    pub analytic_transform: f64,
}

/// Simulates each mechanism at each `n`, keeping `eps1`, `eps2` and `f` of
/// `template` fixed.
pub fn sweep_n(
    template: &TwoGroupProfile,
    kinds: &[MechanismKind],
    dist: &DistributionSpec,
    n_values: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepNRow>> {
    let mut rows = Vec::new();
    for (i, &n) in n_values.iter().enumerate() {
        let p = template.with_n(n)?;
        let nf = n as f64;
        let transform = |mse: f64| (mse - 1.0 / (12.0 * nf)) * nf * nf;
        for result in estimate_mse_batch(&two_group_specs(kinds, p), dist, trials, derive_seed(seed, i as u64))? {
            rows.push(SweepNRow {
                n,
                transform: transform(result.mse),
                transform_stderr: result.stderr * nf * nf,
                analytic_transform: transform(result.analytic_ref.total),
                result,
            });
        }
    }
    Ok(rows)
}

/// One row of the MSE-versus-`eps2` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEps2Row {
    pub eps2: f64,
    pub result: SimResult,
    pub mse_e4: f64,
    pub stderr_e4: f64,
    pub saturation_eps2: f64,
    pub regime: Regime,
    /// ADPM's `w2 / w1`.
    pub weight_ratio: f64,
    pub upper_bound: f64,
}

pub fn sweep_eps2(
    template: &TwoGroupProfile,
    kinds: &[MechanismKind],
    dist: &DistributionSpec,
    eps2_values: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepEps2Row>> {
    let mut rows = Vec::new();
    for (i, &eps2) in eps2_values.iter().enumerate() {
        if eps2 < template.eps1 {
            return Err(Error::domain(format!(
                "eps2 = {eps2} is below eps1 = {}",
                template.eps1
            )));
        }
        let p = template.with_eps2(eps2)?;
        let solution = solve_two_group(&p.realized());
        for result in estimate_mse_batch(&two_group_specs(kinds, p), dist, trials, derive_seed(seed, i as u64))? {
            rows.push(SweepEps2Row {
                eps2,
                mse_e4: result.mse * 1e4,
                stderr_e4: result.stderr * 1e4,
                saturation_eps2: p.saturation_eps2(),
                regime: p.regime(),
                weight_ratio: solution.weight_ratio(),
                upper_bound: upper_bound(&p),
                result,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightRatioRow {
    pub eps2: f64,
    /// `eps2 / eps1`.
    pub privacy_ratio: f64,
    pub saturation_ratio: f64,
    pub w1: f64,
    pub w2: f64,
    pub weight_ratio: f64,
    pub regime: Regime,
}

/// ADPM's weight ratio `w2 / w1 = min(r, R)` along an `eps2` grid.
pub fn weight_ratio_sweep(template: &TwoGroupProfile, eps2_values: &[f64]) -> Result<Vec<WeightRatioRow>> {
    eps2_values
        .iter()
        .map(|&eps2| {
            if eps2 < template.eps1 {
                return Err(Error::domain(format!(
                    "eps2 = {eps2} is below eps1 = {}",
                    template.eps1
                )));
            }
            let p = template.with_eps2(eps2)?;
            let s = solve_two_group(&p);
            Ok(WeightRatioRow {
                eps2,
                privacy_ratio: p.privacy_ratio(),
                saturation_ratio: p.saturation_ratio(),
                w1: s.w1,
                w2: s.w2,
                weight_ratio: s.weight_ratio(),
                regime: s.regime,
            })
        })
        .collect()
}

/// Spread of the privacy levels in the heterogeneous experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spread {
    High,
    Low,
}

impl fmt::Display for Spread {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spread::High => "high",
            Spread::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub spread: Spread,
    pub result: SimResult,
    pub ln_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
    pub eps_high: PrivacyVector,
    pub eps_low: PrivacyVector,
}

impl Table2 {
    pub fn get(&self, spread: Spread, kind: MechanismKind) -> Option<&Table2Row> {
        self.rows
            .iter()
            .find(|r| r.spread == spread && r.result.mechanism == kind)
    }
}

/// `n` levels with `ln ε` uniform on `[lo, hi]`.
pub fn log_uniform_levels<R: Rng + ?Sized>(n: usize, (lo, hi): (f64, f64), rng: &mut R) -> Result<PrivacyVector> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::domain(format!("empty range [{lo}, {hi}]")));
    }
    PrivacyVector::new((0..n).map(|_| rng.random_range(lo..=hi).exp()).collect())
}

/// Heterogeneous-ε comparison: draw ε once per spread (log-uniform, natural
/// log), then simulate every mechanism under `Beta(2,3) - 0.5`.
pub fn table2_experiment(
    n: usize,
    low_range: (f64, f64),
    high_range: (f64, f64),
    trials: u64,
    seed: u64,
) -> Result<Table2> {
    let mut draw_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let eps_high = log_uniform_levels(n, high_range, &mut draw_rng)?;
    let eps_low = log_uniform_levels(n, low_range, &mut draw_rng)?;
    let dist = DistributionSpec::Beta23Shifted;
    let mut rows = Vec::new();
    for (i, (spread, eps)) in [(Spread::High, &eps_high), (Spread::Low, &eps_low)]
        .into_iter()
        .enumerate()
    {
        let specs: Vec<MechanismSpec> = MechanismKind::ALL
            .iter()
            .map(|k| MechanismSpec::vector(*k, eps.clone()))
            .collect();
        for result in estimate_mse_batch(&specs, &dist, trials, derive_seed(seed, 1 + i as u64))? {
            rows.push(Table2Row {
                spread,
                ln_mse: result.mse.ln(),
                result,
            });
        }
    }
    Ok(Table2 {
        rows,
        eps_high,
        eps_low,
    })
}
