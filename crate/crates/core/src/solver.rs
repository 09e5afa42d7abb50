//! Optimal weights for the affine estimator `<w, x> + Lap(eta)`.
//!
//! The weights minimize the worst-case MSE `‖w‖²/4 + 2 max_i (w_i/ε_i)²`
//! over the probability simplex. Two groups admit a closed form; arbitrary
//! privacy vectors are handled by a one-dimensional search over the noise
//! scale `eta`, with the inner minimum-norm problem solved exactly by
//! water-filling onto the capped simplex `{Σw = 1, 0 <= w_i <= ε_i eta}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::privacy::PrivacyVector;
use crate::profile::{Regime, TwoGroupProfile};

/// Worst-case MSE of the trivial estimator that always outputs 0.
pub const TRIVIAL_RISK: f64 = 0.25;

/// Relative tolerance of the golden-section search over `eta`.
pub const ETA_TOLERANCE: f64 = 1e-10;

/// Per-user weights of an affine estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    pub eta: f64,
    /// `‖w‖²/4 + 2 eta²`, the worst-case MSE of the affine estimator.
    pub objective: f64,
    /// The objective exceeds 1/4, so the estimator returns the constant 0.
    pub degenerate: bool,
}

impl WeightSolution {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Closed-form two-group solution; `w1`, `w2` are the weights of a single
/// user in the first and second group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoGroupSolution {
    pub w1: f64,
    pub w2: f64,
    pub eta: f64,
    pub objective: f64,
    pub degenerate: bool,
    pub regime: Regime,
}

impl TwoGroupSolution {
    /// `w2 / w1`; equals `min(r, R)`.
    pub fn weight_ratio(&self) -> f64 {
        self.w2 / self.w1
    }

    /// Per-user weights for the integer group sizes of `profile`.
    pub fn expand(&self, profile: &TwoGroupProfile) -> WeightSolution {
        let (n1, n2) = profile.group_sizes();
        let mut weights = vec![self.w1; n1];
        weights.extend(std::iter::repeat_n(self.w2, n2));
        WeightSolution {
            weights,
            eta: self.eta,
            objective: self.objective,
            degenerate: self.degenerate,
        }
    }
}

/// `w / eps` with the conventions `0 / anything = 0` and `w / inf = 0`.
fn load(w: f64, eps: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w / eps
    }
}

fn two_group_objective(p: &TwoGroupProfile, w1: f64, w2: f64, eta: f64) -> f64 {
    let mut sum_sq = 0.0;
    if p.f > 0.0 {
        sum_sq += p.mass1() * w1 * w1;
    }
    if p.f < 1.0 {
        sum_sq += p.mass2() * w2 * w2;
    }
    sum_sq / 4.0 + 2.0 * eta * eta
}

fn finish_two_group(p: &TwoGroupProfile, w1: f64, w2: f64, eta: f64, regime: Regime) -> TwoGroupSolution {
    let objective = two_group_objective(p, w1, w2, eta);
    TwoGroupSolution {
        w1,
        w2,
        eta,
        objective,
        degenerate: objective > TRIVIAL_RISK,
        regime,
    }
}

fn infeasible_two_group(p: &TwoGroupProfile) -> TwoGroupSolution {
    let w = 1.0 / p.n_f64();
    TwoGroupSolution {
        w1: w,
        w2: w,
        eta: f64::INFINITY,
        objective: f64::INFINITY,
        degenerate: true,
        regime: Regime::A,
    }
}

/// Closed-form optimal weights for two groups.
///
/// Regime A (`r <= R`): `w_i = eps_i / (n eps_bar)`.
/// Regime B (`r >= R`): `w1 = 1 / (n [f + (1-f) R])`, `w2 = R w1`; nothing
/// here depends on `eps2`, so all outputs are bit-identical past saturation.
pub fn solve_two_group(p: &TwoGroupProfile) -> TwoGroupSolution {
    let n = p.n_f64();
    match p.regime() {
        Regime::B => {
            let ratio = p.saturation_ratio();
            let w1 = 1.0 / (n * (p.f + (1.0 - p.f) * ratio));
            let w2 = ratio * w1;
            // max(w1/eps1, w2/eps2) = w1/eps1 whenever eps2 >= R eps1.
            let eta = w1 / p.eps1;
            finish_two_group(p, w1, w2, eta, Regime::B)
        }
        Regime::A => {
            if p.eps1.is_infinite() {
                // Everyone is public.
                let w = 1.0 / n;
                return finish_two_group(p, w, w, 0.0, Regime::A);
            }
            if p.eps2.is_infinite() {
                // Only reachable with eps1 = 0 or f = 0: the public group
                // carries all the weight.
                if p.f == 1.0 {
                    return infeasible_two_group(p);
                }
                return finish_two_group(p, 0.0, 1.0 / p.mass2(), 0.0, Regime::A);
            }
            let eps_bar = p.eps_bar();
            if eps_bar == 0.0 {
                return infeasible_two_group(p);
            }
            let w1 = p.eps1 / (n * eps_bar);
            let w2 = p.eps2 / (n * eps_bar);
            let mut eta: f64 = 0.0;
            if p.f > 0.0 {
                eta = eta.max(load(w1, p.eps1));
            }
            if p.f < 1.0 {
                eta = eta.max(load(w2, p.eps2));
            }
            finish_two_group(p, w1, w2, eta, Regime::A)
        }
    }
}

/// Minimum-norm point of `{Σw = 1, 0 <= w_i <= ε_i eta}`.
///
/// The solution has the form `w_i = min(λ, ε_i eta)`; `λ` is found by a
/// scan over the caps in ascending order. Users with `ε_i = 0` get weight 0.
pub fn project_capped_simplex(eps: &PrivacyVector, eta: f64) -> Result<Vec<f64>> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::domain(format!("noise scale must be >= 0, got {eta}")));
    }
    let caps = SortedCaps::new(eps);
    if !caps.feasible(eta) {
        return Err(Error::domain(format!(
            "noise scale below 1/‖ε‖₁: eta = {eta}, 1/‖ε‖₁ = {}",
            1.0 / eps.l1()
        )));
    }
    let fill = caps.water_fill(eta);
    let mut w = vec![0.0; eps.len()];
    for (rank, &idx) in caps.order.iter().enumerate() {
        w[idx] = if rank < fill.capped {
            eta * caps.sorted[rank]
        } else {
            fill.level
        };
    }
    for &idx in &caps.public {
        w[idx] = fill.level;
    }
    if fill.capped == caps.sorted.len() && caps.public.is_empty() {
        // At the feasibility boundary every cap binds; absorb rounding.
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
    }
    Ok(w)
}

/// Finite positive levels sorted ascending (stable, so ties keep index
/// order), plus the indices of public users.
struct SortedCaps {
    order: Vec<usize>,
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
    public: Vec<usize>,
}

struct Fill {
    capped: usize,
    level: f64,
    norm_sq: f64,
}

impl SortedCaps {
    fn new(eps: &PrivacyVector) -> Self {
        let levels = eps.levels();
        let mut order: Vec<usize> = (0..levels.len())
            .filter(|&i| levels[i] > 0.0 && levels[i].is_finite())
            .collect();
        order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| levels[i]).collect();
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut prefix_sq = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        for e in &sorted {
            prefix.push(prefix.last().unwrap() + e);
            prefix_sq.push(prefix_sq.last().unwrap() + e * e);
        }
        let public = (0..levels.len()).filter(|&i| levels[i].is_infinite()).collect();
        SortedCaps {
            order,
            sorted,
            prefix,
            prefix_sq,
            public,
        }
    }

    fn active(&self) -> usize {
        self.sorted.len() + self.public.len()
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// Smallest admissible noise scale, `1/‖ε‖₁`.
    fn eta_min(&self) -> f64 {
        if self.public.is_empty() {
            1.0 / self.total()
        } else {
            0.0
        }
    }

    /// Noise scale beyond which no cap binds.
    fn eta_max(&self) -> f64 {
        match self.sorted.first() {
            Some(min) => 1.0 / (self.active() as f64 * min),
            None => 0.0,
        }
    }

    fn feasible(&self, eta: f64) -> bool {
        !self.public.is_empty() || eta * self.total() >= 1.0 - 1e-12
    }

    fn water_fill(&self, eta: f64) -> Fill {
        let m = self.sorted.len();
        let public = self.public.len();
        for k in 0..m {
            let left = (m - k + public) as f64;
            let level = (1.0 - eta * self.prefix[k]) / left;
            if level <= eta * self.sorted[k] {
                return Fill {
                    capped: k,
                    level,
                    norm_sq: eta * eta * self.prefix_sq[k] + left * level * level,
                };
            }
        }
        let level = if public > 0 {
            (1.0 - eta * self.prefix[m]) / public as f64
        } else {
            0.0
        };
        Fill {
            capped: m,
            level,
            norm_sq: eta * eta * self.prefix_sq[m] + public as f64 * level * level,
        }
    }

    /// `‖w(eta)‖²/4 + 2 eta²`.
    fn risk(&self, eta: f64) -> f64 {
        self.water_fill(eta).norm_sq / 4.0 + 2.0 * eta * eta
    }

    /// Exact minimizer of the risk restricted to the pieces where the
    /// `capped` smallest caps bind. There the risk is the quadratic
    /// `(eta² S2 + (1 - eta S1)²/m)/4 + 2 eta²`, `m` the free users.
    fn piece_minimizer(&self, capped: usize) -> Option<f64> {
        let free = (self.sorted.len() - capped + self.public.len()) as f64;
        if free == 0.0 {
            return None;
        }
        let (s1, s2) = (self.prefix[capped], self.prefix_sq[capped]);
        Some(s1 / (free * s2 + s1 * s1 + 8.0 * free))
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is below `rel_tol` relative to its upper end.
pub fn golden_section_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..500 {
        if b - a <= rel_tol * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn degenerate_solution(n: usize) -> WeightSolution {
    WeightSolution {
        weights: vec![0.0; n],
        eta: f64::INFINITY,
        objective: f64::INFINITY,
        degenerate: true,
    }
}

/// Optimal affine weights for an arbitrary privacy vector.
///
/// Minimizes `F(eta) = ‖w(eta)‖²/4 + 2 eta²` over
/// `eta ∈ [1/‖ε‖₁, 1/(n min ε)]`, where `w(eta)` is the capped-simplex
/// projection. `F` is convex (partial minimization of a jointly convex
/// program), so golden-section search applies. Users with `ε_i = 0` get
/// weight 0; if nobody has a positive level the solution is degenerate.
pub fn solve_general(eps: &PrivacyVector) -> WeightSolution {
    let caps = SortedCaps::new(eps);
    if caps.active() == 0 {
        return degenerate_solution(eps.len());
    }
    let (lo, hi) = (caps.eta_min(), caps.eta_max());
    let eta_star = if hi <= lo {
        lo
    } else {
        let rough = golden_section_minimize(|eta| caps.risk(eta), lo, hi, ETA_TOLERANCE);
        // The risk is piecewise quadratic. A piece's own minimizer that lies
        // inside that piece is the global one by convexity; near a
        // breakpoint fall back to whichever candidate is best.
        let capped = caps.water_fill(rough).capped;
        let pieces = capped.saturating_sub(1)..=(capped + 1).min(caps.sorted.len());
        let candidates: Vec<(usize, f64)> = pieces
            .filter_map(|k| caps.piece_minimizer(k).map(|eta| (k, eta)))
            .collect();
        match candidates
            .iter()
            .find(|(k, eta)| (lo..=hi).contains(eta) && caps.water_fill(*eta).capped == *k)
        {
            Some((_, eta)) => *eta,
            None => candidates
                .iter()
                .map(|(_, eta)| eta.clamp(lo, hi))
                .fold(
                    rough,
                    |best, eta| {
                        if caps.risk(eta) < caps.risk(best) {
                            eta
                        } else {
                            best
                        }
                    },
                ),
        }
    };
    let weights = project_capped_simplex(eps, eta_star).expect("search interval only contains feasible noise scales");
    let eta = weights
        .iter()
        .zip(eps.levels())
        .map(|(w, e)| load(*w, *e))
        .fold(0.0, f64::max);
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    let objective = sum_sq / 4.0 + 2.0 * eta * eta;
    WeightSolution {
        weights,
        eta,
        objective,
        degenerate: objective > TRIVIAL_RISK,
    }
}

/// Worst-case MSE `‖w‖²/4 + 2 max(w/ε)²` of arbitrary simplex weights.
pub fn affine_objective(weights: &[f64], eps: &PrivacyVector) -> f64 {
    let eta = weights
        .iter()
        .zip(eps.levels())
        .map(|(w, e)| load(*w, *e))
        .fold(0.0, f64::max);
    weights.iter().map(|w| w * w).sum::<f64>() / 4.0 + 2.0 * eta * eta
}
