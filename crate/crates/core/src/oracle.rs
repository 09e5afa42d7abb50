//! Independent reference solver for the affine-weight program, used to
//! check [`solve_general`](crate::solver::solve_general).
//!
//! Works on the epigraph form
//!
//! ```text
//! min ‖w‖²/4 + 2 eta²   s.t.  Σw = 1,  w >= 0,  w_i <= ε_i eta
//! ```
//!
//! through its Lagrangian dual: the inner minimization over `(w, eta)` is
//! explicit, so accelerated projected gradient ascent on the multipliers
//! (projection = clamping the cap multipliers at 0) needs no water-filling
//! and no line search. Every iterate yields a feasible primal point and a
//! dual lower bound, so the result carries its own optimality gap.
//! Intended for small instances (n up to ~50).

use crate::privacy::PrivacyVector;
use crate::solver::{affine_objective, WeightSolution, TRIVIAL_RISK};

pub const MAX_ITERATIONS: usize = 100_000;
const GAP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub solution: WeightSolution,
    /// Dual value: a certified lower bound on the optimal objective.
    pub lower_bound: f64,
    pub iterations: usize,
}

impl OracleSolution {
    pub fn gap(&self) -> f64 {
        self.solution.objective - self.lower_bound
    }
}

/// Row-scaled cap constraint `s_i (w_i - ε_i eta) <= 0`, `s_i = 1/sqrt(1+ε_i²)`.
struct Cap {
    user: usize,
    eps: f64,
    scale: f64,
}

struct Dual<'a> {
    users: &'a [usize],
    caps: &'a [Cap],
    n: usize,
}

struct Inner {
    w: Vec<f64>,
    value: f64,
    grad_nu: f64,
    grad_mu: Vec<f64>,
}

impl Dual<'_> {
    /// Minimizes the Lagrangian over `w >= 0` and `eta` for fixed multipliers.
    fn inner(&self, nu: f64, mu: &[f64]) -> Inner {
        let mut shift = vec![0.0; self.n];
        let mut eta = 0.0;
        for (cap, m) in self.caps.iter().zip(mu) {
            shift[cap.user] = m * cap.scale;
            eta += m * cap.scale * cap.eps;
        }
        eta /= 4.0;
        let mut w = vec![0.0; self.n];
        for &i in self.users {
            w[i] = (2.0 * (nu - shift[i])).max(0.0);
        }
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let grad_mu: Vec<f64> = self.caps.iter().map(|c| c.scale * (w[c.user] - c.eps * eta)).collect();
        let value = sum_sq / 4.0 + 2.0 * eta * eta - nu * (sum - 1.0)
            + mu.iter().zip(&grad_mu).map(|(m, g)| m * g).sum::<f64>();
        Inner {
            w,
            value,
            grad_nu: 1.0 - sum,
            grad_mu,
        }
    }
}

/// Feasible primal point from an inner minimizer: renormalize onto the
/// simplex and take the smallest admissible noise scale.
fn repair(w: &[f64], eps: &PrivacyVector) -> Option<(Vec<f64>, f64)> {
    let total: f64 = w.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let w: Vec<f64> = w.iter().map(|x| x / total).collect();
    let obj = affine_objective(&w, eps);
    Some((w, obj))
}

/// Solves the weight program to a certified gap of ~1e-14 or
/// [`MAX_ITERATIONS`], whichever comes first.
pub fn oracle_solve(eps: &PrivacyVector) -> OracleSolution {
    let levels = eps.levels();
    let n = levels.len();
    let users: Vec<usize> = (0..n).filter(|&i| levels[i] > 0.0).collect();
    if users.is_empty() {
        return OracleSolution {
            solution: WeightSolution {
                weights: vec![0.0; n],
                eta: f64::INFINITY,
                objective: f64::INFINITY,
                degenerate: true,
            },
            lower_bound: f64::INFINITY,
            iterations: 0,
        };
    }
    let caps: Vec<Cap> = users
        .iter()
        .filter(|&&i| levels[i].is_finite())
        .map(|&i| Cap {
            user: i,
            eps: levels[i],
            scale: 1.0 / (1.0 + levels[i] * levels[i]).sqrt(),
        })
        .collect();
    let dual = Dual {
        users: &users,
        caps: &caps,
        n,
    };

    // Lipschitz constant of the dual gradient: ‖A‖_F² / σ with σ = 1/2.
    let lipschitz = 2.0 * (users.len() + caps.len()) as f64;
    let step = 1.0 / lipschitz;

    let mut nu = 0.5 / users.len() as f64;
    let mut mu = vec![0.0; caps.len()];
    let (mut y_nu, mut y_mu) = (nu, mu.clone());
    let mut momentum = 1.0_f64;
    let mut best_lower = f64::NEG_INFINITY;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut prev_value = f64::NEG_INFINITY;
    let mut iterations = 0;

    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let at_y = dual.inner(y_nu, &y_mu);
        let next_nu = y_nu + step * at_y.grad_nu;
        let next_mu: Vec<f64> = y_mu
            .iter()
            .zip(&at_y.grad_mu)
            .map(|(m, g)| (m + step * g).max(0.0))
            .collect();

        let at_x = dual.inner(next_nu, &next_mu);
        best_lower = best_lower.max(at_x.value);
        if let Some((w, obj)) = repair(&at_x.w, eps) {
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((w, obj));
            }
        }

        // Adaptive restart when the dual value drops.
        let next_momentum = if at_x.value < prev_value {
            1.0
        } else {
            (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0
        };
        let beta = if next_momentum == 1.0 {
            0.0
        } else {
            (momentum - 1.0) / next_momentum
        };
        y_nu = next_nu + beta * (next_nu - nu);
        y_mu = next_mu
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a + beta * (a - b)).max(0.0))
            .collect();
        nu = next_nu;
        mu = next_mu;
        momentum = next_momentum;
        prev_value = at_x.value;

        if let Some((_, obj)) = &best {
            if obj - best_lower <= GAP_TOLERANCE * obj.max(1e-300) {
                break;
            }
        }
    }

    let (weights, objective) = best.expect("at least one positive level");
    let eta = weights
        .iter()
        .zip(levels)
        .map(|(w, e)| if *w == 0.0 { 0.0 } else { w / e })
        .fold(0.0, f64::max);
    OracleSolution {
        solution: WeightSolution {
            weights,
            eta,
            objective,
            degenerate: objective > TRIVIAL_RISK,
        },
        lower_bound: best_lower,
        iterations,
    }
}
