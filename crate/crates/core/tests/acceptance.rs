//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use hdp_mean::audit::{audit_mechanism, AuditConfig};
use hdp_mean::bounds::{
    lower_bound, lower_bound_from_first_principles, lower_bound_terms, proportional_risk, proportional_risk_ratio_form,
    saturated_risk, saturated_risk_ratio_form, upper_bound,
};
use hdp_mean::estimators::{ldpe_worst_case_bound, Mechanism, MechanismKind, MechanismSpec};
use hdp_mean::oracle::oracle_solve;
use hdp_mean::sim::{
    derive_seed, estimate_mse, estimate_mse_batch, log_uniform_levels, sweep_eps2, sweep_n, table2_experiment, Spread,
    DEFAULT_SEED,
};
use hdp_mean::solver::{solve_general, solve_two_group};
use hdp_mean::{BoundedDataset, DistributionSpec, PrivacyVector, Regime, TwoGroupProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIM_TRIALS: u64 = 20_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn profile(eps1: f64, eps2: f64, n: u64, f: f64) -> TwoGroupProfile {
    TwoGroupProfile::new(eps1, eps2, n, f).expect("valid profile")
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// Table 1, written out independently of the solver.
fn table1(p: &TwoGroupProfile) -> (f64, f64) {
    let n = p.n as f64;
    let big_r = 1.0 + 8.0 / (p.eps1 * p.eps1 * n * p.f);
    if p.eps2 / p.eps1 <= big_r {
        let eps_bar = p.f * p.eps1 + (1.0 - p.f) * p.eps2;
        (p.eps1 / (n * eps_bar), p.eps2 / (n * eps_bar))
    } else {
        let w1 = 1.0 / (n * (p.f + (1.0 - p.f) * big_r));
        (w1, big_r * w1)
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst_closed = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut worst_general_vs_two = 0.0f64;
    for _ in 0..200 {
        let n: u64 = rng.random_range(2..=20);
        let k: u64 = rng.random_range(1..n);
        let eps1 = rng.random_range(-4.0f64..1.0).exp();
        let eps2 = eps1 * rng.random_range(0.0f64..4.0).exp();
        let p = profile(eps1, eps2, n, k as f64 / n as f64);
        let s = solve_two_group(&p);
        let (w1, w2) = table1(&p);
        worst_closed = worst_closed.max(rel_err(s.w1, w1)).max(rel_err(s.w2, w2));
        let eps = p.to_privacy_vector();
        let general = solve_general(&eps);
        let oracle = oracle_solve(&eps);
        worst_gap = worst_gap.max((general.objective - oracle.solution.objective).abs());
        worst_general_vs_two = worst_general_vs_two.max((general.objective - s.objective).abs());
    }
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        let eps = log_uniform_levels(n, (-4.0, 3.0), &mut rng).expect("valid range");
        let general = solve_general(&eps);
        let oracle = oracle_solve(&eps);
        worst_gap = worst_gap.max((general.objective - oracle.solution.objective).abs());
    }
    outcome(
        worst_closed <= 1e-12 && worst_gap <= 1e-6 && worst_general_vs_two <= 1e-8,
        format!(
            "closed-form rel err {worst_closed:.2e} (<= 1e-12), general vs oracle {worst_gap:.2e} (<= 1e-6), general vs two-group {worst_general_vs_two:.2e}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let base = profile(0.1, 0.1, 1000, 0.7);
    let threshold = base.saturation_eps2();
    let mut pass = (threshold - 0.2142857).abs() < 1e-7;
    let values = [threshold, 2.0 * threshold, 10.0 * threshold, f64::INFINITY];
    let reference = base.with_eps2(values[0]).unwrap();
    let s0 = solve_two_group(&reference);
    let w0 = s0.expand(&reference);
    let u0 = upper_bound(&reference);
    for &eps2 in &values[1..] {
        let p = base.with_eps2(eps2).unwrap();
        let s = solve_two_group(&p);
        pass &= s.regime == Regime::B
            && s.w1.to_bits() == s0.w1.to_bits()
            && s.w2.to_bits() == s0.w2.to_bits()
            && s.eta.to_bits() == s0.eta.to_bits()
            && s.objective.to_bits() == s0.objective.to_bits()
            && s.expand(&p) == w0
            && upper_bound(&p).to_bits() == u0.to_bits();
    }
    outcome(
        pass,
        format!("R eps1 = {threshold:.7}, w1 = {:.6e}, w2 = {:.6e}, upper = {u0:.6e} identical for eps2 in {{R eps1, 2R eps1, 10R eps1, inf}}", s0.w1, s0.w2),
    )
}

fn grid_profiles() -> Vec<TwoGroupProfile> {
    let shapes = [
        (0.1, 0.15, 0.5),
        (0.1, 1.0, 0.7),
        (0.5, 2.0, 0.3),
        (1.0, f64::INFINITY, 0.5),
    ];
    let mut out = Vec::new();
    for n in [100, 400, 1000] {
        for (e1, e2, f) in shapes {
            out.push(profile(e1, e2, n, f));
        }
    }
    out
}

fn grid_distributions() -> [DistributionSpec; 3] {
    [
        DistributionSpec::Uniform,
        DistributionSpec::RademacherHalf,
        DistributionSpec::Beta23Shifted,
    ]
}

const AFFINE: [MechanismKind; 4] = [
    MechanismKind::Adpm,
    MechanismKind::PropDpm,
    MechanismKind::Uni,
    MechanismKind::Stretch,
];

fn criterion_3() -> Outcome {
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst_z = 0.0f64;
    let mut worst_upper_z = f64::NEG_INFINITY;
    let mut index = 0;
    for dist in grid_distributions() {
        for p in grid_profiles() {
            let specs: Vec<MechanismSpec> = AFFINE.iter().map(|k| MechanismSpec::two_group(*k, p)).collect();
            let results = estimate_mse_batch(&specs, &dist, SIM_TRIALS, derive_seed(DEFAULT_SEED, index))
                .expect("simulation runs");
            index += 1;
            let adpm = &results[0];
            let upper = upper_bound(&p);
            let upper_z = (adpm.mse - upper) / adpm.stderr;
            worst_upper_z = worst_upper_z.max(upper_z);
            if adpm.mse > upper + 3.0 * adpm.stderr {
                failures.push(format!("ADPM above upper bound at {p:?} {dist}"));
            }
            for r in results.iter().filter(|r| !r.is_infeasible()) {
                checks += 1;
                let z = r.z_score();
                worst_z = worst_z.max(z);
                if z > 3.0 {
                    failures.push(format!(
                        "{} {dist} n={} eps=({}, {}) f={}: mse {:.6e} analytic {:.6e} z {z:.2}",
                        r.mechanism, p.n, p.eps1, p.eps2, p.f, r.mse, r.analytic_ref.total
                    ));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checks} analytic comparisons, worst |z| {worst_z:.2} (<= 3); worst (mse - upper)/se {worst_upper_z:.1} (<= 3){}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join("; "))
            }
        ),
    )
}

fn criterion_4() -> Outcome {
    let template = profile(0.1, 0.1, 1000, 0.7);
    let t = template.saturation_eps2();
    let grid = [0.1, 0.15, t, 1.5 * t, 2.0 * t, 4.0 * t, 10.0 * t];
    let kinds = [MechanismKind::Adpm, MechanismKind::PropDpm, MechanismKind::Ldpe];
    let rows = sweep_eps2(
        &template,
        &kinds,
        &DistributionSpec::RademacherHalf,
        &grid,
        SIM_TRIALS,
        DEFAULT_SEED,
    )
    .expect("sweep runs");
    let of = |kind: MechanismKind| -> Vec<_> { rows.iter().filter(|r| r.result.mechanism == kind).collect() };

    let adpm: Vec<_> = of(MechanismKind::Adpm).into_iter().filter(|r| r.eps2 >= t).collect();
    let mut flat = true;
    let mut worst_pair = 0.0f64;
    for (i, a) in adpm.iter().enumerate() {
        for b in &adpm[i + 1..] {
            let se = a.result.stderr.hypot(b.result.stderr);
            let z = (a.result.mse - b.result.mse).abs() / se;
            worst_pair = worst_pair.max(z);
            flat &= z <= 3.0;
        }
    }

    let prop = of(MechanismKind::PropDpm);
    let at = |x: f64| prop.iter().find(|r| r.eps2 == x).expect("grid point");
    let (p1, p4) = (at(t), at(4.0 * t));
    let prop_z = (p4.result.mse - p1.result.mse) / p1.result.stderr.hypot(p4.result.stderr);

    let ldpe = of(MechanismKind::Ldpe);
    let decreasing = ldpe
        .windows(2)
        .all(|w| w[1].result.analytic_ref.total < w[0].result.analytic_ref.total);

    outcome(
        flat && prop_z > 3.0 && decreasing,
        format!(
            "ADPM past R eps1 = {t:.4}: worst pairwise z {worst_pair:.2} (<= 3); PropDPM 4R eps1 vs R eps1: +{:.3e} = {prop_z:.1} SE (> 3); LDPE analytic strictly decreasing: {decreasing}",
            p4.result.mse - p1.result.mse
        ),
    )
}

fn criterion_5() -> Outcome {
    let template = profile(0.1, 0.15, 1000, 0.5);
    let ns = [250, 500, 1000, 2000];
    let kinds = [MechanismKind::Adpm, MechanismKind::Uni];
    let rows = sweep_n(
        &template,
        &kinds,
        &DistributionSpec::Uniform,
        &ns,
        SIM_TRIALS,
        DEFAULT_SEED,
    )
    .expect("sweep runs");
    let mut pass = true;
    let mut parts = Vec::new();
    for n in ns {
        let get = |k: MechanismKind| {
            rows.iter()
                .find(|r| r.n == n && r.result.mechanism == k)
                .expect("row present")
        };
        let (adpm, uni) = (get(MechanismKind::Adpm), get(MechanismKind::Uni));
        let uni_ok = (uni.transform - 200.0).abs() <= 3.0 * uni.transform_stderr;
        let order_ok = adpm.transform <= uni.transform;
        pass &= uni_ok && order_ok;
        parts.push(format!(
            "n={n}: UNI {:.1}±{:.1}, ADPM {:.1}",
            uni.transform, uni.transform_stderr, adpm.transform
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let table = table2_experiment(1000, (-3.0, -2.0), (-4.0, 2.0), SIM_TRIALS, DEFAULT_SEED).expect("experiment runs");
    let ln = |s: Spread, k: MechanismKind| table.get(s, k).expect("row present").ln_mse;
    let adpm_high = ln(Spread::High, MechanismKind::Adpm);
    let min_other = MechanismKind::ALL
        .iter()
        .filter(|k| **k != MechanismKind::Adpm)
        .map(|k| ln(Spread::High, *k))
        .fold(f64::INFINITY, f64::min);
    let low_gap = (ln(Spread::Low, MechanismKind::Adpm) - ln(Spread::Low, MechanismKind::PropDpm)).abs();
    let summary: Vec<String> = MechanismKind::ALL
        .iter()
        .map(|k| format!("{k} {:.2}/{:.2}", ln(Spread::High, *k), ln(Spread::Low, *k)))
        .collect();
    outcome(
        adpm_high < min_other && low_gap <= 0.3,
        format!(
            "ln MSE high/low: {}; low-spread |ADPM - PropDPM| = {low_gap:.3} (<= 0.3)",
            summary.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_mech = 0.0f64;
    for i in 0..10 {
        let eps1 = 0.01 * 10f64.powf(i as f64 / 3.0);
        for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let p = profile(eps1, f64::INFINITY, 1000, f);
            let combined = ldpe_worst_case_bound(&p);
            worst = worst.max(rel_err(combined, saturated_risk_ratio_form(&p)));
            let m = Mechanism::prepare(&MechanismSpec::two_group(MechanismKind::Ldpe, p)).expect("feasible");
            worst_mech = worst_mech.max(rel_err(m.analytic_mse(0.25, 0.0).total, combined));
        }
    }
    outcome(
        worst <= 1e-10 && worst_mech <= 1e-10,
        format!("50 profiles: max rel err {worst:.2e} (<= 1e-10); mechanism at variance 1/4: {worst_mech:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let dist = DistributionSpec::point_mass(0.5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, n) in [100u64, 1000].into_iter().enumerate() {
        let p = profile(0.01, 0.1, n, 0.5);
        let spec = MechanismSpec::two_group(MechanismKind::Stretch, p);
        let r = estimate_mse(&spec, &dist, 200_000, derive_seed(DEFAULT_SEED, i as u64)).expect("simulation runs");
        let expected = 0.050625 + 200.0 / (n as f64).powi(2);
        let z = (r.mse - expected).abs() / r.stderr;
        pass &= z <= 3.0 && rel_err(r.analytic_ref.total, expected) < 1e-12;
        parts.push(format!("n={n}: mse {:.6} vs {expected:.6} ({z:.2} SE)", r.mse));
    }
    outcome(pass, parts.join("; "))
}

fn bound_grid() -> Vec<TwoGroupProfile> {
    let mut out = Vec::new();
    for i in 0..10 {
        let eps1 = 1e-3 * 10f64.powf(i as f64 * 3.3 / 9.0);
        for j in 0..10 {
            let eps2 = if j == 9 {
                f64::INFINITY
            } else {
                eps1 * 10f64.powf(j as f64 * 3.0 / 8.0)
            };
            for n in [10, 100, 1000, 10_000, 100_000] {
                for f in [0.2, 0.7] {
                    out.push(profile(eps1, eps2, n, f));
                }
            }
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let grid = bound_grid();
    let mut order_ok = true;
    let mut cap_ok = true;
    let mut fp_ok = true;
    let mut id_a = 0.0f64;
    let mut id_b = 0.0f64;
    for p in &grid {
        let (u, l) = (upper_bound(p), lower_bound(p));
        order_ok &= l <= u;
        cap_ok &= u <= 0.25 && l <= 0.25;
        fp_ok &= lower_bound_from_first_principles(p) <= u;
        if p.eps2.is_finite() {
            id_a = id_a.max(rel_err(proportional_risk(p), proportional_risk_ratio_form(p)));
        }
        id_b = id_b.max(rel_err(saturated_risk(p), saturated_risk_ratio_form(p)));
    }
    // U(r) - L3(r) on [1, R], by finite differences on a log grid.
    let mut monotone = true;
    for p in grid.iter().filter(|p| p.eps2 == p.eps1) {
        let big_r = p.saturation_ratio();
        let steps = 400;
        let gap = |r: f64| {
            let q = p.with_eps2(p.eps1 * r).unwrap();
            proportional_risk_ratio_form(&q) - lower_bound_terms(&q).l3
        };
        let mut prev = gap(1.0);
        for s in 1..=steps {
            let r = big_r.powf(s as f64 / steps as f64);
            let cur = gap(r);
            monotone &= cur >= prev - 1e-12 * prev.abs();
            prev = cur;
        }
    }
    outcome(
        order_ok && cap_ok && fp_ok && id_a <= 1e-10 && id_b <= 1e-10 && monotone,
        format!(
            "{} profiles: lower <= upper {order_ok}, <= 1/4 {cap_ok}, first principles <= upper {fp_ok}; identity errors {id_a:.2e} / {id_b:.2e} (<= 1e-10); U - L3 non-decreasing {monotone}",
            grid.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    // Certificates for every mechanism and profile used above.
    let mut privacy: Vec<PrivacyVector> = grid_profiles().iter().map(|p| p.to_privacy_vector()).collect();
    let template = profile(0.1, 0.1, 1000, 0.7);
    let t = template.saturation_eps2();
    for eps2 in [0.1, 0.15, t, 1.5 * t, 2.0 * t, 4.0 * t, 10.0 * t] {
        privacy.push(template.with_eps2(eps2).unwrap().to_privacy_vector());
    }
    for n in [250, 500, 1000, 2000] {
        privacy.push(profile(0.1, 0.15, n, 0.5).to_privacy_vector());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(DEFAULT_SEED, 0));
    privacy.push(log_uniform_levels(1000, (-4.0, 2.0), &mut rng).unwrap());
    privacy.push(log_uniform_levels(1000, (-3.0, -2.0), &mut rng).unwrap());
    let mut certified = 0;
    let mut cert_ok = true;
    for eps in &privacy {
        for kind in MechanismKind::ALL {
            if let Ok(m) = Mechanism::prepare(&MechanismSpec::vector(kind, eps.clone())) {
                certified += 1;
                cert_ok &= m.certificate().all_satisfied();
            }
        }
    }

    // Empirical ratio test on small instances.
    let cfg = AuditConfig {
        seed: DEFAULT_SEED,
        ..AuditConfig::default()
    };
    let base = BoundedDataset::new(vec![0.0; 10]).unwrap();
    let mut audits = 0;
    let mut audit_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for p in [profile(0.5, 2.0, 10, 0.5), profile(1.0, 5.0, 10, 0.5)] {
        for kind in MechanismKind::ALL {
            let m = Mechanism::prepare(&MechanismSpec::two_group(kind, p)).expect("feasible");
            for user in [0, 9] {
                let r = audit_mechanism(&m, &base, user, &cfg).expect("audit runs");
                audits += 1;
                audit_ok &= r.passed();
                worst = worst.max(r.worst_excess_sigmas);
            }
        }
    }
    outcome(
        cert_ok && audit_ok,
        format!(
            "{certified} certificates satisfied: {cert_ok}; {audits} histogram audits at {} draws, worst excess {worst:.2} sigma (<= 4)",
            cfg.draws
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, u64, Check); 10] = [
        (1, "solver optimality", 60, criterion_1),
        (2, "exact saturation", 5, criterion_2),
        (3, "upper bound validity and analytic MSE", 300, criterion_3),
        (4, "MSE versus eps2 shape", 300, criterion_4),
        (5, "second-order behaviour in n", 300, criterion_5),
        (6, "heterogeneous-level comparison", 600, criterion_6),
        (7, "LDPE with a public group", 5, criterion_7),
        (8, "stretching bias", 60, criterion_8),
        (9, "bound consistency", 30, criterion_9),
        (10, "privacy audit", 180, criterion_10),
    ];
    let mut failed = 0;
    for (id, title, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {title}: {} [{:.1}s, budget {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
