use hdp_mean::bounds::{
    lower_bound, lower_bound_from_first_principles, proportional_risk, proportional_risk_ratio_form, saturated_risk,
    saturated_risk_ratio_form, upper_bound,
};
use hdp_mean::estimators::analytic_mse;
use hdp_mean::oracle::oracle_solve;
use hdp_mean::sim::estimate_mse;
use hdp_mean::solver::{affine_objective, solve_general, solve_two_group};
use hdp_mean::{DistributionSpec, Mechanism, MechanismKind, MechanismSpec, PrivacyVector, TwoGroupProfile};
use proptest::prelude::*;

fn level() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => (-5.0f64..3.0).prop_map(f64::exp),
        1 => Just(0.0),
        1 => Just(f64::INFINITY),
    ]
}

fn privacy(max_n: usize) -> impl Strategy<Value = PrivacyVector> {
    prop::collection::vec(level(), 1..=max_n).prop_map(|v| PrivacyVector::new(v).unwrap())
}

fn profile() -> impl Strategy<Value = TwoGroupProfile> {
    (-4.0f64..1.0, 0.0f64..4.0, 1u64..3000, 0.0f64..=1.0).prop_map(|(l1, gap, n, f)| {
        let eps1 = l1.exp();
        TwoGroupProfile::new(eps1, eps1 * gap.exp(), n, f).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn general_solver_matches_oracle(eps in privacy(12)) {
        prop_assume!(eps.levels().iter().any(|e| *e > 0.0));
        let s = solve_general(&eps);
        let o = oracle_solve(&eps);
        prop_assert!((s.objective - o.solution.objective).abs() <= 1e-6, "{} vs {}", s.objective, o.solution.objective);
        prop_assert!(s.objective >= o.lower_bound - 1e-9);
    }
}

proptest! {
    #[test]
    fn general_solution_is_feasible(eps in privacy(40)) {
        let s = solve_general(&eps);
        if eps.levels().iter().all(|e| *e == 0.0) {
            prop_assert!(s.degenerate);
            return Ok(());
        }
        prop_assert!((s.weight_sum() - 1.0).abs() < 1e-12);
        for (w, e) in s.weights.iter().zip(eps.levels()) {
            prop_assert!(*w >= 0.0);
            if e.is_finite() {
                prop_assert!(*w <= e * s.eta * (1.0 + 1e-12) + 1e-300);
            }
        }
        prop_assert!((affine_objective(&s.weights, &eps) - s.objective).abs() <= 1e-15 * s.objective.max(1.0));
    }

    #[test]
    fn two_group_closed_form_agrees_with_general(p in profile()) {
        let closed = solve_two_group(&p.realized()).expand(&p);
        let general = solve_general(&p.to_privacy_vector());
        prop_assert!(
            (closed.objective - general.objective).abs() <= 1e-9 * general.objective,
            "{} vs {}", closed.objective, general.objective
        );
    }

    #[test]
    fn weight_ratio_is_min_of_r_and_saturation(p in profile()) {
        prop_assume!(p.f > 0.0 && p.eps1 > 0.0);
        let s = solve_two_group(&p);
        let expected = p.privacy_ratio().min(p.saturation_ratio());
        prop_assert!((s.weight_ratio() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn bounds_are_ordered_and_identities_hold(p in profile()) {
        let (lo, hi) = (lower_bound(&p), upper_bound(&p));
        prop_assert!(lo <= hi);
        prop_assert!(hi <= 0.25);
        prop_assert!(lower_bound_from_first_principles(&p) <= hi);
        let a = proportional_risk(&p);
        prop_assert!((a - proportional_risk_ratio_form(&p)).abs() <= 1e-10 * a);
        let b = saturated_risk(&p);
        prop_assert!((b - saturated_risk_ratio_form(&p)).abs() <= 1e-10 * b);
    }

    /// The analytic MSE of ADPM at any distribution with variance at most
    /// 1/4 stays below the upper bound of the integer group sizes it runs on.
    #[test]
    fn adpm_risk_below_upper_bound(p in profile(), var in 0.0f64..=0.25, mean in -0.5f64..=0.5) {
        let m = analytic_mse(&MechanismSpec::two_group(MechanismKind::Adpm, p), var, mean);
        let bound = upper_bound(&p.realized());
        prop_assert!(m.total <= bound * (1.0 + 1e-12), "{} > {bound}", m.total);
    }

    #[test]
    fn every_feasible_mechanism_is_certified(eps in privacy(30)) {
        for kind in MechanismKind::ALL {
            if let Ok(m) = Mechanism::prepare(&MechanismSpec::vector(kind, eps.clone())) {
                let cert = m.certificate();
                prop_assert!(cert.all_satisfied(), "{kind}: {:?} vs {:?}", cert.effective_levels, eps.levels());
            }
        }
    }
}

#[test]
fn same_seed_same_estimate() {
    let p = TwoGroupProfile::new(0.2, 0.9, 300, 0.4).unwrap();
    let dist = DistributionSpec::lecam(0.2, true).unwrap();
    for kind in MechanismKind::ALL {
        let spec = MechanismSpec::two_group(kind, p);
        let a = estimate_mse(&spec, &dist, 500, 77).unwrap();
        let b = estimate_mse(&spec, &dist, 500, 77).unwrap();
        assert_eq!(a.mse.to_bits(), b.mse.to_bits(), "{kind}");
        let c = estimate_mse(&spec, &dist, 500, 78).unwrap();
        assert_ne!(a.mse.to_bits(), c.mse.to_bits(), "{kind}");
    }
}

/// A two-point instance: every estimator's risk on the harder of the pair is
/// at least the first-principles bound, and ADPM's stays below the upper one.
#[test]
fn lecam_pair_sits_between_the_bounds() {
    let p = TwoGroupProfile::new(0.5, 2.0, 200, 0.5).unwrap();
    let lower = lower_bound_from_first_principles(&p);
    let upper = upper_bound(&p);
    for delta in [0.05, 0.1, 0.2] {
        let worst = [true, false]
            .into_iter()
            .map(|positive| {
                let d = DistributionSpec::lecam(delta, positive).unwrap();
                let spec = MechanismSpec::two_group(MechanismKind::Adpm, p);
                estimate_mse(&spec, &d, 20_000, 5).unwrap()
            })
            .max_by(|a, b| a.mse.total_cmp(&b.mse))
            .unwrap();
        assert!(
            worst.mse + 3.0 * worst.stderr >= lower,
            "delta {delta}: {} < {lower}",
            worst.mse
        );
        assert!(
            worst.mse - 3.0 * worst.stderr <= upper,
            "delta {delta}: {} > {upper}",
            worst.mse
        );
    }
}
