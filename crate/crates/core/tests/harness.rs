use approx::assert_relative_eq;
use decaybound::bounds::{BoundKind, OptimizeOptions, Verdict};
use decaybound::harness::{
    fit_growth_constant, make_scenario, report_passes, semigroup_norm, verify_bound, verify_bound_with, write_certification_csv, Scenario,
    ScenarioKind,
};
use decaybound::koperator::{default_frequency_grid, resolvent_sup, EstimateKind};
use decaybound::riccati::RiccatiOptions;
use decaybound::{BoundParams, Error, SemigroupSystem, WeightSpec};
use proptest::prelude::*;

fn jordan2() -> SemigroupSystem {
    SemigroupSystem::from_real_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]], "jordan").unwrap()
}

/// `[[-1, 5], [0, -1]]`: transient growth to about 1.9 before decay.
fn sheared_scenario() -> Scenario {
    let sys = SemigroupSystem::from_real_rows(&[vec![-1.0, 5.0], vec![0.0, -1.0]], "sheared").unwrap();
    let l = fit_growth_constant(&sys, 2.0, -0.9, 80.0).unwrap() * (1.0 + 1e-8);
    let m = WeightSpec::constant_exponential(l, -0.9).unwrap();
    let omega = -0.95;
    let k = resolvent_sup(&sys, omega, &default_frequency_grid(&sys, omega)).unwrap().value;
    let params = BoundParams::new(omega, 2.0).unwrap().with_k(k).unwrap().with_r(1.0 / k).unwrap();
    Scenario::new(sys, m, params, vec![0.5, 1.0, 2.0, 4.0], EstimateKind::CertifiedP2).unwrap()
}

#[test]
fn jordan_norm_closed_form() {
    let sys = jordan2();
    for t in [0.0f64, 0.3, 1.0, 2.0, 5.0, 11.0] {
        // Singular values of [[1, t], [0, 1]]: σ² = (2 + t² ± t√(t² + 4))/2.
        let expected = (-t).exp() * ((2.0 + t * t + t * (t * t + 4.0).sqrt()) / 2.0).sqrt();
        assert_relative_eq!(semigroup_norm(&sys, 2.0, t).unwrap(), expected, max_relative = 1e-12);
    }
    assert_relative_eq!(semigroup_norm(&sys, 2.0, 2.0).unwrap(), 0.3267, epsilon = 1e-4);
    // Column and row sums of e^{-t}[[1, t], [0, 1]].
    assert_relative_eq!(semigroup_norm(&sys, 1.0, 2.0).unwrap(), 3.0 * (-2.0f64).exp(), max_relative = 1e-12);
    assert_relative_eq!(semigroup_norm(&sys, f64::INFINITY, 2.0).unwrap(), 3.0 * (-2.0f64).exp(), max_relative = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law_at_norm_level(t in 0.0f64..6.0, s in 0.0f64..6.0, which in 0usize..3) {
        let sys = match which {
            0 => jordan2(),
            1 => make_scenario(ScenarioKind::RandomStable, 3, 4).unwrap().system,
            _ => SemigroupSystem::from_real_rows(&[vec![-0.5, 5.0], vec![-5.0, -0.5]], "rot").unwrap(),
        };
        for p in [1.0, 2.0, f64::INFINITY] {
            let lhs = semigroup_norm(&sys, p, t + s).unwrap();
            let rhs = semigroup_norm(&sys, p, t).unwrap() * semigroup_norm(&sys, p, s).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-9));
        }
    }
}

#[test]
fn fitted_scenarios_are_admissible() {
    let s = make_scenario(ScenarioKind::ScalarStable, 1, 0).unwrap();
    let (l, lambda) = s.growth().unwrap();
    assert_relative_eq!(l, 1.0, max_relative = 1e-7);
    assert_relative_eq!(lambda, -0.9, max_relative = 1e-12);
    assert!(s.is_contraction().unwrap());
    let j = make_scenario(ScenarioKind::Jordan, 2, 0).unwrap();
    let (l, _) = j.growth().unwrap();
    // sup_t e^{-0.1t} ‖[[1, t], [0, 1]]‖ is attained near t ≈ 9.
    assert!(l > 2.0, "{l}");
    // A + Aᴴ = [[-2, 1], [1, -2]] is negative definite.
    assert!(j.is_contraction().unwrap());
    assert!(!sheared_scenario().is_contraction().unwrap());
    let r = make_scenario(ScenarioKind::RotationDamped, 2, 0).unwrap();
    for t in [0.5, 3.0, 7.0] {
        assert_relative_eq!(semigroup_norm(&r.system, 2.0, t).unwrap(), (-0.5 * t).exp(), max_relative = 1e-12);
    }
    // A majorant below the norm is rejected.
    let too_small = WeightSpec::constant_exponential(1.0, -1.5).unwrap();
    let params = BoundParams::new(0.0, 2.0).unwrap().with_k(1.0).unwrap();
    let err = Scenario::new(jordan2(), too_small, params, vec![1.0, 2.0], EstimateKind::CertifiedP2).unwrap_err();
    assert!(matches!(err, Error::InadmissibleMajorant { .. }));
}

#[test]
fn normal_resolvent_is_reciprocal_distance() {
    for dim in [2, 3, 4] {
        let s = make_scenario(ScenarioKind::RotationDamped, dim, 0).unwrap();
        for omega in [0.0, -0.3, 1.0] {
            let sup = resolvent_sup(&s.system, omega, &default_frequency_grid(&s.system, omega)).unwrap();
            assert_relative_eq!(sup.value, 1.0 / (omega + 0.5), max_relative = 1e-6);
        }
    }
}

#[test]
fn scalar_hilbert_with_unit_majorant_passes() {
    let sys = SemigroupSystem::scalar(-1.0, "scalar");
    let params = BoundParams::new(0.0, 2.0).unwrap().with_r(1.0).unwrap().with_k(1.0).unwrap();
    let grid: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    let s = Scenario::new(sys, WeightSpec::unit(), params, grid, EstimateKind::CertifiedP2).unwrap();
    let rep = verify_bound(&s, BoundKind::Hilbert).unwrap();
    assert!(report_passes(&rep));
    // m ≡ 1, r = 1: the optimum is a = b = t/2 and the bound is 2/t.
    for (t, v) in rep.t_grid.iter().zip(&rep.values) {
        assert_relative_eq!(*v, 2.0 / t, max_relative = 1e-8);
    }
    let wei = verify_bound(&s, BoundKind::Wei).unwrap();
    assert!(report_passes(&wei));
    for (t, v) in wei.t_grid.iter().zip(&wei.values) {
        assert_relative_eq!(*v, (-t + std::f64::consts::FRAC_PI_2).exp(), max_relative = 1e-9);
    }
}

#[test]
fn jordan_sharp_bound_with_nonconstant_majorant() {
    // ‖e^{tA}‖ = e^{-t}‖[[1, t], [0, 1]]‖ ≤ e^{-t}(1 + t); μ = -1 + 1/(1 + t).
    let m = WeightSpec::tabulate(0.0, 40.0, 8001, |t: f64| (-t).exp() * (1.0 + t)).unwrap();
    let sys = jordan2();
    let omega = -0.5;
    let k = resolvent_sup(&sys, omega, &default_frequency_grid(&sys, omega)).unwrap().value;
    let params = BoundParams::new(omega, 2.0).unwrap().with_k(k).unwrap();
    let grid: Vec<f64> = (1..=16).map(|i| 0.75 * i as f64).collect();
    let s = Scenario::new(sys, m, params, grid, EstimateKind::CertifiedP2).unwrap();
    let rep = verify_bound(&s, BoundKind::Sharp).unwrap();
    let rows = rep.certification.as_ref().unwrap();
    assert!(rows.iter().all(|r| r.verdict == Verdict::Pass), "{rows:?}");
}

#[test]
fn wei_requires_a_contraction() {
    let s = sheared_scenario();
    assert!(matches!(verify_bound(&s, BoundKind::Wei), Err(Error::EmptyAdmissibleSet(_))));
    for kind in [ScenarioKind::ScalarStable, ScenarioKind::Jordan, ScenarioKind::RotationDamped] {
        let s = make_scenario(kind, 2, 0).unwrap();
        assert!(report_passes(&verify_bound(&s, BoundKind::Wei).unwrap()), "{kind}");
    }
}

#[test]
fn verdicts_survive_finer_discretization() {
    let fine = OptimizeOptions {
        scan: 128,
        bracket: 1e-9,
        quad_tol: 1e-12,
        riccati: RiccatiOptions {
            rtol: 1e-13,
            atol: 1e-15,
            horizon_cap: None,
        },
        ..OptimizeOptions::default()
    };
    for (kind, dim) in [(ScenarioKind::Jordan, 2), (ScenarioKind::RandomStable, 2)] {
        let s = make_scenario(kind, dim, 1).unwrap();
        for bound in [BoundKind::Hilbert, BoundKind::Sharp, BoundKind::Minmax] {
            let coarse = verify_bound(&s, bound).unwrap();
            let refined = verify_bound_with(&s, bound, &fine).unwrap();
            let (c, f) = (coarse.certification.unwrap(), refined.certification.unwrap());
            for (x, y) in c.iter().zip(&f) {
                assert_eq!(x.verdict, y.verdict, "{kind} {bound}");
            }
            for (x, y) in coarse.values.iter().zip(&refined.values) {
                assert!((x / y - 1.0).abs() <= 1e-6, "{kind} {bound}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn certification_csv_layout() {
    let s = make_scenario(ScenarioKind::ScalarStable, 1, 0).unwrap();
    let rep = verify_bound(&s, BoundKind::Ly).unwrap();
    let mut out = Vec::new();
    write_certification_csv(&[(s.label.clone(), rep)], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario,kind,t,exact,bound,ratio,verdict"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "scalar-stable-1");
    assert_eq!(first[1], "ly");
    assert_eq!(first[6], "PASS");
    assert_eq!(text.lines().count(), 1 + s.t_grid.len());
}

#[test]
fn non_euclidean_verdicts_are_conditional() {
    let opts = decaybound::harness::ScenarioOptions {
        p: 3.0,
        t_grid: vec![1.0, 2.0, 4.0],
        ..Default::default()
    };
    let s = decaybound::harness::make_scenario_with(ScenarioKind::ScalarStable, 1, 0, &opts).unwrap();
    assert_eq!(s.k_kind, EstimateKind::LowerEstimate);
    let rep = verify_bound(&s, BoundKind::Banach).unwrap();
    let rows = rep.certification.unwrap();
    assert!(rows.iter().all(|r| r.verdict == Verdict::ConditionalPass), "{rows:?}");
}
