mod common;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, FRAC_PI_8};

use approx::assert_relative_eq;
use decaybound::riccati::{critical_length, i_inf, j_sup, solve_riccati, CriticalLength};
use decaybound::WeightSpec;
use common::{p1_stationary, quadratic_energy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Max residual of `ψ' + (p-1)ψ² + pμψ + 1/(p-1)` scaled by `1 + ψ²`, and of
/// the reciprocal form for `ψ̃ = -1/ψ`:
/// `ψ̃' + (p-1) - pμψ̃ + ψ̃²/(p-1)` scaled by `1 + ψ̃²`.
fn residuals(m: &WeightSpec, p: f64, horizon: f64, seed: u64) -> (f64, f64) {
    let sol = solve_riccati(m, p, horizon).unwrap();
    let end = sol.crossing().unwrap_or(sol.horizon()).min(sol.horizon());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut direct, mut reciprocal) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let s = rng.random_range(0.01 * end..end);
        let psi = sol.psi(s).unwrap();
        let dpsi = sol.psi_derivative(s).unwrap();
        let mu = m.log_derivative(s).unwrap();
        let r = dpsi + (p - 1.0) * psi * psi + p * mu * psi + 1.0 / (p - 1.0);
        direct = direct.max(r.abs() / (1.0 + psi * psi));
        let tilde = -1.0 / psi;
        let dtilde = dpsi / (psi * psi);
        let r = dtilde + (p - 1.0) - p * mu * tilde + tilde * tilde / (p - 1.0);
        reciprocal = reciprocal.max(r.abs() / (1.0 + tilde * tilde));
    }
    (direct, reciprocal)
}

#[test]
fn residuals_on_reference_weights() {
    let weights = [
        WeightSpec::unit(),
        WeightSpec::constant_exponential(2.0, 0.4).unwrap(),
        WeightSpec::constant_exponential(0.5, -0.3).unwrap(),
        WeightSpec::tabulate(0.0, 5.0, 2001, |t| 1.0 + 0.5 * (2.0 * t).sin().powi(2)).unwrap(),
    ];
    for (k, m) in weights.iter().enumerate() {
        for p in [1.5, 2.0, 3.0] {
            let (d, r) = residuals(m, p, 3.0, k as u64);
            assert!(d <= 1e-6, "weight {k}, p {p}: residual {d}");
            assert!(r <= 1e-6, "weight {k}, p {p}: reciprocal residual {r}");
        }
    }
}

#[test]
fn reciprocal_form_at_p2_matches_the_symmetric_display() {
    // At p = 2 the reciprocal equation can be written
    // ψ̃'/ψ̃ = -((p-1)ψ̃ - pμ + 1/((p-1)ψ̃)).
    let m = WeightSpec::constant_exponential(1.0, 0.3).unwrap();
    let sol = solve_riccati(&m, 2.0, 0.7).unwrap();
    for s in [0.1, 0.3, 0.5] {
        let tilde = -1.0 / sol.psi(s).unwrap();
        let dtilde = sol.psi_derivative(s).unwrap() * tilde * tilde;
        let rhs = -(tilde - 2.0 * 0.3 + 1.0 / tilde);
        assert_relative_eq!(dtilde / tilde, rhs, max_relative = 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_property(p in 1.2f64..5.0, rate in -0.6f64..0.6, scale in 0.2f64..5.0, seed in 0u64..1000) {
        let m = WeightSpec::constant_exponential(scale, rate).unwrap();
        let (d, r) = residuals(&m, p, 2.0, seed);
        prop_assert!(d <= 1e-6);
        prop_assert!(r <= 1e-6);
    }

    #[test]
    fn unit_weight_critical_length(p in 1.05f64..8.0) {
        let a = critical_length(&WeightSpec::unit(), p).unwrap().value();
        prop_assert!((a - (1.0 / (p - 1.0)).atan()).abs() <= 1e-8);
    }
}

/// Classical RK4 on `w' = 1 + 2λw + w²` with a fixed small step.
fn rk4_w(lambda: f64, s_end: f64, steps: usize) -> f64 {
    let f = |w: f64| 1.0 + 2.0 * lambda * w + w * w;
    let h = s_end / steps as f64;
    let mut w = 0.0;
    for _ in 0..steps {
        let k1 = f(w);
        let k2 = f(w + 0.5 * h * k1);
        let k3 = f(w + 0.5 * h * k2);
        let k4 = f(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

#[test]
fn exponential_weight_against_closed_form_and_rk4() {
    for lambda in [-0.5, 0.3, 0.8] {
        let m = WeightSpec::constant_exponential(1.0, lambda).unwrap();
        let beta = (1.0f64 - lambda * lambda).sqrt();
        let c = (lambda / beta).atan();
        let closed_w = |s: f64| -lambda + beta * (beta * s + c).tan();
        let a_star = (((1.0 + lambda) / beta).atan() - c) / beta;
        let sol = solve_riccati(&m, 2.0, a_star).unwrap();
        for s in [0.1, 0.4, 0.9 * a_star] {
            let w = 1.0 / sol.psi(s).unwrap();
            assert_relative_eq!(w, closed_w(s), max_relative = 1e-10);
            assert_relative_eq!(w, rk4_w(lambda, s, 20_000), max_relative = 1e-10);
        }
        let a = critical_length(&m, 2.0).unwrap();
        assert!(matches!(a, CriticalLength::Finite(_)));
        assert_relative_eq!(a.value(), a_star, epsilon = 1e-10);
    }
}

#[test]
fn i_inf_matches_discrete_minimization() {
    let nodes = 2000;
    for a in [FRAC_PI_4, FRAC_PI_6, FRAC_PI_8] {
        let u = p1_stationary(a, nodes - 1, Some(0.0), 1.0);
        let h = a / (nodes - 1) as f64;
        // (|u'|² - u²)_+ = |u'|² - u² on every cell, so the positive part is inactive.
        assert!(u.windows(2).all(|c| (c[1] - c[0]) / h >= c[1]));
        let brute = quadratic_energy(&u, h);
        let closed = i_inf(&WeightSpec::unit(), 2.0, a).unwrap();
        assert!((brute - closed).abs() <= 1e-4 * closed, "a = {a}: {brute} vs {closed}");
    }
    assert_relative_eq!(i_inf(&WeightSpec::unit(), 2.0, FRAC_PI_6).unwrap(), 1.732_050_8, epsilon = 1e-7);
    assert_relative_eq!(i_inf(&WeightSpec::unit(), 2.0, FRAC_PI_8).unwrap(), 2.414_213_6, epsilon = 1e-7);
}

#[test]
fn j_sup_matches_discrete_maximization() {
    let nodes = 2000;
    for b in [FRAC_PI_4, FRAC_PI_6, FRAC_PI_8] {
        let theta = p1_stationary(b, nodes - 1, None, 1.0);
        let h = b / (nodes - 1) as f64;
        // The constraint |θ'| ≤ θ holds cell by cell.
        assert!(theta.windows(2).all(|c| ((c[1] - c[0]) / h).abs() <= c[0].min(c[1]) * (1.0 + 1e-9)));
        let brute = -quadratic_energy(&theta, h);
        let closed = j_sup(&WeightSpec::unit(), 2.0, b).unwrap();
        assert!((brute - closed).abs() <= 1e-4 * closed, "b = {b}: {brute} vs {closed}");
    }
    assert_relative_eq!(j_sup(&WeightSpec::unit(), 2.0, FRAC_PI_6).unwrap(), 0.577_350_3, epsilon = 1e-7);
    assert_relative_eq!(j_sup(&WeightSpec::unit(), 2.0, FRAC_PI_8).unwrap(), 0.414_213_6, epsilon = 1e-7);
}
