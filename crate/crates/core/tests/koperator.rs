use approx::assert_relative_eq;
use decaybound::koperator::{
    default_frequency_grid, discretize_volterra, duality_gap, duality_probe, estimate_k, resolvent_sup,
    write_matrix_csv, write_trace_csv, EstimateKind, KOptions, DEFAULT_MEMORY_BUDGET,
};
use decaybound::linalg::{norm_1, norm_inf, pnorm_estimate, vec_pnorm, DenseOp, PNormOptions};
use decaybound::SemigroupSystem;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn scalar(a: f64) -> SemigroupSystem {
    SemigroupSystem::scalar(a, "scalar")
}

#[test]
fn scalar_decay_p2_is_one() {
    let est = estimate_k(&scalar(-1.0), 0.0, 2.0, 50.0, 4096).unwrap();
    assert_eq!(est.kind, EstimateKind::CertifiedP2);
    assert!((est.value - 1.0).abs() <= 0.01, "{}", est.value);
    assert!(est.value <= 1.0);
}

#[test]
fn positive_kernel_has_norm_one_over_gamma() {
    let est = estimate_k(&scalar(-1.0), 0.0, 1.5, 50.0, 4096).unwrap();
    assert_eq!(est.kind, EstimateKind::LowerEstimate);
    assert!((est.value - 1.0).abs() <= 0.02, "{}", est.value);
    for (gamma, p) in [(2.0, 3.0), (0.5, 1.5), (4.0, 2.0)] {
        let est = estimate_k(&scalar(-gamma), 0.0, p, 60.0 / gamma, 4096).unwrap();
        assert!((est.value * gamma - 1.0).abs() <= 0.02, "gamma {gamma}, p {p}: {}", est.value);
    }
}

#[test]
fn causality_and_block_values() {
    let sys = SemigroupSystem::from_real_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]], "jordan").unwrap();
    let disc = discretize_volterra(&sys, 0.2, 3.0, 24).unwrap();
    let m = disc.dense(DEFAULT_MEMORY_BUDGET).unwrap();
    let h = disc.step();
    for i in 0..24 {
        for j in 0..24 {
            let block = m.view((2 * i, 2 * j), (2, 2));
            if j > i {
                assert!(block.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
            } else {
                // e^{τA} = e^{-τ}[[1, τ], [0, 1]] for the Jordan block.
                let tau = (i - j) as f64 * h + 0.5 * h;
                let scale = h * (-1.2 * tau).exp();
                assert_relative_eq!(block[(0, 0)].re, scale, max_relative = 1e-12);
                assert_relative_eq!(block[(0, 1)].re, scale * tau, max_relative = 1e-12);
                assert!(block[(1, 0)].norm() < 1e-15);
            }
        }
    }
}

#[test]
fn omega_shift_scales_blocks() {
    let sys = SemigroupSystem::from_real_rows(&[vec![-0.5, 3.0], vec![-3.0, -0.5]], "rot").unwrap();
    let (a, b) = (discretize_volterra(&sys, 0.0, 2.0, 16).unwrap(), discretize_volterra(&sys, 0.7, 2.0, 16).unwrap());
    let h = a.step();
    for k in 0..16 {
        let factor = (-0.7 * (k as f64 + 0.5) * h).exp();
        for (x, y) in a.lag(k).iter().zip(b.lag(k).iter()) {
            assert!((x * factor - y).norm() <= 1e-13 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn omega_weighting_is_a_generator_shift() {
    let sys = SemigroupSystem::from_real_rows(
        &[vec![-1.0, 2.0, 0.0], vec![0.0, -0.8, 1.0], vec![0.5, 0.0, -1.5]],
        "three",
    )
    .unwrap();
    for p in [2.0, 3.0] {
        let direct = estimate_k(&sys, -0.1, p, 20.0, 512).unwrap().value;
        let shifted = estimate_k(&sys.shifted(-0.1), 0.0, p, 20.0, 512).unwrap().value;
        assert_relative_eq!(direct, shifted, max_relative = 1e-8);
    }
}

#[test]
fn horizon_doubling_stabilizes() {
    let values: Vec<f64> = [12.5, 25.0, 50.0]
        .iter()
        .map(|&t| estimate_k(&scalar(-1.0), 0.0, 2.0, t, 4096).unwrap().value)
        .collect();
    assert!(values[0] < values[1] && values[1] < values[2], "{values:?}");
    // The truncation deficit decays like 1/T², so each doubling shrinks the
    // increment about fourfold; the last one is close to 0.54%.
    let (first, second) = (values[1] - values[0], values[2] - values[1]);
    assert!(second < first / 3.0, "{values:?}");
    assert!(second / values[1] < 0.006, "{values:?}");
}

/// Smallest singular value of `[[a, b], [0, d]]`-style 2×2 complex matrices
/// from the closed-form eigenvalues of `M^H M`.
fn sigma_min_2x2(m: [[Complex64; 2]; 2]) -> f64 {
    let fro2: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    // σ_min² = (fro² - disc)/2 = 2 det² / (fro² + disc), the stable form.
    (2.0 * det * det / (fro2 + disc)).sqrt()
}

#[test]
fn non_normal_resolvent_against_dense_sweep() {
    let sys = SemigroupSystem::from_real_rows(&[vec![-1.0, 5.0], vec![0.0, -1.0]], "nonnormal").unwrap();
    let r = resolvent_sup(&sys, 0.0, &default_frequency_grid(&sys, 0.0)).unwrap();
    let mut brute: f64 = 0.0;
    let n = 1_000_000;
    for i in 0..=n {
        let s = -100.0 + 200.0 * i as f64 / n as f64;
        let z = Complex64::new(0.0, s);
        let m = [[z + 1.0, Complex64::new(-5.0, 0.0)], [Complex64::new(0.0, 0.0), z + 1.0]];
        brute = brute.max(1.0 / sigma_min_2x2(m));
    }
    assert!(r.value > 1.0);
    assert!(r.value >= brute * (1.0 - 1e-9), "{} vs {brute}", r.value);
    assert!((r.value - brute).abs() <= 1e-4 * brute, "{} vs {brute}", r.value);
}

#[test]
fn normal_generators_stay_below_resolvent_sup() {
    let sys = SemigroupSystem::from_real_rows(&[vec![-0.5, 2.0], vec![-2.0, -0.5]], "normal").unwrap();
    let est = estimate_k(&sys, 0.0, 2.0, 50.0, 4096).unwrap().value;
    let bound = resolvent_sup(&sys, 0.0, &default_frequency_grid(&sys, 0.0)).unwrap().value;
    assert!(est <= bound * 1.02, "{est} vs {bound}");
}

#[test]
fn duality_examples() {
    assert!(duality_gap(&scalar(-1.0), 0.0, 2.0, 20.0, 1024).unwrap() <= 1e-10);
    let jordan = SemigroupSystem::from_real_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]], "jordan").unwrap();
    assert!(duality_gap(&jordan, 0.0, 2.0, 20.0, 512).unwrap() <= 1e-8);
    let gamma = 2.0;
    let coarse = duality_probe(&scalar(-gamma), 0.0, 1.5, 30.0, 256, &KOptions::default()).unwrap();
    let fine = duality_probe(&scalar(-gamma), 0.0, 1.5, 30.0, 4096, &KOptions::default()).unwrap();
    for probe in [&coarse, &fine] {
        assert!((probe.primal.value * gamma - 1.0).abs() <= 0.02);
        assert!((probe.dual.value * gamma - 1.0).abs() <= 0.02);
    }
    assert!(fine.gap() <= 5e-3, "{}", fine.gap());
}

fn random_matrix(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(v, 0.0)
    })
}

#[test]
fn pnorm_estimator_is_bracketed() {
    for seed in [1u64, 2, 3] {
        let m = random_matrix(50, seed);
        for p in [1.5, 3.0] {
            let est = pnorm_estimate(&DenseOp(&m), p, &PNormOptions::default()).unwrap();
            // Riesz–Thorin: ‖M‖_p ≤ ‖M‖_1^{1/p} ‖M‖_∞^{1-1/p}.
            let upper = norm_1(&m).powf(1.0 / p) * norm_inf(&m).powf(1.0 - 1.0 / p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let mut sampled: f64 = 0.0;
            for _ in 0..100 {
                let x: Vec<Complex64> = (0..50)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(v, 0.0)
                    })
                    .collect();
                let y = (&m * nalgebra::DVector::from_column_slice(&x)).as_slice().to_vec();
                sampled = sampled.max(vec_pnorm(&y, p) / vec_pnorm(&x, p));
            }
            assert!(est.value <= upper * (1.0 + 1e-12), "p {p}: {} > {upper}", est.value);
            assert!(est.value >= sampled, "p {p}: {} < {sampled}", est.value);
        }
    }
}

#[test]
fn csv_dumps() {
    let disc = discretize_volterra(&scalar(-1.0), 0.0, 1.0, 4).unwrap();
    let mut buf = Vec::new();
    write_matrix_csv(&disc, DEFAULT_MEMORY_BUDGET, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("row,col,re,im"));
    assert_eq!(text.lines().count(), 1 + 10);
    let est = estimate_k(&scalar(-1.0), 0.0, 3.0, 5.0, 64).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&est, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iteration,value,kind\n1,"));
    assert!(text.contains("lower-estimate"));
}
