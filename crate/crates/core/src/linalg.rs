//! Dense and matrix-free linear algebra: spectra, induced norms, the
//! nonlinear power method for `p`-norms and Lanczos for the spectral norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// A linear map between `C^cols` and `C^rows` together with its adjoint.
pub trait LinearOp: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

pub struct DenseOp<'a>(pub &'a DMatrix<Complex64>);

impl LinearOp for DenseOp<'_> {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (self.0 * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (self.0.adjoint() * DVector::from_column_slice(y)).as_slice().to_vec()
    }
}

/// The adjoint of an operator, as an operator.
pub struct Adjoint<'a, T: LinearOp + ?Sized>(pub &'a T);

impl<T: LinearOp + ?Sized> LinearOp for Adjoint<'_, T> {
    fn rows(&self) -> usize {
        self.0.cols()
    }

    fn cols(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.apply_adjoint(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.0.apply(y)
    }
}

pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    m.clone()
        .eigenvalues()
        .map(|v| v.as_slice().to_vec())
        .unwrap_or_else(|| {
            // Complex Schur always yields a triangular factor; fall back to it.
            let t = nalgebra::Schur::new(m.clone()).unpack().1;
            (0..m.nrows()).map(|i| t[(i, i)]).collect()
        })
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone().singular_values().max()
}

/// Smallest singular value of a dense square matrix.
pub fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone().singular_values().min()
}

pub fn norm_1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Vector `p`-norm, computed with a max-scaling to avoid overflow.
pub fn vec_pnorm(x: &[Complex64], p: f64) -> f64 {
    let big = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return big;
    }
    let s: f64 = x.iter().map(|z| (z.norm() / big).powf(p)).sum();
    big * s.powf(1.0 / p)
}

/// The duality map `y ↦ |y|^{p-1} sgn(y) / ‖y‖_p^{p-1}`, whose image has unit
/// `q`-norm and pairs with `y` to `‖y‖_p`.
pub fn dual_vector(y: &[Complex64], p: f64) -> Vec<Complex64> {
    let norm = vec_pnorm(y, p);
    if norm == 0.0 {
        return vec![Complex64::new(0.0, 0.0); y.len()];
    }
    y.iter()
        .map(|z| {
            let a = z.norm();
            if a == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (z / a) * (a / norm).powf(p - 1.0)
            }
        })
        .collect()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PNormOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Also stop once the estimate moved by less than this (relative) over
    /// the last `PLATEAU_WINDOW` iterations.
    pub plateau_tol: f64,
    pub seed: u64,
}

const PLATEAU_WINDOW: usize = 10;
const SAME_PEAK: f64 = 1e-4;

impl Default for PNormOptions {
    fn default() -> Self {
        PNormOptions {
            restarts: 20,
            max_iter: 500,
            tol: 1e-12,
            plateau_tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PNormEstimate {
    /// `‖Ax‖_p / ‖x‖_p` for the returned maximizer.
    pub value: f64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    /// The best restart hit the iteration cap without meeting the stopping test.
    pub stagnated: bool,
    /// Estimate after each iteration of the best restart.
    pub trace: Vec<f64>,
}

/// Lower estimate of `‖A‖_{p→p}` by the nonlinear power method, best over
/// restarts. The first restart starts from the all-ones vector, the others
/// from seeded Gaussian vectors.
pub fn pnorm_estimate(op: &dyn LinearOp, p: f64, opts: &PNormOptions) -> Result<PNormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("power method needs 1 < p < inf, got {p}")));
    }
    if op.cols() == 0 {
        return Err(Error::invalid("operator has no columns"));
    }
    let q = p / (p - 1.0);
    let restarts = opts.restarts.max(1);
    // Best value so far, as bits: nonnegative floats order like their bits.
    let leader = AtomicU64::new(0);
    let runs: Vec<PNormEstimate> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<Complex64> = if r == 0 {
                vec![Complex64::new(1.0, 0.0); op.cols()]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64 * 0x9e37_79b9));
                (0..op.cols())
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(v, 0.0)
                    })
                    .collect()
            };
            let run = boyd_run(op, p, q, start, opts, &leader);
            leader.fetch_max(run.value.to_bits(), Ordering::Relaxed);
            run
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(_, r)| r)
        .unwrap();
    Ok(best)
}

fn boyd_run(
    op: &dyn LinearOp,
    p: f64,
    q: f64,
    start: Vec<Complex64>,
    opts: &PNormOptions,
    leader: &AtomicU64,
) -> PNormEstimate {
    let n0 = vec_pnorm(&start, p);
    let mut x: Vec<Complex64> = start.iter().map(|z| z / n0).collect();
    let mut best = 0.0;
    let mut best_x = x.clone();
    let mut trace = Vec::new();
    let mut stagnated = true;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let y = op.apply(&x);
        let est = vec_pnorm(&y, p);
        trace.push(est);
        if est > best {
            best = est;
            best_x.clone_from(&x);
        }
        if est == 0.0 {
            stagnated = false;
            break;
        }
        if it >= PLATEAU_WINDOW {
            let before = trace[it - PLATEAU_WINDOW];
            // Gains shrink as the iteration converges, so extending the last
            // window's gain linearly over the remaining budget overestimates
            // what this restart can still reach. Give up once even that stays
            // below the best finished restart.
            // A restart just under the leader is climbing to the same maximum.
            let lead = f64::from_bits(leader.load(Ordering::Relaxed));
            let reach = est + (est - before).max(0.0) * (opts.max_iter - it) as f64 / PLATEAU_WINDOW as f64;
            if reach < lead || (est < lead && lead - est <= SAME_PEAK * lead) {
                stagnated = false;
                break;
            }
            if (est - before).abs() <= opts.plateau_tol * est {
                stagnated = false;
                break;
            }
        }
        let z = op.apply_adjoint(&dual_vector(&y, p));
        let zq = vec_pnorm(&z, q);
        let pairing = inner(&z, &x).re;
        if zq <= pairing * (1.0 + opts.tol) {
            stagnated = false;
            break;
        }
        let next = dual_vector(&z, q);
        // `dual_vector(z, q)` has unit p-norm by construction.
        x = next;
    }
    PNormEstimate {
        value: best,
        vector: best_x,
        iterations,
        stagnated,
        trace,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Ritz value after each convergence check.
    pub trace: Vec<f64>,
}

/// Largest singular value by Lanczos on `A^*A` with full reorthogonalization.
pub fn largest_singular_value(op: &dyn LinearOp, max_iter: usize, tol: f64, seed: u64) -> Result<SpectralEstimate> {
    let n = op.cols();
    if n == 0 {
        return Err(Error::invalid("operator has no columns"));
    }
    let k_max = max_iter.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(1.0 + 0.1 * g, 0.0)
        })
        .collect();
    let nv = inner(&v, &v).re.sqrt();
    v.iter_mut().for_each(|z| *z /= nv);
    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut last = 0.0;
    for j in 0..k_max {
        let vj = &basis[j];
        let mut w = op.apply_adjoint(&op.apply(vj));
        let alpha = inner(vj, &w).re;
        alphas.push(alpha);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let beta = inner(&w, &w).re.sqrt();
        let check = (j + 1) % 5 == 0 || j + 1 == k_max || beta <= 1e-14 * alpha.abs().max(1e-300);
        if check {
            let top = top_ritz(&alphas, &betas);
            trace.push(top.max(0.0).sqrt());
            if (top - last).abs() <= tol * top.abs() || beta <= 1e-14 * alpha.abs().max(1e-300) || j + 1 == k_max {
                return Ok(SpectralEstimate {
                    value: top.max(0.0).sqrt(),
                    iterations: j + 1,
                    trace,
                });
            }
            last = top;
        }
        betas.push(beta);
        basis.push(w.into_iter().map(|z| z / beta).collect());
    }
    unreachable!("loop returns on its last iteration")
}

fn top_ritz(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    nalgebra::SymmetricEigen::new(t).eigenvalues.max()
}

/// Induced norm of a dense matrix: exact for `p ∈ {1, 2, ∞}`, a power-method
/// lower estimate otherwise. The flag is true when the value is exact.
pub fn induced_norm(m: &DMatrix<Complex64>, p: f64, opts: &PNormOptions) -> Result<(f64, bool)> {
    if p == 1.0 {
        Ok((norm_1(m), true))
    } else if p == 2.0 {
        Ok((spectral_norm(m), true))
    } else if p.is_infinite() && p > 0.0 {
        Ok((norm_inf(m), true))
    } else {
        pnorm_estimate(&DenseOp(m), p, opts).map(|e| (e.value, false))
    }
}
