//! The causal convolution `u ↦ ∫_0^t e^{-ω(t-s)} S(t-s) u(s) ds` on a finite
//! horizon: midpoint discretization, its operator norm on discrete `L^p`,
//! the resolvent supremum bound for `p = 2`, and the `p`/`q` duality probe.
//!
//! The discretized operator is block Toeplitz and lower triangular, so only
//! one block per lag is stored and products go through FFT convolution.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::bounds::fmt_sig;
use crate::domain::{conjugate_exponent, SemigroupSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, Adjoint, LinearOp, PNormOptions};

/// Default cap on the memory held by one discretization.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 31;

/// Up to this many time nodes products are summed directly.
const DIRECT_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct KOptions {
    /// Bytes.
    pub memory_budget: usize,
    pub pnorm: PNormOptions,
    pub lanczos_iter: usize,
    pub lanczos_tol: f64,
}

impl Default for KOptions {
    fn default() -> Self {
        KOptions {
            memory_budget: DEFAULT_MEMORY_BUDGET,
            pnorm: PNormOptions::default(),
            lanczos_iter: 400,
            lanczos_tol: 1e-13,
        }
    }
}

pub struct VolterraDiscretization {
    system: SemigroupSystem,
    omega: f64,
    horizon: f64,
    nodes: usize,
    /// `K_k = h e^{(k+½)h(A-ω)}`, the block at time lag `k`.
    lags: Vec<DMatrix<Complex64>>,
    fft: Option<Convolver>,
}

/// FFT data for the lag sequences of every block entry.
struct Convolver {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Spectrum of `(K_k)_{rc}` over `k`, indexed `r·d + c`.
    spectra: Vec<Vec<Complex64>>,
    /// Spectrum of `conj((K_k)_{rc})`.
    conj_spectra: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for VolterraDiscretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VolterraDiscretization")
            .field("system", &self.system.label())
            .field("omega", &self.omega)
            .field("horizon", &self.horizon)
            .field("nodes", &self.nodes)
            .finish()
    }
}

pub fn discretize_volterra(sys: &SemigroupSystem, omega: f64, horizon: f64, nodes: usize) -> Result<VolterraDiscretization> {
    discretize_volterra_with(sys, omega, horizon, nodes, &KOptions::default())
}

pub fn discretize_volterra_with(
    sys: &SemigroupSystem,
    omega: f64,
    horizon: f64,
    nodes: usize,
    opts: &KOptions,
) -> Result<VolterraDiscretization> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if nodes == 0 {
        return Err(Error::invalid("need at least one time node"));
    }
    if !omega.is_finite() {
        return Err(Error::invalid("omega must be finite"));
    }
    let d = sys.dim();
    let fft_len = (2 * nodes).next_power_of_two();
    // Lag blocks plus two spectra per entry.
    let required = 16usize
        .saturating_mul(d * d)
        .saturating_mul(nodes.saturating_add(2 * fft_len));
    if required > opts.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: opts.memory_budget,
        });
    }
    let h = horizon / nodes as f64;
    let shifted = sys.generator() - DMatrix::<Complex64>::identity(d, d) * Complex64::new(omega, 0.0);
    let lags: Vec<DMatrix<Complex64>> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let lag = (k as f64 + 0.5) * h;
            (&shifted * Complex64::new(lag, 0.0)).exp() * Complex64::new(h, 0.0)
        })
        .collect();
    if lags.iter().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::NonFinite { at: horizon });
    }
    let fft = (nodes > DIRECT_LIMIT).then(|| Convolver::new(&lags, d, fft_len));
    Ok(VolterraDiscretization {
        system: sys.clone(),
        omega,
        horizon,
        nodes,
        lags,
        fft,
    })
}

impl Convolver {
    fn new(lags: &[DMatrix<Complex64>], d: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectra = Vec::with_capacity(d * d);
        let mut conj_spectra = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let mut seq = vec![Complex64::new(0.0, 0.0); len];
                for (k, m) in lags.iter().enumerate() {
                    seq[k] = m[(r, c)];
                }
                let mut conj: Vec<Complex64> = seq.iter().map(|z| z.conj()).collect();
                forward.process(&mut seq);
                forward.process(&mut conj);
                spectra.push(seq);
                conj_spectra.push(conj);
            }
        }
        Convolver {
            len,
            forward,
            inverse,
            spectra,
            conj_spectra,
        }
    }

    /// `y_i[r] = Σ_{j ≤ i} Σ_c S_{rc}(i - j) x_j[c]` for the stored spectra.
    fn convolve(&self, spectra: &[Vec<Complex64>], x: &[Complex64], n: usize, d: usize, transpose: bool) -> Vec<Complex64> {
        let inputs: Vec<Vec<Complex64>> = (0..d)
            .map(|c| {
                let mut seq = vec![Complex64::new(0.0, 0.0); self.len];
                for j in 0..n {
                    seq[j] = x[j * d + c];
                }
                self.forward.process(&mut seq);
                seq
            })
            .collect();
        let scale = 1.0 / self.len as f64;
        let mut y = vec![Complex64::new(0.0, 0.0); n * d];
        for r in 0..d {
            let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
            for (c, input) in inputs.iter().enumerate() {
                let spec = if transpose { &spectra[c * d + r] } else { &spectra[r * d + c] };
                for ((a, s), u) in acc.iter_mut().zip(spec).zip(input) {
                    *a += s * u;
                }
            }
            self.inverse.process(&mut acc);
            for i in 0..n {
                y[i * d + r] = acc[i] * scale;
            }
        }
        y
    }
}

impl VolterraDiscretization {
    pub fn system(&self) -> &SemigroupSystem {
        &self.system
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.nodes as f64
    }

    /// `K_k`.
    pub fn lag(&self, k: usize) -> &DMatrix<Complex64> {
        &self.lags[k]
    }

    /// Block `(i, j)`: `K_{i-j}` on and below the diagonal, zero above.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<Complex64> {
        if i >= j {
            self.lags[i - j].clone()
        } else {
            DMatrix::zeros(self.dim(), self.dim())
        }
    }

    /// The full `(n·d) × (n·d)` matrix, subject to the memory budget.
    pub fn dense(&self, budget: usize) -> Result<DMatrix<Complex64>> {
        let size = self.nodes * self.dim();
        let required = 16usize.saturating_mul(size).saturating_mul(size);
        if required > budget {
            return Err(Error::MemoryBudget { required, budget });
        }
        let d = self.dim();
        let mut m = DMatrix::zeros(size, size);
        for i in 0..self.nodes {
            for j in 0..=i {
                m.view_mut((i * d, j * d), (d, d)).copy_from(&self.lags[i - j]);
            }
        }
        Ok(m)
    }

    fn apply_direct(&self, x: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let (n, d) = (self.nodes, self.dim());
        let mut y = vec![Complex64::new(0.0, 0.0); n * d];
        for i in 0..n {
            for j in 0..n {
                let (out, inp, lag) = if adjoint {
                    // x_j = Σ_{i ≥ j} K_{i-j}^H y_i
                    if i < j {
                        continue;
                    }
                    (j, i, i - j)
                } else {
                    if j > i {
                        continue;
                    }
                    (i, j, i - j)
                };
                let k = &self.lags[lag];
                for r in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..d {
                        acc += if adjoint { k[(c, r)].conj() } else { k[(r, c)] } * x[inp * d + c];
                    }
                    y[out * d + r] += acc;
                }
            }
        }
        y
    }
}

impl LinearOp for VolterraDiscretization {
    fn rows(&self) -> usize {
        self.nodes * self.dim()
    }

    fn cols(&self) -> usize {
        self.nodes * self.dim()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match &self.fft {
            Some(conv) => conv.convolve(&conv.spectra, x, self.nodes, self.dim(), false),
            None => self.apply_direct(x, false),
        }
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let Some(conv) = &self.fft else {
            return self.apply_direct(y, true);
        };
        // Correlation as a convolution of the time-reversed input.
        let (n, d) = (self.nodes, self.dim());
        let mut reversed = vec![Complex64::new(0.0, 0.0); n * d];
        for i in 0..n {
            reversed[(n - 1 - i) * d..(n - i) * d].copy_from_slice(&y[i * d..(i + 1) * d]);
        }
        let z = conv.convolve(&conv.conj_spectra, &reversed, n, d, true);
        let mut out = vec![Complex64::new(0.0, 0.0); n * d];
        for i in 0..n {
            out[(n - 1 - i) * d..(n - i) * d].copy_from_slice(&z[i * d..(i + 1) * d]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateKind {
    /// Power-method value; approaches the norm from below.
    LowerEstimate,
    /// Largest singular value of the discretized operator.
    CertifiedP2,
}

impl EstimateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateKind::LowerEstimate => "lower-estimate",
            EstimateKind::CertifiedP2 => "certified-p2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    /// The power method hit its iteration cap.
    pub stagnated: bool,
    pub iterations: usize,
    /// Estimate after each iteration (power method) or Ritz check (Lanczos).
    pub trace: Vec<f64>,
}

/// Discrete `‖·‖_{p→p}` of an operator: Lanczos for `p = 2`, the nonlinear
/// power method otherwise.
pub fn operator_norm(op: &dyn LinearOp, p: f64, opts: &KOptions) -> Result<KEstimate> {
    if p == 2.0 {
        let est = linalg::largest_singular_value(op, opts.lanczos_iter, opts.lanczos_tol, opts.pnorm.seed)?;
        return Ok(KEstimate {
            value: est.value,
            kind: EstimateKind::CertifiedP2,
            stagnated: false,
            iterations: est.iterations,
            trace: est.trace,
        });
    }
    let est = linalg::pnorm_estimate(op, p, &opts.pnorm)?;
    Ok(KEstimate {
        value: est.value,
        kind: EstimateKind::LowerEstimate,
        stagnated: est.stagnated,
        iterations: est.iterations,
        trace: est.trace,
    })
}

/// `K_{ω,p}` on `[0, T]` with `n` nodes. The discrete norm
/// `(Σ h ‖u_i‖^p)^{1/p}` carries the same weight on both sides, so the
/// operator norm is the induced `p`-norm of the stacked matrix (Euclidean
/// on `X` for `p = 2`, the vector `p`-norm otherwise).
pub fn estimate_k(sys: &SemigroupSystem, omega: f64, p: f64, horizon: f64, nodes: usize) -> Result<KEstimate> {
    estimate_k_with(sys, omega, p, horizon, nodes, &KOptions::default())
}

pub fn estimate_k_with(
    sys: &SemigroupSystem,
    omega: f64,
    p: f64,
    horizon: f64,
    nodes: usize,
    opts: &KOptions,
) -> Result<KEstimate> {
    conjugate_exponent(p)?;
    let disc = discretize_volterra_with(sys, omega, horizon, nodes, opts)?;
    operator_norm(&disc, p, opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualityProbe {
    /// `K_p` of the operator.
    pub primal: KEstimate,
    /// `K_q` of its conjugate transpose.
    pub dual: KEstimate,
}

impl DualityProbe {
    pub fn gap(&self) -> f64 {
        (self.primal.value - self.dual.value).abs()
    }
}

/// `|K_p(M) - K_q(M^H)|` for the discretized operator `M`.
pub fn duality_gap(sys: &SemigroupSystem, omega: f64, p: f64, horizon: f64, nodes: usize) -> Result<f64> {
    duality_probe(sys, omega, p, horizon, nodes, &KOptions::default()).map(|d| d.gap())
}

pub fn duality_probe(
    sys: &SemigroupSystem,
    omega: f64,
    p: f64,
    horizon: f64,
    nodes: usize,
    opts: &KOptions,
) -> Result<DualityProbe> {
    let q = conjugate_exponent(p)?;
    let disc = discretize_volterra_with(sys, omega, horizon, nodes, opts)?;
    let primal = operator_norm(&disc, p, opts)?;
    let dual = operator_norm(&Adjoint(&disc), q, opts)?;
    Ok(DualityProbe { primal, dual })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventSup {
    pub value: f64,
    /// Frequency where the maximum is attained.
    pub argmax: f64,
    pub evaluations: usize,
    /// `1/(S - ‖A - ω‖)` at the largest sampled `|s| = S` is below the
    /// maximum, so no larger value lies beyond the grid.
    pub tail_certified: bool,
}

/// `‖(ω + is - A)^{-1}‖_2`.
pub fn resolvent_norm(sys: &SemigroupSystem, omega: f64, s: f64) -> Result<f64> {
    let d = sys.dim();
    let m = DMatrix::<Complex64>::identity(d, d) * Complex64::new(omega, s) - sys.generator();
    let scale = 1.0 + linalg::spectral_norm(sys.generator()) + omega.abs() + s.abs();
    let sigma = linalg::smallest_singular_value(&m);
    if !(sigma > 1e-14 * scale) {
        return Err(Error::SingularResolvent { s });
    }
    Ok(1.0 / sigma)
}

/// A symmetric frequency grid for [`resolvent_sup`]: dense near zero,
/// geometric outwards, plus the imaginary parts of the eigenvalues.
pub fn default_frequency_grid(sys: &SemigroupSystem, omega: f64) -> Vec<f64> {
    let norm = linalg::spectral_norm(sys.generator()) + omega.abs();
    let reach = 100.0 * (1.0 + norm);
    let mut grid = vec![0.0];
    for i in 0..=400 {
        let s = 1e-3 * (reach / 1e-3).powf(i as f64 / 400.0);
        grid.push(s);
        grid.push(-s);
    }
    for i in 1..=200 {
        let s = (1.0 + norm) * i as f64 / 50.0;
        grid.push(s);
        grid.push(-s);
    }
    for e in sys.eigenvalues() {
        grid.push(e.im);
    }
    grid
}

/// Maximum of the resolvent norm over `s_grid`, refined by golden-section
/// search around every sampled local maximum.
pub fn resolvent_sup(sys: &SemigroupSystem, omega: f64, s_grid: &[f64]) -> Result<ResolventSup> {
    let mut grid: Vec<f64> = s_grid.iter().copied().filter(|s| s.is_finite()).collect();
    if grid.is_empty() {
        return Err(Error::invalid("frequency grid is empty"));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid
        .par_iter()
        .map(|&s| resolvent_norm(sys, omega, s))
        .collect::<Result<Vec<f64>>>()?;
    let mut evaluations = grid.len();
    let mut best = (values[0], grid[0]);
    for (v, s) in values.iter().zip(&grid) {
        if *v > best.0 {
            best = (*v, *s);
        }
    }
    let n = grid.len();
    let peaks: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || values[i] >= values[i - 1]) && (i + 1 == n || values[i] >= values[i + 1]))
        .collect();
    let refined = peaks
        .par_iter()
        .map(|&i| {
            let lo = if i == 0 { grid[0] } else { grid[i - 1] };
            let hi = if i + 1 == n { grid[n - 1] } else { grid[i + 1] };
            golden_max(|s| resolvent_norm(sys, omega, s), lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    for (v, s, evals) in refined {
        evaluations += evals;
        if v > best.0 {
            best = (v, s);
        }
    }
    let reach = grid[0].abs().max(grid[n - 1].abs());
    let norm = linalg::spectral_norm(sys.generator()) + omega.abs();
    let tail_certified = reach > norm && 1.0 / (reach - norm) <= best.0;
    Ok(ResolventSup {
        value: best.0,
        argmax: best.1,
        evaluations,
        tail_certified,
    })
}

/// Golden-section maximization on `[lo, hi]`; returns `(value, arg, evals)`.
fn golden_max(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64, usize)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut evals = 2;
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    while b - a > tol && evals < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    let mut best = if fc >= fd { (fc, c) } else { (fd, d) };
    for s in [lo, hi] {
        let v = f(s)?;
        evals += 1;
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok((best.0, best.1, evals))
}

/// Writes the dense discretized matrix as `row,col,re,im` lines (nonzero
/// entries only).
pub fn write_matrix_csv(disc: &VolterraDiscretization, budget: usize, mut out: impl Write) -> Result<()> {
    let m = disc.dense(budget)?;
    let io = |e: std::io::Error| Error::invalid(format!("writing matrix CSV: {e}"));
    writeln!(out, "row,col,re,im").map_err(io)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(out, "{i},{j},{},{}", fmt_sig(z.re), fmt_sig(z.im)).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Writes the iteration trace of an estimate as `iteration,value` lines.
pub fn write_trace_csv(est: &KEstimate, mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::invalid(format!("writing trace CSV: {e}"));
    writeln!(out, "iteration,value,kind").map_err(io)?;
    for (i, v) in est.trace.iter().enumerate() {
        writeln!(out, "{},{},{}", i + 1, fmt_sig(*v), est.kind.as_str()).map_err(io)?;
    }
    Ok(())
}
