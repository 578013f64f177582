//! Composite Gauss–Legendre quadrature with adaptive bisection.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Points of the base rule.
const ORDER: usize = 15;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_BUDGET: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    /// Absolute tolerance on the whole interval.
    pub tol: f64,
    /// Maximum number of subintervals.
    pub budget: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: DEFAULT_TOL,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn base_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn apply_rule(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let (x, w) = base_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let s = mid + half * xi;
        let v = f(s);
        if !v.is_finite() {
            return Err(Error::NonFinite { at: s });
        }
        acc += wi * v;
    }
    Ok(acc * half)
}

/// `∫_a^b f` with the default options.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    integrate_with(f, a, b, QuadOptions::default())
}

/// Adaptive bisection: an interval is accepted when the two-half estimate
/// agrees with the whole-interval estimate to its share of the tolerance.
pub fn integrate_with(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if b < a {
        return integrate_with(f, b, a, opts).map(|v| -v);
    }
    let total = b - a;
    let mut stack = vec![(a, b, apply_rule(&mut f, a, b)?)];
    let mut intervals = 1usize;
    let mut sum = 0.0;
    let mut compensation = 0.0;
    let mut err_total = 0.0;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = apply_rule(&mut f, lo, mid)?;
        let right = apply_rule(&mut f, mid, hi)?;
        let refined = left + right;
        let err = (refined - whole).abs();
        let share = opts.tol * (hi - lo) / total;
        if err <= share || mid <= lo || mid >= hi {
            // Kahan summation keeps the accepted pieces from drifting.
            let y = refined - compensation;
            let t = sum + y;
            compensation = (t - sum) - y;
            sum = t;
            err_total += err;
            continue;
        }
        intervals += 1;
        if intervals > opts.budget {
            return Err(Error::QuadratureBudget {
                tol: opts.tol,
                budget: opts.budget,
                estimate: err_total + err,
            });
        }
        stack.push((mid, hi, right));
        stack.push((lo, mid, left));
    }
    Ok(sum)
}

/// `∫` over consecutive breakpoints, so kinks at the breakpoints do not slow
/// the adaptive refinement.
pub fn integrate_pieces(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    let n = breaks.len().saturating_sub(1).max(1);
    let per = QuadOptions {
        tol: opts.tol / n as f64,
        budget: opts.budget,
    };
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        acc += integrate_with(&mut f, w[0], w[1], per)?;
    }
    Ok(acc)
}
