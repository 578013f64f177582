//! Oracles shared by the integration tests.

#![allow(dead_code)]

/// Solves the tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / den;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `∫ (f'² - f²)` for the piecewise-linear interpolant of `f` on a uniform
/// grid with step `h`, integrated exactly.
pub fn quadratic_energy(f: &[f64], h: f64) -> f64 {
    f.windows(2)
        .map(|c| {
            let slope = (c[1] - c[0]) / h;
            slope * slope * h - h * (c[0] * c[0] + c[0] * c[1] + c[1] * c[1]) / 3.0
        })
        .sum()
}

/// Stationary point of the P1 energy `∫ u'² - u²` on `[0, len]` with `n`
/// cells. Fixed values at the ends where given, natural condition otherwise.
pub fn p1_stationary(len: f64, n: usize, left: Option<f64>, right: f64) -> Vec<f64> {
    let h = len / n as f64;
    // Stiffness minus mass: diagonal 2/h - 2h/3, off-diagonal -1/h - h/6.
    let off = -1.0 / h - h / 6.0;
    let mid = 2.0 / h - 2.0 * h / 3.0;
    let first = usize::from(left.is_some());
    let unknowns = n - first;
    let mut lower = vec![off; unknowns];
    let mut diag = vec![mid; unknowns];
    let upper = vec![off; unknowns];
    let mut rhs = vec![0.0; unknowns];
    match left {
        None => diag[0] = 1.0 / h - h / 3.0,
        Some(l) => rhs[0] -= off * l,
    }
    lower[0] = 0.0;
    rhs[unknowns - 1] -= off * right;
    let inner = thomas(&lower, &diag, &upper, &rhs);
    let mut out = Vec::with_capacity(n + 1);
    if let Some(l) = left {
        out.push(l);
    }
    out.extend(inner);
    out.push(right);
    out
}

/// `min over x ≥ 0, Σ w_i x_i = 1` of `max_i x_i / f_i`, found without the
/// closed form: mass is moved from the highest ratio to the lowest one until
/// all ratios agree to `tol`.
pub fn simplex_minimax(f: &[f64], w: &[f64], tol: f64) -> f64 {
    let n = f.len();
    let total: f64 = w.iter().sum();
    // Start from the uniform density.
    let mut x = vec![1.0 / total; n];
    let ratio = |x: &[f64], i: usize| x[i] / f[i];
    for _ in 0..5_000_000 {
        let (mut hi, mut lo) = (0, 0);
        for i in 1..n {
            if ratio(&x, i) > ratio(&x, hi) {
                hi = i;
            }
            if ratio(&x, i) < ratio(&x, lo) {
                lo = i;
            }
        }
        let (rh, rl) = (ratio(&x, hi), ratio(&x, lo));
        if rh - rl <= tol * rh {
            return rh;
        }
        // Equalize the two ratios at fixed mass w_hi x_hi + w_lo x_lo.
        let mass = w[hi] * x[hi] + w[lo] * x[lo];
        let r = mass / (w[hi] * f[hi] + w[lo] * f[lo]);
        x[hi] = r * f[hi];
        x[lo] = r * f[lo];
    }
    panic!("simplex search did not converge");
}
