//! Exponentially weighted `L^p` norms on intervals and the Hölder-equality
//! optimizers: the cutoff slope `χ'`, the competitor `u` and the competitor
//! `v` built from a profile `θ`.

use crate::domain::{conjugate_exponent, trapezoid_weights, GridFunction, WeightSpec};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::quad::{self, QuadOptions};

/// Default number of nodes of returned grid functions.
pub const DEFAULT_NODES: usize = 1024;

/// Probe points used to locate the integrand maximum before rescaling.
const PROBES: usize = 257;

/// The function whose weighted norm is taken.
#[derive(Clone, Copy, Debug)]
pub enum Integrand<'a> {
    Grid(&'a GridFunction),
    /// `f = 1/m`.
    InverseWeight(&'a WeightSpec),
}

impl Integrand<'_> {
    fn ln_abs(&self, s: f64) -> Result<f64> {
        match self {
            Integrand::Grid(g) => Ok(g.eval(s)?.abs().ln()),
            Integrand::InverseWeight(m) => Ok(-m.ln_value(s)?),
        }
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut b = vec![lo];
        if let Integrand::Grid(g) = self {
            b.extend(g.grid().iter().copied().filter(|&t| t > lo && t < hi));
        }
        b.push(hi);
        b
    }
}

/// `ln ∫_lo^hi e^{g(s)} ds`, integrating `e^{g - max g}` so that large
/// exponents never overflow.
pub fn ln_integral_exp(
    g: impl Fn(f64) -> Result<f64>,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    let (lo, hi) = (breaks[0], *breaks.last().unwrap());
    let mut peak = f64::NEG_INFINITY;
    let probe = |s: f64, peak: &mut f64| -> Result<()> {
        let v = g(s)?;
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite { at: s });
        }
        *peak = peak.max(v);
        Ok(())
    };
    for i in 0..PROBES {
        probe(lo + (hi - lo) * i as f64 / (PROBES - 1) as f64, &mut peak)?;
    }
    for &b in breaks {
        probe(b, &mut peak)?;
    }
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut failure = None;
    let integral = quad::integrate_pieces(
        |s| match g(s) {
            Ok(v) if !v.is_nan() => (v - peak).exp(),
            Ok(_) => f64::NAN,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        breaks,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let integral = integral?;
    Ok(peak + integral.ln())
}

/// `‖f‖_{e^{-ω·}L^p(α,β)} = (∫_α^β |e^{ωs} f(s)|^p ds)^{1/p}`.
pub fn weighted_norm(f: Integrand<'_>, omega: f64, p: f64, interval: (f64, f64)) -> Result<f64> {
    weighted_norm_with(f, omega, p, interval, QuadOptions::default())
}

pub fn weighted_norm_with(
    f: Integrand<'_>,
    omega: f64,
    p: f64,
    interval: (f64, f64),
    opts: QuadOptions,
) -> Result<f64> {
    Ok(ln_weighted_norm(f, omega, p, interval, opts)?.exp())
}

/// Natural log of [`weighted_norm`].
pub fn ln_weighted_norm(
    f: Integrand<'_>,
    omega: f64,
    p: f64,
    interval: (f64, f64),
    opts: QuadOptions,
) -> Result<f64> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::invalid(format!("interval ({lo}, {hi}) is empty")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("norm exponent must satisfy p >= 1, got {p}")));
    }
    let breaks = f.breakpoints(lo, hi);
    let ln_int = ln_integral_exp(|s| Ok(p * (omega * s + f.ln_abs(s)?)), &breaks, opts)?;
    Ok(ln_int / p)
}

/// The Hölder-optimal cutoff on `(0, a)`: `|χ'| ∝ (e^{ω·}/m)^q`, normalized to
/// unit mass, so that `‖χ' m‖_{e^{ω·}L^p} · ‖1/m‖_{e^{-ω·}L^q(0,a)} = 1`.
#[derive(Clone, Debug)]
pub struct Cutoff {
    weight: WeightSpec,
    omega: f64,
    p: f64,
    q: f64,
    a: f64,
    /// `ln ∫_0^a (e^{ωs}/m)^q ds`.
    ln_mass: f64,
    slope: GridFunction,
}

impl Cutoff {
    /// `|χ'(s)|`.
    pub fn density(&self, s: f64) -> Result<f64> {
        Ok((self.q * (self.omega * s - self.weight.ln_value(s)?) - self.ln_mass).exp())
    }

    /// Samples of `χ' ≤ 0` on the returned grid.
    pub fn slope(&self) -> &GridFunction {
        &self.slope
    }

    pub fn support(&self) -> f64 {
        self.a
    }

    /// `χ(s) = 1 - ∫_0^s |χ'|`; equals 1 at 0 and 0 from `a` on.
    pub fn value(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(1.0);
        }
        if s >= self.a {
            return Ok(0.0);
        }
        let used = quad::integrate(|x| self.density(x).unwrap_or(f64::NAN), 0.0, s)?;
        Ok((1.0 - used).max(0.0))
    }

    /// `‖1/m‖_{e^{-ω·}L^q(0,a)}`.
    pub fn dual_norm(&self) -> f64 {
        (self.ln_mass / self.q).exp()
    }

    /// `‖χ' m‖_{e^{ω·}L^p(0,a)}`, i.e. the `L^p` norm of `|χ'| m e^{-ω·}`,
    /// integrated from the closed-form density.
    pub fn weighted_slope_norm(&self) -> Result<f64> {
        let ln = ln_integral_exp(
            |s| {
                let ln_density = self.q * (self.omega * s - self.weight.ln_value(s)?) - self.ln_mass;
                Ok(self.p * (ln_density + self.weight.ln_value(s)? - self.omega * s))
            },
            &[0.0, self.a],
            QuadOptions::default(),
        )?;
        Ok((ln / self.p).exp())
    }

    /// The Hölder pair `(|χ'| m e^{-ω·}, e^{ω·}/m)` sampled on the slope grid.
    pub fn holder_pair(&self) -> Result<(GridFunction, GridFunction)> {
        let grid = self.slope.grid().to_vec();
        let f = GridFunction::try_from_fn(grid.clone(), |s| {
            Ok(self.density(s)? * (self.weight.ln_value(s)? - self.omega * s).exp())
        })?;
        let g = GridFunction::try_from_fn(grid, |s| Ok((self.omega * s - self.weight.ln_value(s)?).exp()))?;
        Ok((f, g))
    }
}

pub fn optimal_cutoff(m: &WeightSpec, omega: f64, p: f64, a: f64) -> Result<Cutoff> {
    optimal_cutoff_with(m, omega, p, a, DEFAULT_NODES)
}

pub fn optimal_cutoff_with(m: &WeightSpec, omega: f64, p: f64, a: f64, nodes: usize) -> Result<Cutoff> {
    let q = conjugate_exponent(p)?;
    if !(a > 0.0) {
        return Err(Error::invalid(format!("cutoff support a must be positive, got {a}")));
    }
    check_in_domain(m, a)?;
    let ln_mass = q * ln_weighted_norm(Integrand::InverseWeight(m), omega, q, (0.0, a), QuadOptions::default())?;
    let mut cutoff = Cutoff {
        weight: m.clone(),
        omega,
        p,
        q,
        a,
        ln_mass,
        slope: GridFunction::from_fn(0.0, a, 2, |_| 0.0)?,
    };
    let grid = GridFunction::uniform_grid(0.0, a, nodes)?;
    cutoff.slope = GridFunction::try_from_fn(grid, |s| Ok(-cutoff.density(s)?))?;
    Ok(cutoff)
}

fn check_in_domain(m: &WeightSpec, end: f64) -> Result<()> {
    let (lo, hi) = m.domain();
    if lo > 0.0 || end > hi {
        return Err(Error::OutsideDomain { t: end, lo, hi });
    }
    Ok(())
}

/// Hölder gap `‖f‖_p ‖g‖_q - ∫ f g` for nonnegative samples on a common
/// grid, with trapezoid weights. Vanishes exactly when `f^p ∝ g^q` at the
/// nodes.
pub fn holder_defect(f: &GridFunction, g: &GridFunction, p: f64) -> Result<f64> {
    Ok(holder_terms(f, g, p)?.defect())
}

/// [`holder_defect`] divided by `‖f‖_p ‖g‖_q`.
pub fn holder_defect_relative(f: &GridFunction, g: &GridFunction, p: f64) -> Result<f64> {
    let t = holder_terms(f, g, p)?;
    Ok(if t.product > 0.0 { t.defect() / t.product } else { 0.0 })
}

struct HolderTerms {
    product: f64,
    pairing: f64,
}

impl HolderTerms {
    fn defect(&self) -> f64 {
        (self.product - self.pairing).max(0.0)
    }
}

fn holder_terms(f: &GridFunction, g: &GridFunction, p: f64) -> Result<HolderTerms> {
    let q = conjugate_exponent(p)?;
    if !f.same_grid(g) {
        return Err(Error::invalid("holder_defect needs f and g on the same grid"));
    }
    if f.values().iter().chain(g.values()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("holder_defect needs finite nonnegative samples"));
    }
    let w = f.trapezoid_weights();
    let fmax = f.values().iter().copied().fold(0.0, f64::max);
    let gmax = g.values().iter().copied().fold(0.0, f64::max);
    if fmax == 0.0 || gmax == 0.0 {
        return Ok(HolderTerms { product: 0.0, pairing: 0.0 });
    }
    let mut fp = 0.0;
    let mut gq = 0.0;
    let mut fg = 0.0;
    for ((wi, fi), gi) in w.iter().zip(f.values()).zip(g.values()) {
        let (fs, gs) = (fi / fmax, gi / gmax);
        fp += wi * fs.powf(p);
        gq += wi * gs.powf(q);
        fg += wi * fs * gs;
    }
    let scale = fmax * gmax;
    Ok(HolderTerms {
        product: scale * fp.powf(1.0 / p) * gq.powf(1.0 / q),
        pairing: scale * fg,
    })
}

/// The competitor `u(s) = ∫_0^s m^{-q} / ∫_0^a m^{-q}` on `(0, a)`.
#[derive(Clone, Debug)]
pub struct OptimalU {
    pub u: GridFunction,
    /// Samples of `u' = m^{-q}/G`.
    pub slope: GridFunction,
    /// `∫_0^a |u'|^p m^p`, integrated from the closed-form slope.
    pub energy: f64,
    /// `(∫_0^a m^{-q})^{-p/q}`.
    pub bound: f64,
}

pub fn optimal_u(m: &WeightSpec, q: f64, a: f64) -> Result<OptimalU> {
    optimal_u_with(m, q, a, DEFAULT_NODES)
}

pub fn optimal_u_with(m: &WeightSpec, q: f64, a: f64, nodes: usize) -> Result<OptimalU> {
    let p = conjugate_exponent(q)?;
    if !(a > 0.0) {
        return Err(Error::invalid(format!("interval length a must be positive, got {a}")));
    }
    check_in_domain(m, a)?;
    let grid = GridFunction::uniform_grid(0.0, a, nodes)?;
    // Cumulative ∫ m^{-q}, scaled by the largest integrand sample.
    let ln_peak = grid
        .iter()
        .map(|&s| m.ln_value(s).map(|l| -q * l))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let density = |s: f64| -> f64 {
        m.ln_value(s).map(|l| (-q * l - ln_peak).exp()).unwrap_or(f64::NAN)
    };
    let per_cell = QuadOptions {
        tol: quad::DEFAULT_TOL / nodes as f64,
        budget: quad::DEFAULT_BUDGET,
    };
    let mut cumulative = vec![0.0; nodes];
    for i in 1..nodes {
        cumulative[i] = cumulative[i - 1] + quad::integrate_with(density, grid[i - 1], grid[i], per_cell)?;
    }
    let total = cumulative[nodes - 1];
    let values: Vec<f64> = cumulative.iter().map(|c| c / total).collect();
    let ln_total = total.ln() + ln_peak;
    let slope = GridFunction::try_from_fn(grid.clone(), |s| Ok((-q * m.ln_value(s)? - ln_total).exp()))?;
    let ln_energy = ln_integral_exp(
        |s| {
            let ln_m = m.ln_value(s)?;
            Ok(p * (-q * ln_m - ln_total) + p * ln_m)
        },
        &[0.0, a],
        QuadOptions::default(),
    )?;
    Ok(OptimalU {
        u: GridFunction::new(grid, values)?,
        slope,
        energy: ln_energy.exp(),
        bound: (-p / q * ln_total).exp(),
    })
}

/// The competitor `v = w/w(b)` where `w' = (w^q + h^p m^{-pq})^{1/q}`,
/// `w(0) = 0` and `h = (θ^p - |θ'|^p)^{1/p}`.
///
/// With `c = 1/w(b)` the output satisfies
/// `m^q (|v'|^q - v^q) = c^q h^p / m^p` at every node.
#[derive(Clone, Debug)]
pub struct OptimalV {
    pub v: GridFunction,
    pub slope: GridFunction,
    pub c: f64,
    /// Samples of `h^p = (θ^p - |θ'|^p)_+`.
    pub h_pow: GridFunction,
    p: f64,
    q: f64,
}

impl OptimalV {
    /// `K^p(b, θ, v)`: the ratio whose infimum over `v` is
    /// `(∫_0^b h^p m^{-p})^{-1/p}`, evaluated with trapezoid weights.
    pub fn kinf_ratio(&self, m: &WeightSpec) -> Result<f64> {
        let grid = self.v.grid();
        let w = trapezoid_weights(grid);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.len() {
            let gap = (self.slope.values()[i].abs().powf(self.q) - self.v.values()[i].powf(self.q)).max(0.0);
            let mq = (self.q * m.ln_value(grid[i])?).exp();
            num += w[i] * gap * mq;
            den += w[i] * self.h_pow.values()[i].powf(1.0 / self.p) * gap.powf(1.0 / self.q);
        }
        if den <= 0.0 {
            return Err(Error::ZeroDenominator("K^p(b, theta, v) denominator is zero".into()));
        }
        Ok(num.powf(1.0 / self.q) / den)
    }

    /// `(∫_0^b h^p m^{-p})^{-1/p}` with the same trapezoid weights.
    pub fn kinf_closed_form(&self, m: &WeightSpec) -> Result<f64> {
        let grid = self.v.grid();
        let w = trapezoid_weights(grid);
        let mut acc = 0.0;
        for i in 0..grid.len() {
            acc += w[i] * self.h_pow.values()[i] * (-self.p * m.ln_value(grid[i])?).exp();
        }
        Ok(acc.powf(-1.0 / self.p))
    }

    /// Largest relative residual of `m^q(|v'|^q - v^q) = c^q h^p / m^p` over
    /// nodes where the right side is not negligible.
    pub fn equality_residual(&self, m: &WeightSpec) -> Result<f64> {
        let grid = self.v.grid();
        let mut scale: f64 = 0.0;
        let mut rows = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let ln_m = m.ln_value(grid[i])?;
            let lhs = (self.q * ln_m).exp()
                * (self.slope.values()[i].abs().powf(self.q) - self.v.values()[i].powf(self.q));
            let rhs = self.c.powf(self.q) * self.h_pow.values()[i] * (-self.p * ln_m).exp();
            scale = scale.max(rhs.abs());
            rows.push((lhs, rhs));
        }
        Ok(rows
            .into_iter()
            .filter(|(_, r)| r.abs() > 1e-6 * scale)
            .map(|(l, r)| ((l - r) / r).abs())
            .fold(0.0, f64::max))
    }
}

/// Absolute floor under which `w(b)` counts as degenerate.
pub const DEGENERATE_W: f64 = 1e-12;

pub fn optimal_v(theta: &GridFunction, m: &WeightSpec, p: f64, b: f64) -> Result<OptimalV> {
    let q = conjugate_exponent(p)?;
    if !(b > 0.0) {
        return Err(Error::invalid(format!("interval length b must be positive, got {b}")));
    }
    check_in_domain(m, b)?;
    if theta.lo().abs() > 1e-12 * b.max(1.0) || (theta.hi() - b).abs() > 1e-12 * b.max(1.0) {
        return Err(Error::invalid(format!(
            "theta must be sampled on [0, {b}], got [{}, {}]",
            theta.lo(),
            theta.hi()
        )));
    }
    let n = theta.len();
    if (theta.values()[n - 1] - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("theta(b) must equal 1"));
    }
    let mut h_pow = Vec::with_capacity(n);
    for i in 0..n {
        let th = theta.values()[i];
        let dth = theta.node_derivative(i).abs();
        if !(th >= 0.0) || dth > th * (1.0 + 1e-6) + 1e-12 {
            return Err(Error::invalid(format!(
                "theta violates |theta'| <= theta at s = {} ({dth} > {th})",
                theta.grid()[i]
            )));
        }
        h_pow.push((th.powf(p) - dth.powf(p)).max(0.0));
    }
    if h_pow.iter().all(|h| *h == 0.0) {
        return Err(Error::Degenerate("theta^p - |theta'|^p vanishes identically".into()));
    }
    let h_pow = GridFunction::new(theta.grid().to_vec(), h_pow)?;
    let forcing = |s: f64| -> Result<f64> {
        let hp = h_pow.eval(s.clamp(h_pow.lo(), h_pow.hi()))?;
        Ok(hp * (-p * q * m.ln_value(s)?).exp())
    };
    let rhs = |s: f64, w: f64| -> Result<f64> { Ok((w.max(0.0).powf(q) + forcing(s)?).powf(1.0 / q)) };
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-14,
        max_step: b / 64.0,
        ..OdeOptions::default()
    };
    let (traj, _) = ode::integrate(rhs, 0.0, 0.0, b, opts, |_, _| false)?;
    let wb = *traj.values().last().unwrap();
    if !(wb > DEGENERATE_W) {
        return Err(Error::Degenerate(format!("w(b) = {wb} is below {DEGENERATE_W}")));
    }
    let grid = theta.grid().to_vec();
    let mut v = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for &s in &grid {
        let w = if s >= traj.end() { wb } else { traj.eval(s)?.max(0.0) };
        v.push(w / wb);
        dv.push(rhs(s, w)? / wb);
    }
    Ok(OptimalV {
        v: GridFunction::new(grid.clone(), v)?,
        slope: GridFunction::new(grid, dv)?,
        c: 1.0 / wb,
        h_pow,
        p,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, FRAC_PI_4, PI};

    fn unit() -> WeightSpec {
        WeightSpec::unit()
    }

    fn exp_weight() -> WeightSpec {
        WeightSpec::constant_exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn weighted_norm_examples() {
        let m = unit();
        let v = weighted_norm(Integrand::InverseWeight(&m), 0.0, 2.0, (0.0, 1.0)).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        let v = weighted_norm(Integrand::InverseWeight(&m), 0.0, 2.0, (0.0, FRAC_PI_4)).unwrap();
        assert_relative_eq!(v, FRAC_PI_4.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(v, 0.886_226_9, epsilon = 1e-7);
        let e = exp_weight();
        let v = weighted_norm(Integrand::InverseWeight(&e), 0.0, 2.0, (0.0, 1.0)).unwrap();
        assert_relative_eq!(v, ((1.0 - E.powi(-2)) / 2.0).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn weighted_norm_survives_huge_exponents() {
        // e^{ωs} with ω·β·p far past the f64 exponent range.
        let m = unit();
        let v = ln_weighted_norm(Integrand::InverseWeight(&m), 400.0, 3.0, (0.0, 2.0), QuadOptions::default()).unwrap();
        // ln((e^{1200*2... }) : ∫_0^2 e^{1200 s} ds ≈ e^{2400}/1200.
        let expected = (2400.0 - 1200f64.ln()) / 3.0;
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn weighted_norm_of_grid_function() {
        let f = GridFunction::from_fn(0.0, 1.0, 11, |s| 2.0 * s).unwrap();
        // Piecewise linear reproduces 2s exactly: ∫ 4 s^2 = 4/3.
        let v = weighted_norm(Integrand::Grid(&f), 0.0, 2.0, (0.0, 1.0)).unwrap();
        assert_relative_eq!(v, (4.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert!(weighted_norm(Integrand::Grid(&f), 0.0, 2.0, (0.0, 2.0)).is_err());
        assert!(weighted_norm(Integrand::Grid(&f), 0.0, 0.5, (0.0, 1.0)).is_err());
        assert!(weighted_norm(Integrand::Grid(&f), 0.0, 2.0, (1.0, 0.0)).is_err());
    }

    #[test]
    fn cutoff_examples() {
        for a in [1.0, 2.0] {
            let c = optimal_cutoff(&unit(), 0.0, 2.0, a).unwrap();
            for v in c.slope().values() {
                assert_relative_eq!(*v, -1.0 / a, max_relative = 1e-12);
            }
        }
        // m = e^t, p = q = 2: |χ'| ∝ e^{-2s}.
        let a = 1.5;
        let c = optimal_cutoff(&exp_weight(), 0.0, 2.0, a).unwrap();
        let norm = (1.0 - (-2.0 * a).exp()) / 2.0;
        for (&s, &v) in c.slope().grid().iter().zip(c.slope().values()) {
            assert_relative_eq!(-v, (-2.0 * s).exp() / norm, max_relative = 1e-11);
        }
    }

    #[test]
    fn cutoff_is_a_decreasing_unit_mass_profile() {
        let m = WeightSpec::constant_exponential(2.0, -0.3).unwrap();
        let c = optimal_cutoff(&m, 0.4, 3.0, 2.0).unwrap();
        let mass = quad::integrate(|s| c.density(s).unwrap(), 0.0, 2.0).unwrap();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
        assert_eq!(c.value(0.0).unwrap(), 1.0);
        assert_eq!(c.value(2.0).unwrap(), 0.0);
        let mut prev = 1.0;
        for i in 1..20 {
            let v = c.value(0.1 * i as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(c.slope().values().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn holder_defect_examples() {
        let one = GridFunction::from_fn(0.0, 1.0, 1024, |_| 1.0).unwrap();
        assert!(holder_defect(&one, &one, 2.0).unwrap() < 1e-15);
        let s = GridFunction::from_fn(0.0, 1.0, 1024, |s| s).unwrap();
        // Trapezoid error on ∫ s^2 is h^2/6 ≈ 1.6e-7.
        assert_relative_eq!(holder_defect(&s, &one, 2.0).unwrap(), 1.0 / 3f64.sqrt() - 0.5, epsilon = 1e-6);
        let other = GridFunction::from_fn(0.0, 2.0, 1024, |_| 1.0).unwrap();
        assert!(holder_defect(&s, &other, 2.0).is_err());
        let neg = GridFunction::from_fn(0.0, 1.0, 1024, |_| -1.0).unwrap();
        assert!(holder_defect(&neg, &one, 2.0).is_err());
    }

    #[test]
    fn cutoff_pair_attains_holder_equality() {
        let c = optimal_cutoff(&exp_weight(), 0.2, 3.0, 1.3).unwrap();
        let (f, g) = c.holder_pair().unwrap();
        assert!(holder_defect_relative(&f, &g, 3.0).unwrap() < 1e-12);
        assert_relative_eq!(c.weighted_slope_norm().unwrap() * c.dual_norm(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn optimal_u_examples() {
        let r = optimal_u(&unit(), 3.0, 1.0).unwrap();
        for (&s, &u) in r.u.grid().iter().zip(r.u.values()) {
            assert_relative_eq!(u, s, epsilon = 1e-12);
        }
        let r = optimal_u(&unit(), 2.0, FRAC_PI_4).unwrap();
        for (&s, &u) in r.u.grid().iter().zip(r.u.values()) {
            assert_relative_eq!(u, 4.0 * s / PI, epsilon = 1e-12);
        }
        assert_relative_eq!(r.energy, 4.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(r.bound, 4.0 / PI, max_relative = 1e-12);
        let r = optimal_u(&exp_weight(), 2.0, 1.0).unwrap();
        let den = 1.0 - (-2.0f64).exp();
        for (&s, &u) in r.u.grid().iter().zip(r.u.values()) {
            assert_relative_eq!(u, (1.0 - (-2.0 * s).exp()) / den, epsilon = 1e-12);
        }
        assert_relative_eq!(r.energy, r.bound, max_relative = 1e-10);
        assert_eq!(r.u.values()[0], 0.0);
        assert_eq!(*r.u.values().last().unwrap(), 1.0);
    }

    #[test]
    fn optimal_v_constant_theta_is_sinh() {
        let b = FRAC_PI_4;
        let theta = GridFunction::from_fn(0.0, b, DEFAULT_NODES, |_| 1.0).unwrap();
        let r = optimal_v(&theta, &unit(), 2.0, b).unwrap();
        assert_relative_eq!(r.c, 1.0 / b.sinh(), max_relative = 1e-9);
        for (&s, &v) in r.v.grid().iter().zip(r.v.values()) {
            assert_relative_eq!(v, s.sinh() / b.sinh(), epsilon = 1e-9);
        }
        assert!(r.equality_residual(&unit()).unwrap() < 1e-9);
    }

    #[test]
    fn optimal_v_cosine_profile_gives_cot() {
        let b = FRAC_PI_4;
        let theta = GridFunction::from_fn(0.0, b, 4096, |s| s.cos() / b.cos()).unwrap();
        let r = optimal_v(&theta, &unit(), 2.0, b).unwrap();
        let kinf = r.kinf_ratio(&unit()).unwrap();
        assert_relative_eq!(kinf, r.kinf_closed_form(&unit()).unwrap(), max_relative = 1e-6);
        assert_relative_eq!(kinf * kinf, 1.0 / b.tan(), max_relative = 1e-5);
    }

    #[test]
    fn optimal_v_error_paths() {
        let tiny = 1e-13;
        let theta = GridFunction::from_fn(0.0, tiny, 16, |_| 1.0).unwrap();
        assert!(matches!(optimal_v(&theta, &unit(), 2.0, tiny), Err(Error::Degenerate(_))));
        // |θ'| > θ.
        let steep = GridFunction::from_fn(0.0, 1.0, 64, |s| (3.0 * (s - 1.0)).exp()).unwrap();
        assert!(matches!(optimal_v(&steep, &unit(), 2.0, 1.0), Err(Error::InvalidInput(_))));
        // θ = e^{s-b}: θ^p - |θ'|^p ≡ 0.
        let flat = GridFunction::from_fn(0.0, 1.0, 64, |s| (s - 1.0).exp()).unwrap();
        assert!(optimal_v(&flat, &unit(), 2.0, 1.0).is_err());
    }
}
