//! Every bound on `‖S(t)‖` in one place, plus the `(a, b)` optimizer and the
//! report type shared with the harness and the CLI.
//!
//! Bounds that need the Riccati machinery work in the normalized problem
//! (`ω = 0`, `r̂ = 1`) and are mapped back through [`riccati::rescale`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{conjugate_exponent, BoundParams, GridFunction, WeightSpec};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::riccati::{self, CriticalLength, Rescaled, RiccatiOptions, RiccatiSolution};
use crate::wnorm::{self, Integrand};

/// Cell width of the grids built by the profile constructors.
pub const PROFILE_SPACING: f64 = 1e-4;

/// Relative slack on `a + b ≤ t` and on the `(0, π/4]` range of the
/// trigonometric bound.
const PAIR_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Hilbert,
    Banach,
    Ly,
    Profile,
    Minmax,
    Trig,
    Wei,
    Sharp,
}

impl BoundKind {
    pub const ALL: [BoundKind; 8] = [
        BoundKind::Hilbert,
        BoundKind::Banach,
        BoundKind::Ly,
        BoundKind::Profile,
        BoundKind::Minmax,
        BoundKind::Trig,
        BoundKind::Wei,
        BoundKind::Sharp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Hilbert => "hilbert",
            BoundKind::Banach => "banach",
            BoundKind::Ly => "ly",
            BoundKind::Profile => "profile",
            BoundKind::Minmax => "minmax",
            BoundKind::Trig => "trig",
            BoundKind::Wei => "wei",
            BoundKind::Sharp => "sharp",
        }
    }

    /// Whether the bound has free lengths `(a, b)` to optimize.
    pub fn has_free_pair(self) -> bool {
        !matches!(self, BoundKind::Ly | BoundKind::Wei)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown bound kind {s:?}")))
    }
}

/// Sign selector `ε` of `(x)_ε`: the positive or the negative part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// `(x)_+ = max(x, 0)`, `(x)_- = max(-x, 0)`.
    pub fn part(self, x: f64) -> f64 {
        match self {
            Sign::Plus => x.max(0.0),
            Sign::Minus => (-x).max(0.0),
        }
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_pair(t: f64, a: f64, b: f64) -> Result<()> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    if !t.is_finite() || t < (a + b) * (1.0 - PAIR_SLACK) {
        return Err(Error::invalid(format!("t = {t} must satisfy t >= a + b = {}", a + b)));
    }
    Ok(())
}

fn ln_inverse_norm(m: &WeightSpec, omega: f64, p: f64, len: f64, quad: QuadOptions) -> Result<f64> {
    wnorm::ln_weighted_norm(Integrand::InverseWeight(m), omega, p, (0.0, len), quad)
}

#[allow(clippy::too_many_arguments)]
fn ln_banach(m: &WeightSpec, omega: f64, k: f64, p: f64, t: f64, a: f64, b: f64, quad: QuadOptions) -> Result<f64> {
    let q = conjugate_exponent(p)?;
    Ok(k.ln() + omega * t - ln_inverse_norm(m, omega, q, a, quad)? - ln_inverse_norm(m, omega, p, b, quad)?)
}

/// `e^{ωt} / (r ‖1/m‖_{e^{-ω·}L²(0,a)} ‖1/m‖_{e^{-ω·}L²(0,b)})`.
pub fn bound_hilbert(m: &WeightSpec, omega: f64, r: f64, t: f64, a: f64, b: f64) -> Result<f64> {
    check_positive("r", r)?;
    check_pair(t, a, b)?;
    Ok(ln_banach(m, omega, 1.0 / r, 2.0, t, a, b, QuadOptions::default())?.exp())
}

/// `K e^{ωt} / (‖1/m‖_{e^{-ω·}L^q(0,a)} ‖1/m‖_{e^{-ω·}L^p(0,b)})`.
pub fn bound_banach(m: &WeightSpec, omega: f64, k: f64, p: f64, t: f64, a: f64, b: f64) -> Result<f64> {
    check_positive("K", k)?;
    check_pair(t, a, b)?;
    Ok(ln_banach(m, omega, k, p, t, a, b, QuadOptions::default())?.exp())
}

/// The uniform constant `M = L(1 + 4 p^{-1/p} q^{-1/q} L K (λ - ω))` with
/// `‖S(t)‖ ≤ M e^{ωt}`, given `‖S(t)‖ ≤ L e^{λt}`.
pub fn bound_ly(l: f64, lambda: f64, omega: f64, p: f64, k: f64) -> Result<f64> {
    check_positive("L", l)?;
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::invalid(format!("K must be nonnegative and finite, got {k}")));
    }
    if !(omega < lambda) {
        return Err(Error::invalid(format!("omega = {omega} must be below lambda = {lambda}")));
    }
    let q = conjugate_exponent(p)?;
    let c = 4.0 * p.powf(-1.0 / p) * q.powf(-1.0 / q);
    Ok(l * (1.0 + c * l * k * (lambda - omega)))
}

/// Normalized (`ω = 0`, `r̂ = 1`) two-lengths bound
/// `e^{-(t-a-b)} (I_inf(a) / J_sup(b))^{1/p}`.
pub fn bound_minmax(m: &WeightSpec, p: f64, a: f64, b: f64, t: f64) -> Result<f64> {
    check_pair(t, a, b)?;
    let sol = riccati::solve_riccati(m, p, a.max(b))?;
    ln_minmax(&sol, p, a, b, t).map(f64::exp)
}

fn ln_minmax(sol: &RiccatiSolution, p: f64, a: f64, b: f64, t: f64) -> Result<f64> {
    Ok(-(t - a - b) + (sol.i_inf(a)?.ln() - sol.j_sup(b)?.ln()) / p)
}

/// `∫_0^x (cos^p - sin^p)`.
fn trig_energy(p: f64, x: f64) -> Result<f64> {
    quad::integrate(|s| s.cos().powf(p) - s.sin().powf(p), 0.0, x)
}

/// The normalized bound for `m ≡ 1` with `u = sin/sin a` and `θ = cos/cos b`:
/// `(cos b / sin a) e^{-(t-a-b)} (∫_0^a (cos^p - sin^p))^{1/p} / (∫_0^b (cos^p - sin^p))^{1/p}`,
/// which is `cot a · e^{-(t-2a)}` when `a = b`.
pub fn bound_trig(a: f64, b: f64, p: f64, t: f64) -> Result<f64> {
    conjugate_exponent(p)?;
    for (name, x) in [("a", a), ("b", b)] {
        if !(x > 0.0 && x <= FRAC_PI_4 * (1.0 + PAIR_SLACK)) {
            return Err(Error::invalid(format!("{name} = {x} is outside (0, pi/4]")));
        }
    }
    check_pair(t, a, b)?;
    if a == b {
        return Ok((-(t - 2.0 * a)).exp() / a.tan());
    }
    let ratio = (trig_energy(p, a)? / trig_energy(p, b)?).powf(1.0 / p);
    Ok(b.cos() / a.sin() * (-(t - a - b)).exp() * ratio)
}

/// `e^{-r̂t + π/2}` for contraction semigroups.
pub fn bound_wei(rhat0: f64, t: f64) -> f64 {
    (-rhat0 * t + FRAC_PI_2).exp()
}

/// `exp((ω̂-r̂)(t̂-â-b̂)) m̂(â) m̂(b̂) (ψ̂(â) ψ̂(b̂))^{(p-1)/p}`.
pub fn bound_sharp(
    m_hat: &WeightSpec,
    omega_hat: f64,
    r_hat: f64,
    p: f64,
    t_hat: f64,
    a_hat: f64,
    b_hat: f64,
) -> Result<f64> {
    check_pair(t_hat, a_hat, b_hat)?;
    let resc = riccati::rescale(m_hat, omega_hat, r_hat, p)?;
    sharp_with(&resc, p, t_hat, a_hat, b_hat)
}

/// [`bound_sharp`] on an already rescaled problem.
pub fn sharp_with(resc: &Rescaled, p: f64, t_hat: f64, a_hat: f64, b_hat: f64) -> Result<f64> {
    check_pair(t_hat, a_hat, b_hat)?;
    ln_sharp(resc, p, t_hat, a_hat, b_hat).map(f64::exp)
}

fn ln_sharp(resc: &Rescaled, p: f64, t: f64, a: f64, b: f64) -> Result<f64> {
    let cap = sharp_cap(resc);
    for (name, x) in [("a", a), ("b", b)] {
        if x > cap * (1.0 + 1e-10) {
            return Err(Error::BeyondCriticalLength { name, value: x, a_star: cap });
        }
    }
    let m = resc.weight();
    let psi = |x: f64| resc.psi(x.min(cap));
    Ok((resc.omega_hat() - resc.r_hat()) * (t - a - b)
        + m.ln_value(a)?
        + m.ln_value(b)?
        + (p - 1.0) / p * (psi(a)?.ln() + psi(b)?.ln()))
}

/// Largest admissible `â`: the critical length, or the covered horizon when
/// `ψ̂` never reaches 1.
fn sharp_cap(resc: &Rescaled) -> f64 {
    match resc.a_star() {
        CriticalLength::Finite(a) => a,
        CriticalLength::Infinite => resc.horizon(),
    }
}

/// Test profiles `Φ`, `Ψ` on `[0, t]` with the sign selectors of the
/// two-profile bound.
#[derive(Clone, Debug)]
pub struct ProfilePair {
    phi: GridFunction,
    psi: GridFunction,
    t: f64,
    eps1: Sign,
    eps2: Sign,
}

impl ProfilePair {
    pub fn new(phi: GridFunction, psi: GridFunction, eps1: Sign, eps2: Sign) -> Result<Self> {
        let t = phi.hi();
        check_positive("t", t)?;
        for (name, f) in [("phi", &phi), ("psi", &psi)] {
            if f.lo() != 0.0 || (f.hi() - t).abs() > 1e-12 * t {
                return Err(Error::invalid(format!(
                    "{name} must be sampled on [0, {t}], got [{}, {}]",
                    f.lo(),
                    f.hi()
                )));
            }
            let v = f.values();
            let scale = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if v[0].abs() > 1e-14 * scale {
                return Err(Error::invalid(format!("{name}(0) = {} must vanish", v[0])));
            }
            if let Some(i) = (1..v.len()).find(|&i| !(v[i].is_finite() && v[i] > 0.0)) {
                return Err(Error::invalid(format!(
                    "{name} must be positive on (0, t], got {} at s = {}",
                    v[i],
                    f.grid()[i]
                )));
            }
        }
        Ok(ProfilePair { phi, psi, t, eps1, eps2 })
    }

    pub fn phi(&self) -> &GridFunction {
        &self.phi
    }

    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn signs(&self) -> (Sign, Sign) {
        (self.eps1, self.eps2)
    }
}

/// `∫ part(r^p f^p - |f'|^p) m^p` over the cells of `f`, with `f` and `f'`
/// taken from the piecewise-linear interpolant at each cell midpoint.
fn profile_energy(f: &GridFunction, m: &WeightSpec, rhat: f64, p: f64, sign: Sign) -> Result<f64> {
    let (g, v) = (f.grid(), f.values());
    let rp = rhat.powf(p);
    let mut acc = 0.0;
    for i in 0..g.len() - 1 {
        let h = g[i + 1] - g[i];
        let mid = 0.5 * (v[i] + v[i + 1]);
        let gap = sign.part(rp * mid.abs().powf(p) - f.cell_slope(i).abs().powf(p));
        if gap > 0.0 {
            acc += h * gap * (p * m.ln_value(0.5 * (g[i] + g[i + 1]))?).exp();
        }
    }
    Ok(acc)
}

/// Node set of `a ∪ b`, merging nodes closer than `tol`.
fn merge_grids(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// The two-profile bound in normalized form:
/// `‖(r̂^pΦ^p-|Φ'|^p)_-^{1/p} m‖_p ‖(r̂^qΨ^q-|Ψ'|^q)_-^{1/q} m‖_q` divided by
/// `∫_0^t (r̂^pΦ^p-|Φ'|^p)_{ε₁}^{1/p} (r̂^q(ι_tΨ)^q-|(ι_tΨ)'|^q)_{ε₂}^{1/q}`,
/// where `ι_tΨ(s) = Ψ(t-s)`.
pub fn bound_profile(m: &WeightSpec, rhat: f64, p: f64, profiles: &ProfilePair) -> Result<f64> {
    check_positive("rhat", rhat)?;
    let q = conjugate_exponent(p)?;
    let (phi, psi, t) = (&profiles.phi, &profiles.psi, profiles.t);
    let num = profile_energy(phi, m, rhat, p, Sign::Minus)?.powf(1.0 / p)
        * profile_energy(psi, m, rhat, q, Sign::Minus)?.powf(1.0 / q);

    let reflected: Vec<f64> = psi.grid().iter().rev().map(|&s| t - s).collect();
    let grid = merge_grids(phi.grid(), &reflected, 1e-10 * t);
    let iota = |s: f64| psi.eval((t - s).clamp(0.0, t));
    let (rp, rq) = (rhat.powf(p), rhat.powf(q));
    let mut den = 0.0;
    for c in grid.windows(2) {
        let h = c[1] - c[0];
        let (f0, f1) = (phi.eval(c[0])?, phi.eval(c[1])?);
        let left = profiles
            .eps1
            .part(rp * (0.5 * (f0 + f1)).abs().powf(p) - ((f1 - f0) / h).abs().powf(p));
        if left == 0.0 {
            continue;
        }
        let (g0, g1) = (iota(c[0])?, iota(c[1])?);
        let right = profiles
            .eps2
            .part(rq * (0.5 * (g0 + g1)).abs().powf(q) - ((g1 - g0) / h).abs().powf(q));
        den += h * left.powf(1.0 / p) * right.powf(1.0 / q);
    }
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator(
            "the sign selectors leave no overlap between the profile parts".into(),
        ));
    }
    Ok(num / den)
}

fn segment(lo: f64, hi: f64) -> Result<Vec<f64>> {
    let n = (((hi - lo) / PROFILE_SPACING).ceil() as usize + 1).max(16);
    GridFunction::uniform_grid(lo, hi, n)
}

/// Appends `(s, v)` pairs, skipping a leading node equal to the last one.
fn extend(grid: &mut Vec<f64>, values: &mut Vec<f64>, s: &[f64], v: &[f64]) {
    let skip = usize::from(grid.last().is_some_and(|&l| (s[0] - l).abs() <= 1e-12 * l.abs().max(1.0)));
    grid.extend_from_slice(&s[skip..]);
    values.extend_from_slice(&v[skip..]);
}

/// Piecewise profiles in normalized form:
/// `Φ = e^a u` on `[0, a]`, `e^s` on `[a, t-b]`, `e^{t-b} θ(t-s)` on `[t-b, t]`;
/// `Ψ = e^b v` on `[0, b]`, `e^s` on `[b, t-a]`, `e^{t-a}` on `[t-a, t]`,
/// with `v` the Hölder-optimal competitor for `θ` and `(ε₁, ε₂) = (+, -)`.
fn assemble(
    m: &WeightSpec,
    p: f64,
    a: f64,
    b: f64,
    t: f64,
    u: &GridFunction,
    theta: &GridFunction,
) -> Result<ProfilePair> {
    check_pair(t, a, b)?;
    let t = t.max(a + b);
    let v = wnorm::optimal_v(theta, m, p, b)?.v;
    let middle = t - a - b > 1e-12 * t;

    let (mut g, mut f) = (Vec::new(), Vec::new());
    let ea = a.exp();
    extend(&mut g, &mut f, u.grid(), &u.values().iter().map(|x| ea * x).collect::<Vec<_>>());
    if middle {
        let s = segment(a, t - b)?;
        let e: Vec<f64> = s.iter().map(|x| x.exp()).collect();
        extend(&mut g, &mut f, &s, &e);
    }
    let etb = (t - b).exp();
    let s: Vec<f64> = theta.grid().iter().rev().map(|x| t - x).collect();
    let e: Vec<f64> = theta.values().iter().rev().map(|x| etb * x).collect();
    extend(&mut g, &mut f, &s, &e);
    *g.last_mut().unwrap() = t;
    let phi = GridFunction::new(g, f)?;

    let (mut g, mut f) = (Vec::new(), Vec::new());
    let eb = b.exp();
    extend(&mut g, &mut f, v.grid(), &v.values().iter().map(|x| eb * x).collect::<Vec<_>>());
    if middle {
        let s = segment(b, t - a)?;
        let e: Vec<f64> = s.iter().map(|x| x.exp()).collect();
        extend(&mut g, &mut f, &s, &e);
    }
    let eta = (t - a).exp();
    let s: Vec<f64> = u.grid().iter().rev().map(|x| t - x).collect();
    extend(&mut g, &mut f, &s, &vec![eta; s.len()]);
    *g.last_mut().unwrap() = t;
    let psi = GridFunction::new(g, f)?;

    ProfilePair::new(phi, psi, Sign::Plus, Sign::Minus)
}

/// Profiles built from the Riccati solution for `m`: `u'/u = ψ` on `[0, a]`
/// and `θ'/θ = -1/ψ` on `[0, b]`, i.e. the minimizer and maximizer behind
/// `I_inf(a)` and `J_sup(b)`.
pub fn minmax_profiles(m: &WeightSpec, p: f64, a: f64, b: f64, t: f64) -> Result<ProfilePair> {
    check_pair(t, a, b)?;
    let sol = riccati::solve_riccati(m, p, a.max(b))?;
    if let Some(cross) = sol.crossing() {
        for (name, x) in [("a", a), ("b", b)] {
            if x > cross * (1.0 + 1e-10) {
                return Err(Error::BeyondCriticalLength { name, value: x, a_star: cross });
            }
        }
    }
    let per_cell = QuadOptions {
        tol: 1e-13,
        budget: quad::DEFAULT_BUDGET,
    };
    // u(s_i) = exp(-∫_{s_i}^a 1/w), accumulated cell by cell from s = a down.
    let ga = segment(0.0, a)?;
    let mut lu = vec![0.0; ga.len()];
    for i in (1..ga.len() - 1).rev() {
        let cell = quad::integrate_with(|x| 1.0 / sol.w(x).unwrap_or(f64::NAN), ga[i], ga[i + 1], per_cell)?;
        lu[i] = lu[i + 1] - cell;
    }
    let mut uv: Vec<f64> = lu.iter().map(|l| l.exp()).collect();
    uv[0] = 0.0;
    let u = GridFunction::new(ga, uv)?;
    // θ(s_i) = exp(∫_{s_i}^b w).
    let gb = segment(0.0, b)?;
    let mut lt = vec![0.0; gb.len()];
    for i in (0..gb.len() - 1).rev() {
        let cell = quad::integrate_with(|x| sol.w(x).unwrap_or(f64::NAN), gb[i], gb[i + 1], per_cell)?;
        lt[i] = lt[i + 1] + cell;
    }
    let theta = GridFunction::new(gb, lt.iter().map(|l| l.exp()).collect())?;
    assemble(m, p, a, b, t, &u, &theta)
}

/// Profiles for `m ≡ 1` with `u = sin/sin a` and `θ = cos/cos b`.
pub fn trig_profiles(p: f64, a: f64, b: f64, t: f64) -> Result<ProfilePair> {
    for (name, x) in [("a", a), ("b", b)] {
        if !(x > 0.0 && x <= FRAC_PI_4 * (1.0 + PAIR_SLACK)) {
            return Err(Error::invalid(format!("{name} = {x} is outside (0, pi/4]")));
        }
    }
    let (sa, cb) = (a.sin(), b.cos());
    let u = GridFunction::try_from_fn(segment(0.0, a)?, |s| Ok(s.sin() / sa))?;
    let theta = GridFunction::try_from_fn(segment(0.0, b)?, |s| Ok(s.cos() / cb))?;
    assemble(&WeightSpec::unit(), p, a, b, t, &u, &theta)
}

/// A bound with free `(a, b)`, prepared once so that repeated evaluation
/// reuses the Riccati solution.
#[derive(Clone, Debug)]
pub struct Objective {
    kind: BoundKind,
    weight: WeightSpec,
    params: BoundParams,
    constant: f64,
    rescaled: Option<Rescaled>,
    cap: f64,
    quad: QuadOptions,
}

impl Objective {
    pub fn new(kind: BoundKind, m: &WeightSpec, params: &BoundParams) -> Result<Self> {
        Self::with_options(kind, m, params, &OptimizeOptions::default())
    }

    /// Uses the Riccati and quadrature tolerances of `opts`.
    pub fn with_options(kind: BoundKind, m: &WeightSpec, params: &BoundParams, opts: &OptimizeOptions) -> Result<Self> {
        m.validate()?;
        let p = params.p;
        let mut obj = Objective {
            kind,
            weight: m.clone(),
            params: params.clone(),
            constant: f64::NAN,
            rescaled: None,
            cap: f64::INFINITY,
            quad: QuadOptions {
                tol: opts.quad_tol,
                budget: quad::DEFAULT_BUDGET,
            },
        };
        let rhat = || {
            params
                .rhat()
                .ok_or_else(|| Error::invalid(format!("{kind} bound needs K (r_hat = 1/K)")))
        };
        match kind {
            BoundKind::Ly | BoundKind::Wei => {
                return Err(Error::invalid(format!("{kind} bound has no free lengths (a, b)")));
            }
            BoundKind::Hilbert => {
                if p != 2.0 {
                    return Err(Error::invalid(format!("hilbert bound needs p = 2, got {p}")));
                }
                obj.constant = match (params.r_const, params.k_const) {
                    (Some(r), _) => r,
                    (None, Some(k)) => 1.0 / k,
                    _ => return Err(Error::invalid("hilbert bound needs r or K")),
                };
            }
            BoundKind::Banach => {
                obj.constant = params
                    .k_const
                    .ok_or_else(|| Error::invalid("banach bound needs K"))?;
            }
            BoundKind::Minmax | BoundKind::Sharp | BoundKind::Profile => {
                let resc = riccati::rescale_with(m, params.omega, rhat()?, p, &opts.riccati)?;
                obj.cap = sharp_cap(&resc);
                obj.rescaled = Some(resc);
            }
            BoundKind::Trig => {
                let r = rhat()?;
                let n = riccati::normalized_weight(m, params.omega, r)?;
                if !n.is_unit() {
                    return Err(Error::invalid(
                        "trig bound needs the normalized weight to be identically 1",
                    ));
                }
                obj.constant = r;
                obj.cap = FRAC_PI_4 / r;
            }
        }
        Ok(obj)
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }

    /// Upper limit on `a` and on `b` (infinite when only `a + b ≤ t` applies).
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn eval(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        check_pair(t, a, b)?;
        self.ln_eval(t, a, b).map(f64::exp)
    }

    fn ln_eval(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        let (m, omega, p) = (&self.weight, self.params.omega, self.params.p);
        match self.kind {
            BoundKind::Hilbert => ln_banach(m, omega, 1.0 / self.constant, 2.0, t, a, b, self.quad),
            BoundKind::Banach => ln_banach(m, omega, self.constant, p, t, a, b, self.quad),
            BoundKind::Trig => {
                let r = self.constant;
                Ok(omega * t + bound_trig(r * a, r * b, p, r * t)?.ln())
            }
            BoundKind::Sharp => ln_sharp(self.rescaled.as_ref().unwrap(), p, t, a, b),
            BoundKind::Minmax => {
                // e^{ωt} times the normalized bound at (r̂a, r̂b, r̂t).
                let resc = self.rescaled.as_ref().unwrap();
                let r = resc.r_hat();
                Ok(omega * t + ln_minmax(resc.normalized(), p, r * a, r * b, r * t)?)
            }
            BoundKind::Profile => {
                let resc = self.rescaled.as_ref().unwrap();
                let r = resc.r_hat();
                let n = resc.normalized().weight();
                let pair = minmax_profiles(n, p, r * a, r * b, r * t)?;
                Ok(omega * t + bound_profile(n, 1.0, p, &pair)?.ln())
            }
            BoundKind::Ly | BoundKind::Wei => unreachable!("rejected in Objective::new"),
        }
    }
}

/// Scan size, refinement tolerance and inner solver tolerances of
/// [`optimize_ab`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    /// Points per axis of the logarithmic scan.
    pub scan: usize,
    /// Ratio between the smallest and largest scanned length.
    pub span: f64,
    /// Golden-section bracket, relative to the searched interval.
    pub bracket: f64,
    pub max_rounds: usize,
    pub riccati: RiccatiOptions,
    pub quad_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            scan: 64,
            span: 1e-3,
            bracket: 1e-8,
            max_rounds: 200,
            riccati: RiccatiOptions::default(),
            quad_tol: quad::DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// Relative improvement a refinement move must achieve to be taken.
const MIN_GAIN: f64 = 1e-11;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` on `[lo, hi]`: golden section for the interior, then the
/// better of that point and the two endpoints.
fn golden(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, bracket: f64) -> (f64, f64) {
    let (mut x0, mut x3) = (lo, hi);
    let mut x1 = x3 - INV_PHI * (x3 - x0);
    let mut x2 = x0 + INV_PHI * (x3 - x0);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let width = bracket * (hi - lo).abs().max(hi.abs());
    while x3 - x0 > width {
        if f1 <= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - INV_PHI * (x3 - x0);
            f1 = f(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + INV_PHI * (x3 - x0);
            f2 = f(x2);
        }
    }
    let mid = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    [(lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold(mid, |best, c| if c.1 < best.1 { c } else { best })
}

/// Minimizes the `kind` bound over `(a, b)` with default options.
pub fn optimize_ab(kind: BoundKind, m: &WeightSpec, params: &BoundParams, t: f64) -> Result<Optimum> {
    let obj = Objective::new(kind, m, params)?;
    optimize_objective(&obj, t, &OptimizeOptions::default())
}

/// Logarithmic scan of the admissible rectangle `{a, b ≤ cap, a + b ≤ t}`
/// followed by coordinate descent along `a`, `b` and the anti-diagonal.
pub fn optimize_objective(obj: &Objective, t: f64, opts: &OptimizeOptions) -> Result<Optimum> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::EmptyAdmissibleSet(format!("t = {t} leaves no a, b > 0 with a + b <= t")));
    }
    if opts.scan < 2 || !(opts.span > 0.0 && opts.span < 1.0) {
        return Err(Error::invalid("optimizer needs scan >= 2 and 0 < span < 1"));
    }
    let hi = obj.cap().min(t);
    let lo = hi * opts.span;
    let n = opts.scan;
    let axis: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo * (hi / lo).powf(i as f64 / (n - 1) as f64) })
        .collect();
    let fits = |a: f64, b: f64| a + b <= t * (1.0 + PAIR_SLACK);
    let cells: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| fits(a, b))
        .collect();
    if cells.is_empty() {
        return Err(Error::EmptyAdmissibleSet(format!("no scanned (a, b) satisfies a + b <= t = {t}")));
    }
    let scored: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .filter_map(|&(a, b)| obj.ln_eval(t, a, b).ok().filter(|v| !v.is_nan()).map(|v| (v, a, b)))
        .collect();
    let (mut best, mut a, mut b) = scored
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)))
        .ok_or_else(|| Error::EmptyAdmissibleSet(format!("the {} bound failed on every scanned (a, b)", obj.kind())))?;

    let f = |a: f64, b: f64| -> f64 {
        if a <= 0.0 || b <= 0.0 || !fits(a, b) {
            return f64::INFINITY;
        }
        obj.ln_eval(t, a, b).unwrap_or(f64::INFINITY)
    };
    let floor = lo * 1e-3;
    let cap = obj.cap();
    let improves = |new: f64, old: f64| new < old - MIN_GAIN * old.abs().max(1.0);
    for _ in 0..opts.max_rounds {
        let mut moved = false;
        let upper = cap.min(t - b);
        if upper > floor {
            let (x, v) = golden(&|x| f(x, b), floor, upper, opts.bracket);
            if improves(v, best) {
                (a, best, moved) = (x, v, true);
            }
        }
        let upper = cap.min(t - a);
        if upper > floor {
            let (x, v) = golden(&|x| f(a, x), floor, upper, opts.bracket);
            if improves(v, best) {
                (b, best, moved) = (x, v, true);
            }
        }
        let d_lo = (floor - a).max(b - cap);
        let d_hi = (cap - a).min(b - floor);
        if d_hi > d_lo {
            let (d, v) = golden(&|d| f(a + d, b - d), d_lo, d_hi, opts.bracket);
            if improves(v, best) {
                (a, b, best, moved) = (a + d, b - d, v, true);
            }
        }
        if !moved {
            break;
        }
    }
    Ok(Optimum { a, b, value: best.exp() })
}

/// Outcome of comparing a bound with the exact norm at one time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Pass with a `K` that is only a lower estimate.
    ConditionalPass,
    ConditionalFail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::ConditionalPass => "CONDITIONAL-PASS",
            Verdict::ConditionalFail => "CONDITIONAL-FAIL",
        }
    }

    pub fn passed(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::ConditionalPass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certification {
    pub exact: f64,
    pub ratio: f64,
    pub verdict: Verdict,
}

/// Values of one bound kind on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub params: BoundParams,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Chosen `(a, b)` per time; `None` for kinds without free lengths.
    pub argmin: Vec<Option<(f64, f64)>>,
    pub notes: Vec<String>,
    pub certification: Option<Vec<Certification>>,
}

impl BoundReport {
    pub fn new(kind: BoundKind, params: BoundParams) -> Self {
        let mut notes = Vec::new();
        match kind {
            BoundKind::Profile => notes.push(
                "profile gaps are scaled by r_hat^p".to_string(),
            ),
            BoundKind::Trig => notes.push(
                "a != b uses the prefactor cos(b)/sin(a); the a = b case is cot(a) e^{-(t-2a)}".to_string(),
            ),
            _ => {}
        }
        BoundReport {
            kind,
            params,
            t_grid: Vec::new(),
            values: Vec::new(),
            argmin: Vec::new(),
            notes,
            certification: None,
        }
    }

    pub fn push(&mut self, t: f64, value: f64, argmin: Option<(f64, f64)>) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonFinite { at: t });
        }
        self.t_grid.push(t);
        self.values.push(value);
        self.argmin.push(argmin);
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the exact parameter values.
    pub fn params_hash(&self) -> String {
        params_hash(&self.params)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "t,kind,value,a,b,params-hash")?;
        self.write_rows(out)
    }

    /// Rows without the header, for tables that merge several kinds.
    pub fn write_rows(&self, out: &mut dyn Write) -> io::Result<()> {
        let hash = self.params_hash();
        for i in 0..self.t_grid.len() {
            let (a, b) = match self.argmin[i] {
                Some((a, b)) => (fmt_sig(a), fmt_sig(b)),
                None => (String::new(), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{a},{b},{hash}",
                fmt_sig(self.t_grid[i]),
                self.kind,
                fmt_sig(self.values[i])
            )?;
        }
        Ok(())
    }

    /// Two whitespace-separated columns `t value`.
    pub fn write_plot(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "# t {}", self.kind)?;
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            writeln!(out, "{} {}", fmt_sig(*t), fmt_sig(*v))?;
        }
        Ok(())
    }
}

pub fn params_hash(params: &BoundParams) -> String {
    let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:e}"));
    let canon = format!(
        "omega={:e};p={:e};q={:e};k={};r={}",
        params.omega,
        params.p,
        params.q,
        opt(params.k_const),
        opt(params.r_const)
    );
    Sha256::digest(canon.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Ten significant digits, fixed notation for moderate magnitudes and
/// exponent notation otherwise, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..10).contains(&exp) {
        let s = format!("{:.*}", (9 - exp).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mant, e) = sci.split_at(sci.find('e').unwrap());
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}{e}")
    }
}

/// Extra inputs of the kinds without free lengths.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Growth {
    /// `(L, λ)` with `‖S(t)‖ ≤ L e^{λt}`, used by the `ly` kind.
    pub exponential: Option<(f64, f64)>,
}

/// Evaluates `kind` at every time of `t_grid`, optimizing `(a, b)` where
/// the kind has free lengths.
pub fn bound_report(
    kind: BoundKind,
    m: &WeightSpec,
    params: &BoundParams,
    growth: Growth,
    t_grid: &[f64],
    opts: &OptimizeOptions,
) -> Result<BoundReport> {
    let mut report = BoundReport::new(kind, params.clone());
    match kind {
        BoundKind::Wei => {
            if !m.is_unit() || params.omega != 0.0 {
                return Err(Error::invalid("wei bound needs m = 1 and omega = 0 (a contraction)"));
            }
            let r = params.rhat().ok_or_else(|| Error::invalid("wei bound needs K"))?;
            for &t in t_grid {
                report.push(t, bound_wei(r, t), None)?;
            }
        }
        BoundKind::Ly => {
            let (l, lambda) = growth
                .exponential
                .ok_or_else(|| Error::invalid("ly bound needs the growth (L, lambda)"))?;
            let k = params.k_const.ok_or_else(|| Error::invalid("ly bound needs K"))?;
            let big_m = bound_ly(l, lambda, params.omega, params.p, k)?;
            for &t in t_grid {
                report.push(t, big_m * (params.omega * t).exp(), None)?;
            }
        }
        _ => {
            let obj = Objective::with_options(kind, m, params, opts)?;
            let results: Vec<Result<Optimum>> =
                t_grid.par_iter().map(|&t| optimize_objective(&obj, t, opts)).collect();
            for (&t, r) in t_grid.iter().zip(results) {
                let o = r?;
                report.push(t, o.value, Some((o.a, o.b)))?;
            }
        }
    }
    Ok(report)
}
