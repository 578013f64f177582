//! The weighted Riccati problem `ψ' = -((p-1)ψ² + pμψ + 1/(p-1))`,
//! `ψ(0⁺) = +∞`, its critical length `a*` (first point where `ψ = 1`), the
//! closed-form variational values and the time/exponent rescaling.
//!
//! The solver integrates `w = 1/ψ`, which starts regularly at `w(0) = 0` with
//! `w' = (p-1) + pμw + w²/(p-1)`.

use std::fmt;

use crate::domain::WeightSpec;
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, Stop, Trajectory};

/// `w` above this is treated as a blow-up (`ψ` has reached 0).
const BLOW_UP: f64 = 1e12;
/// Bisection width for `a*`.
const ROOT_TOL: f64 = 1e-13;
/// At the horizon cap, `w'` below this means `w` has levelled off under 1.
const FLAT_SLOPE: f64 = 1e-8;
const MAX_STEP: f64 = 2e-3;

/// `a*`, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalLength {
    Finite(f64),
    Infinite,
}

impl CriticalLength {
    /// The length, with `f64::INFINITY` for the infinite marker.
    pub fn value(self) -> f64 {
        match self {
            CriticalLength::Finite(a) => a,
            CriticalLength::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, CriticalLength::Finite(_))
    }

    /// Divides a finite length by `r`.
    pub fn scaled_down(self, r: f64) -> Self {
        match self {
            CriticalLength::Finite(a) => CriticalLength::Finite(a / r),
            CriticalLength::Infinite => CriticalLength::Infinite,
        }
    }
}

impl fmt::Display for CriticalLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalLength::Finite(a) => write!(f, "{a}"),
            CriticalLength::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Horizon for the search of `a*`; `None` uses `10·max(1, 1/(p-1))`.
    pub horizon_cap: Option<f64>,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions {
            rtol: 1e-12,
            atol: 1e-14,
            horizon_cap: None,
        }
    }
}

impl RiccatiOptions {
    pub fn cap(&self, p: f64) -> f64 {
        self.horizon_cap.unwrap_or(10.0 * 1f64.max(1.0 / (p - 1.0)))
    }
}

/// Dense solution `w = 1/ψ` on `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    p: f64,
    weight: WeightSpec,
    traj: Trajectory,
    a_star: Option<f64>,
    horizon: f64,
    diagnostics: Vec<String>,
}

impl RiccatiSolution {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Right end of the dense output. Shorter than the requested horizon when
    /// `w` blew up after crossing 1.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// First crossing of `ψ = 1` inside the horizon.
    pub fn crossing(&self) -> Option<f64> {
        self.a_star
    }

    /// Anomalies met while integrating (non-increasing `w` below 1, repeated
    /// crossings).
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    fn check(&self, s: f64) -> Result<()> {
        if !(s >= 0.0 && s <= self.horizon) {
            return Err(Error::OutsideDomain {
                t: s,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        Ok(())
    }

    /// `w(s) = 1/ψ(s)`.
    pub fn w(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        self.traj.eval(s)
    }

    /// Derivative of the dense output of `w`.
    pub fn w_derivative(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        self.traj.derivative(s)
    }

    /// `ψ(s)`; `+∞` at `s = 0`.
    pub fn psi(&self, s: f64) -> Result<f64> {
        Ok(1.0 / self.w(s)?)
    }

    /// `ψ'(s) = -w'/w²`.
    pub fn psi_derivative(&self, s: f64) -> Result<f64> {
        let w = self.w(s)?;
        Ok(-self.w_derivative(s)? / (w * w))
    }

    fn within_critical(&self, name: &'static str, x: f64) -> Result<()> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {x}")));
        }
        if let Some(a) = self.a_star {
            if x > a * (1.0 + 1e-10) {
                return Err(Error::BeyondCriticalLength { name, value: x, a_star: a });
            }
        }
        self.check(x)
    }

    /// `m(a)^p ψ(a)^{p-1}` for `0 < a ≤ a*`.
    pub fn i_inf(&self, a: f64) -> Result<f64> {
        self.within_critical("a", a)?;
        let ln = self.p * self.weight.ln_value(a)? + (self.p - 1.0) * self.psi(a)?.ln();
        Ok(ln.exp())
    }

    /// `m(b)^{-p} ψ(b)^{-(p-1)}` for `0 < b ≤ a*`.
    pub fn j_sup(&self, b: f64) -> Result<f64> {
        self.within_critical("b", b)?;
        let ln = -self.p * self.weight.ln_value(b)? - (self.p - 1.0) * self.psi(b)?.ln();
        Ok(ln.exp())
    }

    /// `u(s) = exp(-∫_s^a ψ)`, the minimizer behind `i_inf(a)`: `u(a) = 1`,
    /// `u'/u = ψ`.
    pub fn harmonic_u(&self, a: f64, s: f64) -> Result<f64> {
        self.within_critical("a", a)?;
        if s <= 0.0 {
            return Ok(0.0);
        }
        // ∫_s^a ψ = ∫_s^a 1/w, finite for s > 0.
        let int = crate::quad::integrate(|x| 1.0 / self.traj.eval(x).unwrap_or(f64::NAN), s, a)?;
        Ok((-int).exp())
    }

    /// `θ(s) = exp(∫_s^b w)`, the maximizer behind `j_sup(b)`: `θ(b) = 1`,
    /// `θ'/θ = -1/ψ`.
    pub fn harmonic_theta(&self, b: f64, s: f64) -> Result<f64> {
        self.within_critical("b", b)?;
        let int = crate::quad::integrate(|x| self.traj.eval(x).unwrap_or(f64::NAN), s.max(0.0), b)?;
        Ok(int.exp())
    }
}

fn rhs(m: &WeightSpec, p: f64) -> impl Fn(f64, f64) -> Result<f64> + '_ {
    move |s, w| {
        let drift = if w == 0.0 { 0.0 } else { p * m.log_derivative_closed(s)? * w };
        Ok((p - 1.0) + drift + w * w / (p - 1.0))
    }
}

fn validate(m: &WeightSpec, p: f64, horizon: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("Riccati exponent must satisfy p > 1, got {p}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    m.validate()
}

enum Mode {
    /// Integrate the whole horizon; a blow-up is fine once `w` crossed 1.
    Full,
    /// Stop shortly after the first crossing.
    UntilCrossing,
}

fn solve(m: &WeightSpec, p: f64, horizon: f64, mode: Mode, opts: &RiccatiOptions) -> Result<RiccatiSolution> {
    validate(m, p, horizon)?;
    let (_, dom_hi) = m.domain();
    let end = horizon.min(dom_hi);
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        // Keeps the cubic Hermite dense output near the step tolerance.
        // Tables have kinks in μ' at every node, so steps stay below the spacing.
        max_step: (end / 256.0)
            .min(MAX_STEP)
            .min(m.resolution().map_or(f64::INFINITY, |h| h / 4.0)),
        ..OdeOptions::default()
    };
    let stop_level = match mode {
        Mode::Full => BLOW_UP,
        Mode::UntilCrossing => 2.0,
    };
    let (mut traj, stop) = ode::integrate(rhs(m, p), 0.0, 0.0, end, ode_opts, |_, w| w > stop_level)?;
    let a_star = traj.first_upcrossing(1.0, ROOT_TOL)?;
    if stop == Stop::Halted {
        if a_star.is_none() {
            return Err(Error::BlowUp { at: traj.end() });
        }
        if matches!(mode, Mode::Full) {
            // Drop the final near-singular step so ψ stays resolved.
            let last = traj.nodes().len() - 2;
            traj.truncate(last);
        }
    }
    let mut diagnostics = Vec::new();
    let (s, w, dw) = (traj.nodes(), traj.values(), traj.slopes());
    if let Some(i) = (0..s.len()).find(|&i| w[i] <= 1.0 && dw[i] <= 0.0 && s[i] > 0.0) {
        diagnostics.push(format!("w is not increasing at s = {} (w = {}, w' = {})", s[i], w[i], dw[i]));
    }
    if let Some(a) = a_star {
        if (0..s.len()).any(|i| s[i] > a && w[i] < 1.0) {
            diagnostics.push(format!("w returns below 1 after the crossing at {a}"));
        }
    }
    let horizon = traj.end();
    Ok(RiccatiSolution {
        p,
        weight: m.clone(),
        traj,
        a_star,
        horizon,
        diagnostics,
    })
}

/// Solves on `[0, s_max]` (clipped to the weight's domain).
pub fn solve_riccati(m: &WeightSpec, p: f64, s_max: f64) -> Result<RiccatiSolution> {
    solve_riccati_with(m, p, s_max, &RiccatiOptions::default())
}

pub fn solve_riccati_with(m: &WeightSpec, p: f64, s_max: f64, opts: &RiccatiOptions) -> Result<RiccatiSolution> {
    solve(m, p, s_max, Mode::Full, opts)
}

/// Solution up to just past `a*`, together with `a*`.
pub fn solve_to_critical(m: &WeightSpec, p: f64, opts: &RiccatiOptions) -> Result<(RiccatiSolution, CriticalLength)> {
    let cap = opts.cap(p);
    let sol = solve(m, p, cap, Mode::UntilCrossing, opts)?;
    if let Some(a) = sol.a_star {
        return Ok((sol, CriticalLength::Finite(a)));
    }
    let end = sol.horizon;
    let w = sol.traj.eval(end)?;
    let dw = rhs(m, p)(end, w)?;
    if dw <= FLAT_SLOPE {
        Ok((sol, CriticalLength::Infinite))
    } else {
        Err(Error::Undetermined { cap: end, w })
    }
}

pub fn critical_length(m: &WeightSpec, p: f64) -> Result<CriticalLength> {
    critical_length_with(m, p, &RiccatiOptions::default())
}

pub fn critical_length_with(m: &WeightSpec, p: f64, opts: &RiccatiOptions) -> Result<CriticalLength> {
    solve_to_critical(m, p, opts).map(|(_, a)| a)
}

/// Solution on `[0, x]`, used for single evaluations at `x`.
fn solve_through(m: &WeightSpec, p: f64, x: f64) -> Result<RiccatiSolution> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("evaluation point must be positive, got {x}")));
    }
    solve(m, p, x, Mode::UntilCrossing, &RiccatiOptions::default())
}

/// `I_inf = m(a)^p ψ(a)^{p-1}`.
pub fn i_inf(m: &WeightSpec, p: f64, a: f64) -> Result<f64> {
    solve_through(m, p, a)?.i_inf(a)
}

/// `J_sup = m(b)^{-p} ψ(b)^{-(p-1)}`.
pub fn j_sup(m: &WeightSpec, p: f64, b: f64) -> Result<f64> {
    solve_through(m, p, b)?.j_sup(b)
}

/// The Riccati problem in normalized time `s = r̂ŝ` for the weight `m̂`
/// tilted by `ω̂`.
#[derive(Clone, Debug)]
pub struct Rescaled {
    r_hat: f64,
    omega_hat: f64,
    weight_hat: WeightSpec,
    solution: RiccatiSolution,
    a_star_hat: CriticalLength,
}

impl Rescaled {
    /// `â*`, the largest `ŝ` with `ψ̂ > 1`.
    pub fn a_star(&self) -> CriticalLength {
        self.a_star_hat
    }

    pub fn r_hat(&self) -> f64 {
        self.r_hat
    }

    pub fn omega_hat(&self) -> f64 {
        self.omega_hat
    }

    /// `m̂`.
    pub fn weight(&self) -> &WeightSpec {
        &self.weight_hat
    }

    /// Solution in normalized time.
    pub fn normalized(&self) -> &RiccatiSolution {
        &self.solution
    }

    /// `ψ̂(ŝ) = ψ(r̂ŝ)`.
    pub fn psi(&self, s_hat: f64) -> Result<f64> {
        let s = self.r_hat * s_hat;
        let end = self.solution.horizon();
        // Absorbs the rounding of the round trip through `horizon()`.
        let s = if s > end && s <= end * (1.0 + 4.0 * f64::EPSILON) { end } else { s };
        self.solution.psi(s)
    }

    /// Largest `ŝ` the dense output covers, kept inside the domain of `m̂`.
    pub fn horizon(&self) -> f64 {
        (self.solution.horizon() / self.r_hat).min(self.weight_hat.domain().1)
    }
}

/// Normalizes `S(t) = e^{-ω̂t/r̂} Ŝ(t/r̂)`: the majorant becomes
/// `m̂(s/r̂) e^{-ω̂s/r̂}` and `ψ̂(ŝ) = ψ(r̂ŝ)`, `â* = a*/r̂`.
pub fn rescale(m_hat: &WeightSpec, omega_hat: f64, r_hat: f64, p: f64) -> Result<Rescaled> {
    rescale_with(m_hat, omega_hat, r_hat, p, &RiccatiOptions::default())
}

pub fn rescale_with(
    m_hat: &WeightSpec,
    omega_hat: f64,
    r_hat: f64,
    p: f64,
    opts: &RiccatiOptions,
) -> Result<Rescaled> {
    if !(r_hat > 0.0 && r_hat.is_finite()) {
        return Err(Error::invalid(format!("r_hat must be positive, got {r_hat}")));
    }
    if !omega_hat.is_finite() {
        return Err(Error::invalid("omega_hat must be finite"));
    }
    let normalized = normalized_weight(m_hat, omega_hat, r_hat)?;
    let (solution, a_star) = solve_to_critical(&normalized, p, opts)?;
    Ok(Rescaled {
        r_hat,
        omega_hat,
        weight_hat: m_hat.clone(),
        solution,
        a_star_hat: a_star.scaled_down(r_hat),
    })
}

/// `s ↦ m̂(s/r̂) e^{-ω̂s/r̂}`, simplified when `r̂ = 1` or `ω̂ = 0`.
pub fn normalized_weight(m_hat: &WeightSpec, omega_hat: f64, r_hat: f64) -> Result<WeightSpec> {
    let tilted = if omega_hat == 0.0 { m_hat.clone() } else { m_hat.clone().tilt(omega_hat) };
    if r_hat == 1.0 {
        return Ok(tilted);
    }
    if let Some((scale, rate)) = tilted.as_constant_exponential() {
        return WeightSpec::constant_exponential(scale, rate / r_hat);
    }
    tilted.time_scaled(1.0 / r_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8};

    fn unit() -> WeightSpec {
        WeightSpec::unit()
    }

    fn cot(x: f64) -> f64 {
        1.0 / x.tan()
    }

    #[test]
    fn unit_weight_is_cotangent() {
        let sol = solve_riccati(&unit(), 2.0, 1.2).unwrap();
        assert_relative_eq!(sol.psi(FRAC_PI_6).unwrap(), 3f64.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(sol.psi(FRAC_PI_4).unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(sol.crossing().unwrap(), FRAC_PI_4, epsilon = 1e-11);
        let sol = solve_riccati(&unit(), 3.0, 1.0).unwrap();
        assert_relative_eq!(sol.psi(0.2).unwrap(), cot(0.2) / 2.0, max_relative = 1e-10);
        assert_relative_eq!(sol.psi(0.2).unwrap(), 2.4665, epsilon = 1e-4);
    }

    #[test]
    fn blow_up_after_crossing_truncates() {
        let sol = solve_riccati(&unit(), 2.0, 3.0).unwrap();
        assert!(sol.horizon() < FRAC_PI_2);
        assert!(sol.horizon() > FRAC_PI_2 - 1e-3);
        assert!(sol.psi(2.0).is_err());
    }

    #[test]
    fn critical_length_closed_forms() {
        let a = critical_length(&unit(), 2.0).unwrap().value();
        assert_relative_eq!(a, FRAC_PI_4, epsilon = 1e-10);
        let a = critical_length(&unit(), 3.0).unwrap().value();
        assert_relative_eq!(a, 0.5f64.atan(), epsilon = 1e-10);
        let a = critical_length(&unit(), 1.01).unwrap().value();
        assert_relative_eq!(a, 100f64.atan(), epsilon = 1e-10);
        let mut prev = f64::INFINITY;
        for p in [1.5, 2.0, 3.0, 5.0] {
            let a = critical_length(&unit(), p).unwrap().value();
            assert_relative_eq!(a, (1.0 / (p - 1.0)).atan(), epsilon = 1e-8);
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn critical_length_infinite_and_undetermined() {
        // μ = -2, p = 2: w' = (w - w₋)(w - w₊) with w₋ = 2 - √3 < 1 attracting.
        let m = WeightSpec::constant_exponential(1.0, -2.0).unwrap();
        assert_eq!(critical_length(&m, 2.0).unwrap(), CriticalLength::Infinite);
        // μ = -1: w → 1 only algebraically, still rising at the cap.
        let m = WeightSpec::constant_exponential(1.0, -1.0).unwrap();
        assert!(matches!(critical_length(&m, 2.0), Err(Error::Undetermined { .. })));
    }

    #[test]
    fn variational_values() {
        assert_relative_eq!(i_inf(&unit(), 2.0, FRAC_PI_4).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(i_inf(&unit(), 2.0, FRAC_PI_6).unwrap(), 3f64.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(i_inf(&unit(), 2.0, FRAC_PI_8).unwrap(), 1.0 + 2f64.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(j_sup(&unit(), 2.0, FRAC_PI_4).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(j_sup(&unit(), 2.0, FRAC_PI_6).unwrap(), FRAC_PI_6.tan(), max_relative = 1e-10);
        assert_relative_eq!(j_sup(&unit(), 2.0, FRAC_PI_8).unwrap(), FRAC_PI_8.tan(), max_relative = 1e-10);
        assert!(matches!(i_inf(&unit(), 2.0, 1.0), Err(Error::BeyondCriticalLength { .. })));
        assert!(matches!(j_sup(&unit(), 2.0, 0.9), Err(Error::BeyondCriticalLength { .. })));
    }

    #[test]
    fn harmonic_profiles_match_trig_closed_forms() {
        let sol = solve_riccati(&unit(), 2.0, 1.0).unwrap();
        let (a, b) = (0.6, 0.5);
        for s in [0.05, 0.3, 0.5] {
            assert_relative_eq!(sol.harmonic_u(a, s).unwrap(), s.sin() / a.sin(), max_relative = 1e-8);
            assert_relative_eq!(sol.harmonic_theta(b, s).unwrap(), s.cos() / b.cos(), max_relative = 1e-8);
        }
    }

    #[test]
    fn rescale_examples() {
        let r = rescale(&unit(), 0.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(r.a_star().value(), FRAC_PI_4, epsilon = 1e-10);
        assert_relative_eq!(r.psi(0.3).unwrap(), cot(0.3), max_relative = 1e-10);
        let r = rescale(&unit(), 0.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(r.a_star().value(), FRAC_PI_8, epsilon = 1e-10);
        assert_relative_eq!(r.psi(0.2).unwrap(), cot(0.4), max_relative = 1e-10);
        let m = WeightSpec::constant_exponential(3.0, 0.7).unwrap();
        let r = rescale(&m, 0.7, 1.0, 2.0).unwrap();
        assert_relative_eq!(r.a_star().value(), FRAC_PI_4, epsilon = 1e-10);
        assert_relative_eq!(r.psi(0.5).unwrap(), cot(0.5), max_relative = 1e-10);
    }

    #[test]
    fn rescale_uses_the_time_scaled_weight() {
        // m̂(t) = 1 + t is not invariant under time scaling, so ψ̂(ŝ) must be
        // ψ(r̂ŝ) for m̂(·/r̂), not for m̂ itself.
        let m = WeightSpec::tabulate(0.0, 20.0, 4001, |t| 1.0 + t * t).unwrap();
        let r_hat = 2.0;
        let r = rescale(&m, 0.0, r_hat, 2.0).unwrap();
        let direct = solve_riccati(&m.clone().time_scaled(0.5).unwrap(), 2.0, 1.0).unwrap();
        assert_relative_eq!(r.psi(0.2).unwrap(), direct.psi(0.4).unwrap(), max_relative = 1e-10);
    }
}
