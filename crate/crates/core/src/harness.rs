//! Exact semigroup norms for matrix generators, scenario families with fitted
//! majorants, and certification of every bound against the exact norm.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, fmt_sig, BoundKind, BoundReport, Certification, Growth, OptimizeOptions, Verdict};
use crate::domain::{BoundParams, SemigroupSystem, WeightSpec};
use crate::error::{Error, Result};
use crate::koperator::{self, EstimateKind};
use crate::linalg::{self, PNormOptions};

/// Relative slack allowed before a bound counts as violated.
pub const CERT_SLACK: f64 = 1e-6;
/// Relative slack of the majorant admissibility check.
pub const ADMISSIBILITY_SLACK: f64 = 1e-9;
/// Samples of the admissibility grid on `[0, max t]`.
pub const ADMISSIBILITY_NODES: usize = 2048;
/// `λ = spectral abscissa + GROWTH_MARGIN` for fitted majorants.
pub const GROWTH_MARGIN: f64 = 0.1;
/// `ω = spectral abscissa + OMEGA_MARGIN` for scenario parameters.
pub const OMEGA_MARGIN: f64 = 0.05;

/// Horizon and grid size of the Volterra estimate of `K` when `p ≠ 2`.
const K_HORIZON: f64 = 50.0;
const K_NODES: usize = 1024;

/// `‖e^{tA}‖` in the induced `p`-norm: exact for `p ∈ {1, 2, ∞}`, a
/// power-method lower estimate otherwise (see [`norm_is_exact`]).
pub fn semigroup_norm(sys: &SemigroupSystem, p: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be nonnegative and finite, got {t}")));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("norm exponent must satisfy p >= 1, got {p}")));
    }
    Ok(linalg::induced_norm(&sys.propagator(t), p, &PNormOptions::default())?.0)
}

pub fn norm_is_exact(p: f64) -> bool {
    p == 1.0 || p == 2.0 || p == f64::INFINITY
}

/// `K_{ω,p}`: the resolvent supremum for `p = 2` (exact by Plancherel), the
/// Volterra power-method lower estimate otherwise.
pub fn k_constant(sys: &SemigroupSystem, omega: f64, p: f64) -> Result<(f64, EstimateKind)> {
    if p == 2.0 {
        let sup = koperator::resolvent_sup(sys, omega, &koperator::default_frequency_grid(sys, omega))?;
        Ok((sup.value, EstimateKind::CertifiedP2))
    } else {
        let est = koperator::estimate_k(sys, omega, p, K_HORIZON, K_NODES)?;
        Ok((est.value, est.kind))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ScalarStable,
    Jordan,
    RandomStable,
    RotationDamped,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::ScalarStable,
        ScenarioKind::Jordan,
        ScenarioKind::RandomStable,
        ScenarioKind::RotationDamped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::ScalarStable => "scalar-stable",
            ScenarioKind::Jordan => "jordan",
            ScenarioKind::RandomStable => "random-stable",
            ScenarioKind::RotationDamped => "rotation-damped",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario kind {s:?}")))
    }
}

/// A generator with an admissible majorant and the bound parameters.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub label: String,
    pub system: SemigroupSystem,
    pub majorant: WeightSpec,
    pub params: BoundParams,
    pub t_grid: Vec<f64>,
    /// How `params.k_const` was obtained.
    pub k_kind: EstimateKind,
}

impl Scenario {
    /// Checks `‖e^{tA}‖ ≤ m(t)(1 + 1e-9)` on the admissibility grid.
    pub fn new(
        system: SemigroupSystem,
        majorant: WeightSpec,
        params: BoundParams,
        t_grid: Vec<f64>,
        k_kind: EstimateKind,
    ) -> Result<Self> {
        majorant.validate()?;
        if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("t_grid must be a nonempty list of nonnegative times"));
        }
        let sc = Scenario {
            label: system.label().to_string(),
            system,
            majorant,
            params,
            t_grid,
            k_kind,
        };
        sc.check_admissible()?;
        Ok(sc)
    }

    fn horizon(&self) -> f64 {
        self.t_grid.iter().copied().fold(0.0, f64::max)
    }

    fn admissibility_grid(&self) -> Vec<f64> {
        let hi = self.horizon().max(1e-12);
        (0..ADMISSIBILITY_NODES)
            .map(|i| hi * i as f64 / (ADMISSIBILITY_NODES - 1) as f64)
            .collect()
    }

    pub fn check_admissible(&self) -> Result<()> {
        for t in self.admissibility_grid() {
            let norm = semigroup_norm(&self.system, self.params.p, t)?;
            let bound = self.majorant.eval(t)?;
            if norm > bound * (1.0 + ADMISSIBILITY_SLACK) {
                return Err(Error::InadmissibleMajorant { t, norm, bound });
            }
        }
        Ok(())
    }

    /// `‖e^{tA}‖ ≤ 1` on the admissibility grid.
    pub fn is_contraction(&self) -> Result<bool> {
        for t in self.admissibility_grid() {
            if semigroup_norm(&self.system, self.params.p, t)? > 1.0 + ADMISSIBILITY_SLACK {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(L, λ)` when the majorant is `L e^{λt}`.
    pub fn growth(&self) -> Option<(f64, f64)> {
        self.majorant.as_constant_exponential()
    }
}

/// Generator of each family. Deterministic in `(kind, dim, seed)`.
pub fn scenario_generator(kind: ScenarioKind, dim: usize, seed: u64) -> Result<SemigroupSystem> {
    if dim == 0 {
        return Err(Error::invalid("scenario dimension must be positive"));
    }
    let label = format!("{kind}-{dim}");
    let z = |x: f64| Complex64::new(x, 0.0);
    let a = match kind {
        // A = diag(-γ_k), γ_k = 1 + k/2.
        ScenarioKind::ScalarStable => DMatrix::from_fn(dim, dim, |i, j| if i == j { z(-1.0 - 0.5 * i as f64) } else { z(0.0) }),
        ScenarioKind::Jordan => DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                z(-1.0)
            } else if j == i + 1 {
                z(1.0)
            } else {
                z(0.0)
            }
        }),
        ScenarioKind::RandomStable => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = 1.0 / (dim as f64).sqrt();
            let g = DMatrix::from_fn(dim, dim, |_, _| {
                let v: f64 = StandardNormal.sample(&mut rng);
                z(v * scale)
            });
            let abscissa = linalg::eigenvalues(&g).iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            g - DMatrix::identity(dim, dim) * z(abscissa + 0.5)
        }
        // Blocks [[-1/2, 5k], [-5k, -1/2]], k = 1, 2, ...; a trailing -1/2 for odd dim.
        ScenarioKind::RotationDamped => {
            let mut m = DMatrix::from_element(dim, dim, z(0.0));
            for i in 0..dim {
                m[(i, i)] = z(-0.5);
            }
            for k in 0..dim / 2 {
                let freq = 5.0 * (k + 1) as f64;
                m[(2 * k, 2 * k + 1)] = z(freq);
                m[(2 * k + 1, 2 * k)] = z(-freq);
            }
            m
        }
    };
    SemigroupSystem::new(a, label)
}

/// Largest `‖e^{tA}‖ e^{-λt}` on `[0, horizon]`: a uniform scan followed by
/// golden-section refinement around every sampled local maximum.
pub fn fit_growth_constant(sys: &SemigroupSystem, p: f64, lambda: f64, horizon: f64) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(semigroup_norm(sys, p, t)? * (-lambda * t).exp()) };
    let n = ADMISSIBILITY_NODES;
    let grid: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
    let vals = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for i in 1..n - 1 {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
            while hi - lo > 1e-10 * horizon {
                let m1 = hi - 0.618_033_988_749_895 * (hi - lo);
                let m2 = lo + 0.618_033_988_749_895 * (hi - lo);
                if f(m1)? >= f(m2)? {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.max(f(0.5 * (lo + hi))?);
        }
    }
    Ok(best)
}

/// Knobs of [`make_scenario_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOptions {
    pub p: f64,
    pub t_grid: Vec<f64>,
    /// Horizon of the majorant fit; the admissibility grid covers `t_grid`.
    pub fit_horizon: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            p: 2.0,
            t_grid: (0..24).map(|i| 0.5 + 0.5 * i as f64).collect(),
            fit_horizon: 80.0,
        }
    }
}

/// Scenario with majorant `L e^{λt}`, `λ = abscissa + 0.1`, and
/// `ω = abscissa + 0.05`.
pub fn make_scenario(kind: ScenarioKind, dim: usize, seed: u64) -> Result<Scenario> {
    make_scenario_with(kind, dim, seed, &ScenarioOptions::default())
}

pub fn make_scenario_with(kind: ScenarioKind, dim: usize, seed: u64, opts: &ScenarioOptions) -> Result<Scenario> {
    let sys = scenario_generator(kind, dim, seed)?;
    let abscissa = sys.spectral_abscissa();
    let lambda = abscissa + GROWTH_MARGIN;
    let t_max = opts.t_grid.iter().copied().fold(0.0, f64::max);
    let l = fit_growth_constant(&sys, opts.p, lambda, opts.fit_horizon.max(t_max))? * (1.0 + 1e-8);
    let majorant = WeightSpec::constant_exponential(l, lambda)?;
    let omega = abscissa + OMEGA_MARGIN;
    let (k, k_kind) = k_constant(&sys, omega, opts.p)?;
    let mut params = BoundParams::new(omega, opts.p)?.with_k(k)?;
    if opts.p == 2.0 {
        params = params.with_r(1.0 / k)?;
    }
    Scenario::new(sys, majorant, params, opts.t_grid.clone(), k_kind)
}

/// Evaluates the optimized `kind` bound on the scenario grid and compares it
/// with the exact norm. `wei` runs with `m ≡ 1`, `ω = 0` and is only
/// available for contractions.
pub fn verify_bound(scenario: &Scenario, kind: BoundKind) -> Result<BoundReport> {
    verify_bound_with(scenario, kind, &OptimizeOptions::default())
}

pub fn verify_bound_with(scenario: &Scenario, kind: BoundKind, opts: &OptimizeOptions) -> Result<BoundReport> {
    let p = scenario.params.p;
    let (mut params, mut k_kind) = (scenario.params.clone(), scenario.k_kind);
    if params.k_const.is_none() {
        let (k, kind) = k_constant(&scenario.system, params.omega, p)?;
        params = params.with_k(k)?;
        k_kind = kind;
    }
    let mut report = match kind {
        BoundKind::Wei => {
            if !scenario.is_contraction()? {
                return Err(Error::EmptyAdmissibleSet(format!(
                    "{} is not a contraction, the wei bound does not apply",
                    scenario.label
                )));
            }
            let (k0, kind0) = k_constant(&scenario.system, 0.0, p)?;
            k_kind = kind0;
            let params0 = BoundParams::new(0.0, p)?.with_k(k0)?;
            bounds::bound_report(kind, &WeightSpec::unit(), &params0, Growth::default(), &scenario.t_grid, opts)?
        }
        _ => {
            let times: Vec<f64> = scenario.t_grid.iter().copied().filter(|&t| t > 0.0 || !kind.has_free_pair()).collect();
            if times.is_empty() {
                return Err(Error::EmptyAdmissibleSet(format!("no positive time for the {kind} bound")));
            }
            let growth = Growth {
                exponential: scenario.growth(),
            };
            bounds::bound_report(kind, &scenario.majorant, &params, growth, &times, opts)?
        }
    };
    let conditional = k_kind == EstimateKind::LowerEstimate;
    let mut rows = Vec::with_capacity(report.t_grid.len());
    for (&t, &bound) in report.t_grid.iter().zip(&report.values) {
        let exact = semigroup_norm(&scenario.system, p, t)?;
        let pass = exact <= bound * (1.0 + CERT_SLACK);
        let verdict = match (pass, conditional) {
            (true, false) => Verdict::Pass,
            (false, false) => Verdict::Fail,
            (true, true) => Verdict::ConditionalPass,
            (false, true) => Verdict::ConditionalFail,
        };
        rows.push(Certification {
            exact,
            ratio: exact / bound,
            verdict,
        });
    }
    if conditional {
        report.notes.push("K is a power-method lower estimate; verdicts are conditional".into());
    }
    report.certification = Some(rows);
    Ok(report)
}

/// Overall verdict of a certified report: every row must pass.
pub fn report_passes(report: &BoundReport) -> bool {
    report
        .certification
        .as_ref()
        .is_some_and(|rows| rows.iter().all(|r| r.verdict.passed()))
}

/// Header `scenario,kind,t,exact,bound,ratio,verdict` and one row per
/// certified time.
pub fn write_certification_csv(reports: &[(String, BoundReport)], out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::invalid(format!("write failed: {e}"));
    writeln!(out, "scenario,kind,t,exact,bound,ratio,verdict").map_err(io)?;
    for (label, rep) in reports {
        let rows = rep.certification.as_deref().unwrap_or(&[]);
        for ((t, bound), c) in rep.t_grid.iter().zip(&rep.values).zip(rows) {
            writeln!(
                out,
                "{label},{},{},{},{},{},{}",
                rep.kind,
                fmt_sig(*t),
                fmt_sig(c.exact),
                fmt_sig(*bound),
                fmt_sig(c.ratio),
                c.verdict
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
