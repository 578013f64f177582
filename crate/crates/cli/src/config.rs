//! Run configuration: a TOML file with a `command` key and one section per
//! stage. Unknown keys are rejected. [`Config::resolve`] fills every default
//! and inlines file references, so the resolved form reproduces a run on its
//! own.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use decaybound::bounds::BoundKind;
use decaybound::harness::ScenarioKind;
use decaybound::WeightSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bound,
    Riccati,
    Koperator,
    Certify,
    Sweep,
    /// `bound` with `m ≡ 1`, `ω = 0` and only the uniform contraction estimate.
    Wei,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Riccati => "riccati",
            Command::Koperator => "koperator",
            Command::Certify => "certify",
            Command::Sweep => "sweep",
            Command::Wei => "wei",
        }
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Bound => &["weight", "params", "times", "bound"],
            Command::Riccati => &["weight", "riccati"],
            Command::Koperator => &["system", "koperator"],
            Command::Certify => &["certify", "times"],
            Command::Sweep => &["weight", "params", "times", "sweep"],
            Command::Wei => &["wei", "times"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<TimesConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati: Option<RiccatiConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub koperator: Option<KoperatorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wei: Option<WeiConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightConfig {
    ConstantExponential {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        rate: f64,
        /// Multiplies the weight by `e^{-tilt·t}`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tilt: Option<f64>,
    },
    /// Either `file` (two-column text, relative to the config) or inline
    /// `grid` and `values`.
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tilt: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

fn two() -> f64 {
    2.0
}

/// Either explicit `values` or `count` uniform points of `[start, stop]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub kinds: Vec<String>,
    /// `[L, λ]` with `‖S(t)‖ ≤ L e^{λt}`, needed by `ly`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<[f64; 2]>,
    /// Fixed lengths instead of the optimized pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiConfig {
    #[serde(default = "two")]
    pub p: f64,
    /// End of the sampled `ψ` curve; defaults to `a*` (or the horizon).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Real generator rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoperatorConfig {
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "yes")]
    pub resolvent: bool,
    #[serde(default)]
    pub duality: bool,
}

fn default_horizon() -> f64 {
    50.0
}

fn default_nodes() -> usize {
    1024
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub scenario: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub kinds: Vec<String>,
    #[serde(default = "two")]
    pub p: f64,
}

fn default_dim() -> usize {
    2
}

/// Cartesian sweep of one bound kind. Axes left out take the `[params]`
/// value; `t` defaults to `[times]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeiConfig {
    pub rhat: f64,
}

/// Upper limit on time samples and sweep cells, keeping runs bounded.
pub const MAX_POINTS: usize = 100_000;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_finite(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

fn check_list(name: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if xs.len() > MAX_POINTS {
        return Err(invalid(format!("{name} has {} entries, above the limit {MAX_POINTS}", xs.len())));
    }
    xs.iter().try_for_each(|&x| check_finite(name, x))
}

pub fn parse_kinds(names: &[String]) -> Result<Vec<BoundKind>, CliError> {
    if names.is_empty() {
        return Err(invalid("kinds must not be empty"));
    }
    names
        .iter()
        .map(|n| BoundKind::from_str(n).map_err(|_| invalid(format!("unknown bound kind {n:?}"))))
        .collect()
}

pub fn parse_scenario(name: &str) -> Result<ScenarioKind, CliError> {
    ScenarioKind::from_str(name).map_err(|_| invalid(format!("unknown scenario {name:?}")))
}

impl Config {
    /// Parses and checks the structure without touching the filesystem.
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("weight", self.weight.is_some()),
            ("params", self.params.is_some()),
            ("times", self.times.is_some()),
            ("bound", self.bound.is_some()),
            ("riccati", self.riccati.is_some()),
            ("system", self.system.is_some()),
            ("koperator", self.koperator.is_some()),
            ("certify", self.certify.is_some()),
            ("sweep", self.sweep.is_some()),
            ("wei", self.wei.is_some()),
        ];
        for (name, on) in flags {
            if on {
                out.push(name);
            }
        }
        out
    }

    fn require<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section
            .as_ref()
            .ok_or_else(|| invalid(format!("command {} needs a [{name}] section", self.command)))
    }

    fn check(&self) -> Result<(), CliError> {
        let allowed = self.command.sections();
        if let Some(extra) = self.present().into_iter().find(|s| !allowed.contains(s)) {
            return Err(invalid(format!("section [{extra}] is not used by command {}", self.command)));
        }
        if let Some(w) = &self.weight {
            w.check()?;
        }
        if let Some(p) = &self.params {
            p.check()?;
        }
        if let Some(t) = &self.times {
            t.check()?;
        }
        match self.command {
            Command::Bound => {
                self.require(&self.weight, "weight")?;
                self.require(&self.params, "params")?;
                self.require(&self.times, "times")?;
                let b = self.require(&self.bound, "bound")?;
                let kinds = parse_kinds(&b.kinds)?;
                if let Some([l, lambda]) = b.growth {
                    check_finite("growth L", l)?;
                    check_finite("growth lambda", lambda)?;
                }
                match (b.a, b.b) {
                    (None, None) => {}
                    (Some(a), Some(bb)) => {
                        check_finite("a", a)?;
                        check_finite("b", bb)?;
                        if let Some(k) = kinds.iter().find(|k| !k.has_free_pair()) {
                            return Err(invalid(format!("kind {k} has no free lengths, drop a and b")));
                        }
                    }
                    _ => return Err(invalid("set both a and b or neither")),
                }
            }
            Command::Riccati => {
                self.require(&self.weight, "weight")?;
                let r = self.require(&self.riccati, "riccati")?;
                check_finite("riccati.p", r.p)?;
                if let Some(s) = r.s_max {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(invalid(format!("riccati.s_max must be positive, got {s}")));
                    }
                }
                if r.samples < 2 || r.samples > MAX_POINTS {
                    return Err(invalid(format!("riccati.samples must lie in [2, {MAX_POINTS}]")));
                }
            }
            Command::Koperator => {
                self.require(&self.system, "system")?.check()?;
                let k = self.require(&self.koperator, "koperator")?;
                check_finite("koperator.omega", k.omega)?;
                check_finite("koperator.p", k.p)?;
                if !(k.horizon.is_finite() && k.horizon > 0.0) {
                    return Err(invalid("koperator.horizon must be positive"));
                }
                if k.nodes < 2 || k.nodes > MAX_POINTS {
                    return Err(invalid(format!("koperator.nodes must lie in [2, {MAX_POINTS}]")));
                }
            }
            Command::Certify => {
                let c = self.require(&self.certify, "certify")?;
                parse_scenario(&c.scenario)?;
                parse_kinds(&c.kinds)?;
                check_finite("certify.p", c.p)?;
                if c.dim == 0 || c.dim > 64 {
                    return Err(invalid("certify.dim must lie in [1, 64]"));
                }
            }
            Command::Sweep => {
                self.require(&self.weight, "weight")?;
                self.require(&self.params, "params")?;
                let s = self.require(&self.sweep, "sweep")?;
                parse_kinds(std::slice::from_ref(&s.kind))?;
                let axes = [("sweep.p", &s.p), ("sweep.omega", &s.omega), ("sweep.k", &s.k), ("sweep.t", &s.t)];
                let mut cells = 1usize;
                for (name, axis) in axes {
                    if let Some(xs) = axis {
                        check_list(name, xs)?;
                        cells = cells.saturating_mul(xs.len());
                    }
                }
                if s.t.is_none() {
                    self.require(&self.times, "times")?;
                }
                if cells > MAX_POINTS {
                    return Err(invalid(format!("sweep has {cells} cells, above the limit {MAX_POINTS}")));
                }
            }
            Command::Wei => {
                self.require(&self.times, "times")?;
                let w = self.require(&self.wei, "wei")?;
                if !(w.rhat.is_finite() && w.rhat > 0.0) {
                    return Err(invalid(format!("wei.rhat must be positive, got {}", w.rhat)));
                }
            }
        }
        Ok(())
    }

    /// Inlines weight files (relative to `base`) and expands time ranges.
    pub fn resolve(mut self, base: &Path) -> Result<Config, CliError> {
        if let Some(w) = self.weight.take() {
            self.weight = Some(w.resolve(base)?);
        }
        if let Some(t) = self.times.take() {
            self.times = Some(TimesConfig {
                values: Some(t.grid()?),
                start: None,
                stop: None,
                count: None,
            });
        }
        self.check()?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// First 16 hex digits of the SHA-256 of the serialized configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn time_grid(&self) -> Result<Vec<f64>, CliError> {
        self.require(&self.times, "times")?.grid()
    }

    pub fn weight_spec(&self) -> Result<WeightSpec, CliError> {
        self.require(&self.weight, "weight")?.spec()
    }
}

impl WeightConfig {
    fn check(&self) -> Result<(), CliError> {
        match self {
            WeightConfig::ConstantExponential { scale, rate, tilt } => {
                check_finite("weight.rate", *rate)?;
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid(format!("weight.scale must be positive, got {scale}")));
                }
                tilt.map_or(Ok(()), |s| check_finite("weight.tilt", s))
            }
            WeightConfig::Tabulated {
                file,
                grid,
                values,
                tilt,
            } => {
                match (file, grid, values) {
                    (Some(_), None, None) => {}
                    (None, Some(g), Some(v)) => {
                        if g.len() > MAX_POINTS {
                            return Err(invalid("weight table is too long"));
                        }
                        WeightSpec::tabulated(g.clone(), v.clone()).map_err(|e| invalid(e.to_string()))?;
                    }
                    _ => return Err(invalid("tabulated weight needs either file or both grid and values")),
                }
                tilt.map_or(Ok(()), |s| check_finite("weight.tilt", s))
            }
        }
    }

    fn resolve(self, base: &Path) -> Result<WeightConfig, CliError> {
        match self {
            WeightConfig::Tabulated {
                file: Some(file),
                tilt,
                ..
            } => {
                let path = base.join(&file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| invalid(format!("cannot read weight table {}: {e}", path.display())))?;
                let spec = WeightSpec::parse_table(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                let WeightSpec::Tabulated(table) = spec else {
                    unreachable!("parse_table returns a table")
                };
                Ok(WeightConfig::Tabulated {
                    file: None,
                    grid: Some(table.grid().to_vec()),
                    values: Some(table.values().to_vec()),
                    tilt,
                })
            }
            other => Ok(other),
        }
    }

    /// Needs a resolved configuration for tables.
    pub fn spec(&self) -> Result<WeightSpec, CliError> {
        let (base, tilt) = match self {
            WeightConfig::ConstantExponential { scale, rate, tilt } => {
                (WeightSpec::constant_exponential(*scale, *rate)?, *tilt)
            }
            WeightConfig::Tabulated {
                grid: Some(g),
                values: Some(v),
                tilt,
                ..
            } => (WeightSpec::tabulated(g.clone(), v.clone())?, *tilt),
            WeightConfig::Tabulated { .. } => return Err(invalid("weight table file was not resolved")),
        };
        Ok(match tilt {
            Some(s) if s != 0.0 => base.tilt(s),
            _ => base,
        })
    }
}

impl ParamsConfig {
    fn check(&self) -> Result<(), CliError> {
        check_finite("params.omega", self.omega)?;
        check_finite("params.p", self.p)?;
        for (name, x) in [("params.k", self.k), ("params.r", self.r)] {
            if let Some(x) = x {
                if !(x.is_finite() && x > 0.0) {
                    return Err(invalid(format!("{name} must be positive, got {x}")));
                }
            }
        }
        Ok(())
    }
}

impl TimesConfig {
    fn check(&self) -> Result<(), CliError> {
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(count)) => {
                check_finite("times.start", start)?;
                check_finite("times.stop", stop)?;
                if count == 0 || count > MAX_POINTS {
                    return Err(invalid(format!("times.count must lie in [1, {MAX_POINTS}]")));
                }
                if count == 1 {
                    vec![start]
                } else {
                    if !(stop > start) {
                        return Err(invalid("times.stop must exceed times.start"));
                    }
                    (0..count)
                        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                        .collect()
                }
            }
            _ => return Err(invalid("[times] needs either values or start, stop and count")),
        };
        check_list("times", &grid)?;
        if let Some(t) = grid.iter().find(|t| **t < 0.0) {
            return Err(invalid(format!("times must be nonnegative, got {t}")));
        }
        Ok(grid)
    }
}

impl SystemConfig {
    fn check(&self) -> Result<(), CliError> {
        match (&self.scenario, self.dim, &self.matrix) {
            (Some(s), _, None) => {
                parse_scenario(s)?;
                if let Some(d) = self.dim {
                    if d == 0 || d > 64 {
                        return Err(invalid("system.dim must lie in [1, 64]"));
                    }
                }
                Ok(())
            }
            (None, None, Some(rows)) => {
                let n = rows.len();
                if n == 0 || n > 64 || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("system.matrix must be a square list of rows, at most 64 x 64"));
                }
                rows.iter().flatten().try_for_each(|&x| check_finite("system.matrix", x))
            }
            _ => Err(invalid("[system] needs either scenario (with optional dim) or matrix")),
        }
    }
}
