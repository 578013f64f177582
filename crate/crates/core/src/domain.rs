//! Shared domain types: majorant weights, matrix generators, bound parameters
//! and sampled grid functions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive majorant `m(t)` for `‖S(t)‖`.
///
/// Every kind is evaluated through `ln m`, which keeps large exponents finite
/// until the caller decides how to combine them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `m(t) = scale · e^{rate·t}`.
    ConstantExponential { scale: f64, rate: f64 },
    /// Samples interpolated linearly in `ln m`.
    Tabulated(Table),
    /// `m(t) = e^{-shift·t} · base(t)`.
    Tilt { base: Box<WeightSpec>, shift: f64 },
    /// `m(t) = base(factor·t)`.
    TimeScaled { base: Box<WeightSpec>, factor: f64 },
}

/// Tabulated majorant samples. The grid is strictly increasing with at least
/// two nodes and every value is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    grid: Vec<f64>,
    values: Vec<f64>,
    logs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for Table {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        Table::new(raw.grid, raw.values)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable {
            grid: t.grid,
            values: t.values,
        }
    }
}

impl Table {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "tabulated weight has {} grid nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(format!(
                "tabulated weight value {v} at node {i} is not positive"
            )));
        }
        let logs = values.iter().map(|v| v.ln()).collect();
        Ok(Table { grid, values, logs })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn lo(&self) -> f64 {
        self.grid[0]
    }

    fn hi(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn ln_value(&self, t: f64) -> Result<f64> {
        let i = locate(&self.grid, t).ok_or(Error::OutsideDomain {
            t,
            lo: self.lo(),
            hi: self.hi(),
        })?;
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - g0) / (g1 - g0);
        Ok(self.logs[i] + w * (self.logs[i + 1] - self.logs[i]))
    }

    /// Two-point centered difference of `ln m` with the local grid spacing as
    /// step, clamped to stay inside the table. With `closed`, the end nodes
    /// are accepted and get one-sided differences.
    fn log_derivative(&self, t: f64, closed: bool) -> Result<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        let inside = if closed { t >= lo && t <= hi } else { t > lo && t < hi };
        if !inside {
            return Err(Error::OutsideDomain { t, lo, hi });
        }
        let i = locate(&self.grid, t).expect("checked above");
        let h = self.grid[i + 1] - self.grid[i];
        let up = h.min(hi - t);
        let down = h.min(t - lo);
        Ok((self.ln_value(t + up)? - self.ln_value(t - down)?) / (up + down))
    }
}

/// Index `i` with `grid[i] <= t <= grid[i+1]`, or `None` outside the grid.
pub(crate) fn locate(grid: &[f64], t: f64) -> Option<usize> {
    let n = grid.len();
    if !(t >= grid[0] && t <= grid[n - 1]) {
        return None;
    }
    let i = grid.partition_point(|g| *g <= t);
    Some(i.saturating_sub(1).min(n - 2))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid needs at least two nodes"));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("grid contains non-finite nodes"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid is not strictly increasing"));
    }
    Ok(())
}

impl WeightSpec {
    pub fn constant_exponential(scale: f64, rate: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!(
                "constant-exponential weight needs scale > 0 and finite rate, got ({scale}, {rate})"
            )));
        }
        Ok(WeightSpec::ConstantExponential { scale, rate })
    }

    /// `m ≡ 1`.
    pub fn unit() -> Self {
        WeightSpec::ConstantExponential {
            scale: 1.0,
            rate: 0.0,
        }
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(WeightSpec::Tabulated(Table::new(grid, values)?))
    }

    /// Reads a two-column `t m(t)` table. Columns are separated by commas
    /// or whitespace, `#` starts a comment, and a single non-numeric header
    /// line is skipped if it comes before the data.
    pub fn parse_table(text: &str) -> Result<Self> {
        let (mut grid, mut values) = (Vec::new(), Vec::new());
        let mut header_seen = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
            match parsed {
                Some(row) if row.len() == 2 => {
                    grid.push(row[0]);
                    values.push(row[1]);
                }
                None if grid.is_empty() && !header_seen => header_seen = true,
                _ => {
                    return Err(Error::invalid(format!(
                        "weight table line {}: expected two numbers, got {line:?}",
                        no + 1
                    )))
                }
            }
        }
        Self::tabulated(grid, values)
    }

    /// Samples `f` on `nodes` uniform points of `[lo, hi]`.
    pub fn tabulate(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::invalid("tabulation needs at least two nodes"));
        }
        let grid: Vec<f64> = (0..nodes)
            .map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64)
            .collect();
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::tabulated(grid, values)
    }

    /// `e^{-shift·t} · self`. Nested tilts are merged so that tilting twice is
    /// the same weight as tilting once by the summed shift.
    pub fn tilt(self, shift: f64) -> Self {
        match self {
            WeightSpec::Tilt { base, shift: s0 } => WeightSpec::Tilt {
                base,
                shift: s0 + shift,
            },
            other => WeightSpec::Tilt {
                base: Box::new(other),
                shift,
            },
        }
    }

    /// `t ↦ self(factor·t)`.
    pub fn time_scaled(self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!(
                "time scale factor must be positive, got {factor}"
            )));
        }
        Ok(WeightSpec::TimeScaled {
            base: Box::new(self),
            factor,
        })
    }

    /// Checks the invariants of deserialized or hand-built values.
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::ConstantExponential { scale, rate } => {
                Self::constant_exponential(*scale, *rate).map(|_| ())
            }
            WeightSpec::Tabulated(_) => Ok(()),
            WeightSpec::Tilt { base, shift } => {
                if !shift.is_finite() {
                    return Err(Error::invalid("tilt shift must be finite"));
                }
                base.validate()
            }
            WeightSpec::TimeScaled { base, factor } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(Error::invalid("time scale factor must be positive"));
                }
                base.validate()
            }
        }
    }

    /// Closed domain `[lo, hi]` on which the weight is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            WeightSpec::ConstantExponential { .. } => (0.0, f64::INFINITY),
            WeightSpec::Tabulated(t) => (t.lo().max(0.0), t.hi()),
            WeightSpec::Tilt { base, .. } => base.domain(),
            WeightSpec::TimeScaled { base, factor } => {
                let (lo, hi) = base.domain();
                (lo / factor, hi / factor)
            }
        }
    }

    /// Smallest node spacing of any table inside the weight, in its own time
    /// variable; `None` for closed-form weights.
    pub fn resolution(&self) -> Option<f64> {
        match self {
            WeightSpec::ConstantExponential { .. } => None,
            WeightSpec::Tabulated(t) => t.grid.windows(2).map(|w| w[1] - w[0]).reduce(f64::min),
            WeightSpec::Tilt { base, .. } => base.resolution(),
            WeightSpec::TimeScaled { base, factor } => base.resolution().map(|h| h / factor),
        }
    }

    /// True when `m` is constant and equal to one.
    pub fn is_unit(&self) -> bool {
        matches!(self, WeightSpec::ConstantExponential { scale, rate } if *scale == 1.0 && *rate == 0.0)
    }

    pub fn ln_value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::OutsideDomain {
                t,
                lo: 0.0,
                hi: self.domain().1,
            });
        }
        match self {
            WeightSpec::ConstantExponential { scale, rate } => Ok(scale.ln() + rate * t),
            WeightSpec::Tabulated(table) => table.ln_value(t),
            WeightSpec::Tilt { base, shift } => Ok(base.ln_value(t)? - shift * t),
            WeightSpec::TimeScaled { base, factor } => base.ln_value(factor * t),
        }
    }

    /// `m(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.ln_value(t)?.exp())
    }

    /// `μ(t) = m'(t)/m(t)`.
    pub fn log_derivative(&self, t: f64) -> Result<f64> {
        self.log_derivative_in(t, false)
    }

    /// Like [`log_derivative`](Self::log_derivative) but also defined at the
    /// ends of a table, where the ODE solvers sample their last step.
    pub(crate) fn log_derivative_closed(&self, t: f64) -> Result<f64> {
        self.log_derivative_in(t, true)
    }

    fn log_derivative_in(&self, t: f64, closed: bool) -> Result<f64> {
        match self {
            WeightSpec::ConstantExponential { rate, .. } => {
                if !(t >= 0.0) {
                    return Err(Error::OutsideDomain {
                        t,
                        lo: 0.0,
                        hi: f64::INFINITY,
                    });
                }
                Ok(*rate)
            }
            WeightSpec::Tabulated(table) => table.log_derivative(t, closed),
            WeightSpec::Tilt { base, shift } => Ok(base.log_derivative_in(t, closed)? - shift),
            WeightSpec::TimeScaled { base, factor } => Ok(factor * base.log_derivative_in(factor * t, closed)?),
        }
    }

    /// For a constant-exponential weight (possibly tilted or time-scaled),
    /// the equivalent `(scale, rate)` pair.
    pub fn as_constant_exponential(&self) -> Option<(f64, f64)> {
        match self {
            WeightSpec::ConstantExponential { scale, rate } => Some((*scale, *rate)),
            WeightSpec::Tabulated(_) => None,
            WeightSpec::Tilt { base, shift } => base
                .as_constant_exponential()
                .map(|(l, r)| (l, r - shift)),
            WeightSpec::TimeScaled { base, factor } => base
                .as_constant_exponential()
                .map(|(l, r)| (l, r * factor)),
        }
    }
}

/// `m(t)` for a weight, see [`WeightSpec::eval`].
pub fn weight_eval(w: &WeightSpec, t: f64) -> Result<f64> {
    w.eval(t)
}

/// `μ(t) = m'(t)/m(t)`, see [`WeightSpec::log_derivative`].
pub fn weight_logderiv(w: &WeightSpec, t: f64) -> Result<f64> {
    w.log_derivative(t)
}

/// A finite-dimensional generator `A` with `S(t) = e^{tA}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupSystem {
    generator: DMatrix<Complex64>,
    label: String,
}

impl SemigroupSystem {
    pub fn new(generator: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        if generator.nrows() == 0 || !generator.is_square() {
            return Err(Error::invalid(format!(
                "generator must be a non-empty square matrix, got {}x{}",
                generator.nrows(),
                generator.ncols()
            )));
        }
        if generator.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("generator has non-finite entries"));
        }
        Ok(SemigroupSystem {
            generator,
            label: label.into(),
        })
    }

    /// Builds a real generator from row-major entries.
    pub fn from_real_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("generator rows must all have length equal to the row count"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::new(m, label)
    }

    pub fn scalar(a: f64, label: impl Into<String>) -> Self {
        Self::new(DMatrix::from_element(1, 1, Complex64::new(a, 0.0)), label)
            .expect("scalar generator")
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<Complex64> {
        &self.generator
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `A - shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut g = self.generator.clone();
        for i in 0..self.dim() {
            g[(i, i)] -= Complex64::new(shift, 0.0);
        }
        SemigroupSystem {
            generator: g,
            label: format!("{}-shift({shift})", self.label),
        }
    }

    /// `S(t) = e^{tA}`.
    pub fn propagator(&self, t: f64) -> DMatrix<Complex64> {
        (&self.generator * Complex64::new(t, 0.0)).exp()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        crate::linalg::eigenvalues(&self.generator)
    }

    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The tuple `(ω, p, q, K_{ω,p}, r(ω))` shared by every bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub omega: f64,
    pub p: f64,
    pub q: f64,
    pub k_const: Option<f64>,
    pub r_const: Option<f64>,
}

impl BoundParams {
    pub fn new(omega: f64, p: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::invalid("omega must be finite"));
        }
        Ok(BoundParams {
            omega,
            p,
            q: conjugate_exponent(p)?,
            k_const: None,
            r_const: None,
        })
    }

    pub fn with_k(mut self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!("K must be positive and finite, got {k}")));
        }
        self.k_const = Some(k);
        Ok(self)
    }

    pub fn with_r(mut self, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("r must be positive and finite, got {r}")));
        }
        self.r_const = Some(r);
        Ok(self)
    }

    /// `r̂_p(ω) = 1/K_{ω,p}`.
    pub fn rhat(&self) -> Option<f64> {
        self.k_const.map(|k| 1.0 / k)
    }

    /// Checks the exponent relation and that at least one constant is set.
    pub fn validate(&self) -> Result<()> {
        let q = conjugate_exponent(self.p)?;
        if (1.0 / self.p + 1.0 / self.q - 1.0).abs() > 4.0 * f64::EPSILON || (q - self.q).abs() > 1e-12 * q {
            return Err(Error::invalid("q is not the conjugate exponent of p"));
        }
        if self.k_const.is_none() && self.r_const.is_none() {
            return Err(Error::invalid("neither K nor r is set"));
        }
        if let Some(k) = self.k_const {
            Self::new(self.omega, self.p)?.with_k(k)?;
        }
        if let Some(r) = self.r_const {
            Self::new(self.omega, self.p)?.with_r(r)?;
        }
        Ok(())
    }
}

/// `q = p/(p-1)`; requires `p > 1`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("exponent p must satisfy p > 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

/// Scalar samples on a strictly increasing grid, evaluated piecewise-linearly.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::invalid(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    /// `n` uniform nodes on `[lo, hi]`.
    pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        if n < 2 || !(hi > lo) {
            return Err(Error::invalid(format!(
                "uniform grid needs n >= 2 and lo < hi, got n={n}, [{lo}, {hi}]"
            )));
        }
        let mut g: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        g[n - 1] = hi;
        Ok(g)
    }

    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = Self::uniform_grid(lo, hi, n)?;
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn try_from_fn(
        grid: Vec<f64>,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = locate(&self.grid, t).ok_or(Error::OutsideDomain {
            t,
            lo: self.lo(),
            hi: self.hi(),
        })?;
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - g0) / (g1 - g0);
        Ok(self.values[i] + w * (self.values[i + 1] - self.values[i]))
    }

    /// Slope of cell `i`, i.e. on `[grid[i], grid[i+1]]`.
    pub fn cell_slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.grid[i + 1] - self.grid[i])
    }

    /// Derivative estimate at node `i`: centered inside, one-sided at the ends.
    pub fn node_derivative(&self, i: usize) -> f64 {
        let n = self.len();
        if i == 0 {
            self.cell_slope(0)
        } else if i == n - 1 {
            self.cell_slope(n - 2)
        } else {
            (self.values[i + 1] - self.values[i - 1]) / (self.grid[i + 1] - self.grid[i - 1])
        }
    }

    /// Trapezoid weights on the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.grid)
    }

    /// Same grid, values mapped pointwise.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .grid
                .iter()
                .zip(&self.values)
                .map(|(&t, &v)| f(t, v))
                .collect(),
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid == other.grid
    }
}

pub(crate) fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}
