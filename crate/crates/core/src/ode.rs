//! Adaptive Dormand–Prince 5(4) integration of scalar ODEs with cubic Hermite
//! dense output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on a single step; `f64::INFINITY` for none.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// Accepted steps `(s_i, y_i, y'_i)` of an integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    s: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

/// Why an integration ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    Reached,
    /// The stop predicate fired at the last recorded step.
    Halted,
}

impl Trajectory {
    pub fn nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.dy
    }

    pub fn start(&self) -> f64 {
        self.s[0]
    }

    pub fn end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn cell(&self, s: f64) -> Option<usize> {
        crate::domain::locate(&self.s, s)
    }

    /// Hermite basis on the cell containing `s`: `(i, h, θ)`.
    fn frame(&self, s: f64) -> Result<(usize, f64, f64)> {
        let i = self.cell(s).ok_or_else(|| {
            Error::invalid(format!(
                "dense output queried at {s}, outside [{}, {}]",
                self.start(),
                self.end()
            ))
        })?;
        let h = self.s[i + 1] - self.s[i];
        Ok((i, h, (s - self.s[i]) / h))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (i, h, t) = self.frame(s)?;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.y[i] + h10 * h * self.dy[i] + h01 * self.y[i + 1] + h11 * h * self.dy[i + 1])
    }

    /// Derivative of the Hermite interpolant.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        let (i, h, t) = self.frame(s)?;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        Ok(d00 * self.y[i] + d10 * self.dy[i] + d01 * self.y[i + 1] + d11 * self.dy[i + 1])
    }

    /// First `s` where the interpolant crosses `level` upwards, refined by
    /// bisection to `tol`.
    pub fn first_upcrossing(&self, level: f64, tol: f64) -> Result<Option<f64>> {
        for i in 0..self.s.len() - 1 {
            if self.y[i] < level && self.y[i + 1] >= level {
                let (mut lo, mut hi) = (self.s[i], self.s[i + 1]);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.eval(mid)? < level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(Some(0.5 * (lo + hi)));
            }
        }
        Ok(None)
    }

    /// Truncates the trajectory after node `last`.
    pub fn truncate(&mut self, last: usize) {
        self.s.truncate(last + 1);
        self.y.truncate(last + 1);
        self.dy.truncate(last + 1);
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(s, y)` from `(s0, y0)` to `s_end`, stopping early when
/// `halt(s, y)` returns true after an accepted step.
pub fn integrate(
    mut f: impl FnMut(f64, f64) -> Result<f64>,
    s0: f64,
    y0: f64,
    s_end: f64,
    opts: OdeOptions,
    mut halt: impl FnMut(f64, f64) -> bool,
) -> Result<(Trajectory, Stop)> {
    if !(s_end > s0) {
        return Err(Error::invalid(format!("integration interval [{s0}, {s_end}] is empty")));
    }
    let span = s_end - s0;
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, y)?;
    let mut traj = Trajectory {
        s: vec![s],
        y: vec![y],
        dy: vec![k1],
    };
    let mut h = initial_step(k1, y, span, &opts);
    let mut steps = 0usize;
    let mut k = [0.0; 7];
    while s < s_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                at: s,
                reason: format!("step budget {} exhausted", opts.max_steps),
            });
        }
        let remaining = s_end - s;
        if remaining <= 4.0 * f64::EPSILON * s.abs().max(span) {
            // Rounding sliver: the last node stands in for the endpoint.
            *traj.s.last_mut().unwrap() = s_end;
            break;
        }
        h = h.min(opts.max_step);
        if remaining - h < 1e-6 * h {
            h = remaining;
        }
        if h <= f64::EPSILON * s.abs().max(span) {
            return Err(Error::Integration {
                at: s,
                reason: "step size underflow".into(),
            });
        }
        k[0] = k1;
        for stage in 1..7 {
            let mut acc = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                acc += h * A[stage][j] * kj;
            }
            k[stage] = f(s + C[stage] * h, acc)?;
        }
        let y5: f64 = y + h * B5.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let y4: f64 = y + h * B4.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let scale = opts.atol + opts.rtol * y.abs().max(y5.abs());
        let err = ((y5 - y4) / scale).abs();
        if !y5.is_finite() || !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            s = if s_end - s - h <= 0.0 { s_end } else { s + h };
            y = y5;
            k1 = k[6];
            traj.s.push(s);
            traj.y.push(y);
            traj.dy.push(k1);
            if halt(s, y) {
                return Ok((traj, Stop::Halted));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok((traj, Stop::Reached))
}

fn initial_step(dy0: f64, y0: f64, span: f64, opts: &OdeOptions) -> f64 {
    let scale = opts.atol + opts.rtol * y0.abs();
    let guess = if dy0.abs() > 0.0 {
        0.01 * (scale / dy0.abs()).powf(0.2)
    } else {
        1e-6 * span
    };
    guess.min(span).min(opts.max_step).max(1e-12 * span)
}
