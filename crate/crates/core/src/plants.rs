//! Fixed-step simulation of the test plants.
//!
//! * `nonlinear`: `y'' + 4y' + 3y = 3u'u^2 + 2u^3`. The right-hand side is
//!   `(d/dt + 2) u^3`, so with `v = u^3` the plant is the linear system
//!   `(s + 2)/(s^2 + 4s + 3)` driven by `v`. The realization
//!   `x1' = x2, x2' = -3x1 - 4x2 + v, y = 2x1 + x2` needs no derivative of the
//!   (piecewise-constant) input.
//! * `linear`: `2y' - 3y = u`, unstable with its pole at `1.5`.
//! * `ultra-local`: `y' = F + u` with a constant `F = ULTRA_LOCAL_F`, i.e. the
//!   ultra-local model itself with `alpha = 1`. Under a transport delay this is
//!   the setting in which the iP loop reduces to `e' = -K_P e(t - tau)`.
//!
//! Inputs pass through an optional delay line quantized to whole samples and
//! are held constant over each step ([`PlantState::step_input`] takes a smooth
//! input instead). Each step is classical RK4, split into
//! equal substeps when the period exceeds the configured maximum.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// The constant `F` of the `ultra-local` plant.
pub const ULTRA_LOCAL_F: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Nonlinear,
    Linear,
    LinearDelayed,
    UltraLocal,
}

impl PlantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantKind::Nonlinear => "nonlinear",
            PlantKind::Linear => "linear",
            PlantKind::LinearDelayed => "linear-delayed",
            PlantKind::UltraLocal => "ultra-local",
        }
    }

    /// `x' = f(x, input)`
    fn rhs(self, x: [f64; 2], input: f64) -> [f64; 2] {
        match self {
            PlantKind::Nonlinear => [x[1], -3.0 * x[0] - 4.0 * x[1] + input * input * input],
            PlantKind::Linear | PlantKind::LinearDelayed => [(3.0 * x[0] + input) / 2.0, 0.0],
            PlantKind::UltraLocal => [ULTRA_LOCAL_F + input, 0.0],
        }
    }

    fn output(self, x: [f64; 2]) -> f64 {
        match self {
            PlantKind::Nonlinear => 2.0 * x[0] + x[1],
            PlantKind::Linear | PlantKind::LinearDelayed | PlantKind::UltraLocal => x[0],
        }
    }

    fn output_rate(self, x: [f64; 2], input: f64) -> f64 {
        let dx = self.rhs(x, input);
        match self {
            PlantKind::Nonlinear => 2.0 * dx[0] + dx[1],
            PlantKind::Linear | PlantKind::LinearDelayed | PlantKind::UltraLocal => dx[0],
        }
    }
}

impl fmt::Display for PlantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nonlinear" => Ok(PlantKind::Nonlinear),
            "linear" => Ok(PlantKind::Linear),
            "linear-delayed" => Ok(PlantKind::LinearDelayed),
            "ultra-local" => Ok(PlantKind::UltraLocal),
            other => Err(Error::key(
                "plant",
                format!(
                    "unknown plant `{other}` (expected nonlinear, linear, linear-delayed or ultra-local)"
                ),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOutput {
    pub y_measured: f64,
    pub y_clean: f64,
    /// `dy/dt` at the current time with the input that was held up to it.
    pub y_dot: f64,
    /// Input actually applied over the step (after the delay line).
    pub applied: f64,
}

/// The state left the numerically meaningful range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub t: f64,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "plant state diverged at t = {}", self.t)
    }
}

#[derive(Debug, Clone)]
pub struct PlantState {
    kind: PlantKind,
    x: [f64; 2],
    t: f64,
    period: f64,
    max_substep: f64,
    delay_line: VecDeque<f64>,
    last_applied: f64,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl PlantState {
    /// Plant at rest at `t = 0`. `delay` is rounded to whole periods.
    pub fn new(kind: PlantKind, period: f64, delay: f64, noise_std: f64, seed: u64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::key("sample_period", format!("must be positive, got {period}")));
        }
        if !(delay >= 0.0) || !delay.is_finite() {
            return Err(Error::key("delay", format!("must be >= 0, got {delay}")));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::key("noise_std", format!("must be >= 0, got {noise_std}")));
        }
        let delay_samples = (delay / period).round() as usize;
        let noise = (noise_std > 0.0).then(|| {
            (
                ChaCha8Rng::seed_from_u64(seed),
                Normal::new(0.0, noise_std).expect("finite positive std"),
            )
        });
        Ok(Self {
            kind,
            x: [0.0; 2],
            t: 0.0,
            period,
            max_substep: 0.05,
            delay_line: std::iter::repeat_n(0.0, delay_samples).collect(),
            last_applied: 0.0,
            noise,
        })
    }

    pub fn with_state(mut self, x: [f64; 2]) -> Self {
        self.x = x;
        self
    }

    pub fn with_max_substep(mut self, h: f64) -> Self {
        self.max_substep = h;
        self
    }

    pub fn kind(&self) -> PlantKind {
        self.kind
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> [f64; 2] {
        self.x
    }

    /// Delay actually simulated, in seconds.
    pub fn effective_delay(&self) -> f64 {
        self.delay_line.len() as f64 * self.period
    }

    fn noise_sample(&mut self) -> f64 {
        match &mut self.noise {
            Some((rng, dist)) => dist.sample(rng),
            None => 0.0,
        }
    }

    /// Output at the current time, with a fresh noise draw.
    pub fn measure(&mut self) -> PlantOutput {
        let y_clean = self.kind.output(self.x);
        PlantOutput {
            y_measured: y_clean + self.noise_sample(),
            y_clean,
            y_dot: self.kind.output_rate(self.x, self.last_applied),
            applied: self.last_applied,
        }
    }

    fn rk4(&self, x: [f64; 2], t: f64, h: f64, input: &impl Fn(f64) -> f64) -> [f64; 2] {
        let f = |x: [f64; 2], t: f64| self.kind.rhs(x, input(t));
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = f(x, t);
        let k2 = f(add(x, k1, h / 2.0), t + h / 2.0);
        let k3 = f(add(x, k2, h / 2.0), t + h / 2.0);
        let k4 = f(add(x, k3, h), t + h);
        [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    fn advance(
        &mut self,
        input: impl Fn(f64) -> f64,
    ) -> std::result::Result<PlantOutput, Divergence> {
        let substeps = (self.period / self.max_substep).ceil().max(1.0) as usize;
        let h = self.period / substeps as f64;
        let mut x = self.x;
        for i in 0..substeps {
            x = self.rk4(x, self.t + i as f64 * h, h, &input);
        }
        self.t += self.period;
        if !x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT) {
            return Err(Divergence { t: self.t });
        }
        self.x = x;
        self.last_applied = input(self.t);
        Ok(self.measure())
    }

    /// Holds `u` (delayed) for one period and returns the measurement at the
    /// end of it.
    pub fn step(&mut self, u: f64) -> std::result::Result<PlantOutput, Divergence> {
        let applied = if self.delay_line.is_empty() {
            u
        } else {
            self.delay_line.push_back(u);
            self.delay_line.pop_front().unwrap_or(0.0)
        };
        self.advance(|_| applied)
    }

    /// Advances one period under a time-varying input `u(t)` (absolute
    /// time), bypassing the zero-order hold and the delay line.
    pub fn step_input(
        &mut self,
        u: impl Fn(f64) -> f64,
    ) -> std::result::Result<PlantOutput, Divergence> {
        self.advance(u)
    }
}

/// Free-function form of [`PlantState::step`].
pub fn plant_step(state: &mut PlantState, u: f64) -> std::result::Result<PlantOutput, Divergence> {
    state.step(u)
}
