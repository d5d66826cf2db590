//! Algebraic real-time estimation of `F` in the ultra-local model
//! `dy/dt = F + alpha u`.
//!
//! Over a window of length `tau` ending at `t`, with window-local time
//! `sigma = s * tau`, `s` in `[0, 1]`:
//!
//! ```text
//! F_est(t) = -(6 / tau^3) * int_0^tau [ (tau - 2 sigma) y + alpha sigma (tau - sigma) u ] d sigma
//!          = -(6 / tau) * int_0^1 (1 - 2s) y ds  -  6 alpha * int_0^1 s (1 - s) u ds
//! ```
//!
//! The `(1 - 2s)` weight annihilates constants, which removes the initial
//! condition; on `y = y0 + k t` the first integral returns `k` and the
//! second returns `alpha u` for constant `u`, so `F_est = k - alpha u`.
//!
//! The integrals are evaluated on the stored samples by product integration:
//! `y` and `u` are interpolated linearly between samples and multiplied
//! against the exact polynomial weights. This is second order on smooth
//! signals, like the composite trapezoid, and exact when `y` and `u` are
//! affine in time.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Smallest number of samples a window may hold.
pub const MIN_SAMPLES: usize = 3;

/// Precomputed quadrature weights for a window of `n + 1` equally spaced samples.
#[derive(Debug, Clone, PartialEq)]
struct Weights {
    /// `int (1 - 2s) phi_i(s) ds`; antisymmetric, only the first half is stored.
    y_half: Vec<f64>,
    /// `int s (1 - s) phi_i(s) ds`; symmetric, stored in full.
    u: Vec<f64>,
}

impl Weights {
    fn new(samples: usize) -> Self {
        let n = samples - 1;
        let h = 1.0 / n as f64;
        // On [a, a + h] write s = a + h r. A quadratic weight w becomes
        // A + B r + C r^2 with A = w(a), B = h w'(a), C = h^2 w''/2, and the
        // hat functions are r (rising into the right node) and 1 - r.
        let node_weight = |w: [f64; 3], i: usize| {
            let local = |a: f64| {
                let value = w[0] + w[1] * a + w[2] * a * a;
                let slope = h * (w[1] + 2.0 * w[2] * a);
                let curve = h * h * w[2];
                (value, slope, curve)
            };
            let mut total = 0.0;
            if i > 0 {
                let (a0, b0, c0) = local((i - 1) as f64 * h);
                total += h * (a0 / 2.0 + b0 / 3.0 + c0 / 4.0);
            }
            if i < n {
                let (a0, b0, c0) = local(i as f64 * h);
                total += h * (a0 / 2.0 + b0 / 6.0 + c0 / 12.0);
            }
            total
        };
        // 1 - 2s and s - s^2
        const Y_POLY: [f64; 3] = [1.0, -2.0, 0.0];
        const U_POLY: [f64; 3] = [0.0, 1.0, -1.0];
        Self {
            y_half: (0..samples / 2).map(|i| node_weight(Y_POLY, i)).collect(),
            u: (0..samples).map(|i| node_weight(U_POLY, i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: f64,
    pub u: f64,
}

/// Ring buffer of the most recent equally spaced `(t, y, u)` samples.
#[derive(Debug, Clone)]
pub struct SampledWindow {
    capacity: usize,
    period: f64,
    entries: VecDeque<Sample>,
    weights: Weights,
}

impl SampledWindow {
    /// Window holding `capacity` samples spaced `period` apart, i.e. spanning
    /// `(capacity - 1) * period` seconds.
    pub fn new(capacity: usize, period: f64) -> Result<Self> {
        if capacity < MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "estimator window needs at least {MIN_SAMPLES} samples, got {capacity}"
            )));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Domain(format!("sample period must be positive, got {period}")));
        }
        Ok(Self {
            capacity,
            period,
            entries: VecDeque::with_capacity(capacity),
            weights: Weights::new(capacity),
        })
    }

    /// Window covering `length` seconds at sample period `period`.
    ///
    /// The sample count is `round(length / period) + 1`, raised to
    /// [`MIN_SAMPLES`] when the requested span is shorter than two periods.
    pub fn for_length(length: f64, period: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("estimator window must be positive, got {length}")));
        }
        if !(period > 0.0) {
            return Err(Error::Domain(format!("sample period must be positive, got {period}")));
        }
        let intervals = (length / period).round().max(1.0) as usize;
        Self::new((intervals + 1).max(MIN_SAMPLES), period)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Time spanned by a full window.
    pub fn length(&self) -> f64 {
        (self.capacity - 1) as f64 * self.period
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, t: f64, y: f64, u: f64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(Sample { t, y, u });
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.entries.iter()
    }

    /// Current estimate of `F`, or `None` while the window is still filling.
    pub fn estimate(&self, alpha: f64) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        let n = self.capacity - 1;
        let y_term: f64 = self
            .weights
            .y_half
            .iter()
            .enumerate()
            .map(|(i, w)| w * (self.entries[i].y - self.entries[n - i].y))
            .sum();
        let u_term: f64 = self
            .weights
            .u
            .iter()
            .zip(&self.entries)
            .map(|(w, s)| w * s.u)
            .sum();
        Some(-6.0 / self.length() * y_term - 6.0 * alpha * u_term)
    }
}

/// Estimate of `F` from a full window.
///
/// Errors when `alpha` is zero or the window has not filled yet; during
/// warm-up callers substitute `F_est = 0`.
pub fn estimate_f(window: &SampledWindow, alpha: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite and non-zero, got {alpha}")));
    }
    window.estimate(alpha).ok_or_else(|| {
        Error::Domain(format!(
            "estimator not ready: {} of {} samples",
            window.len(),
            window.capacity()
        ))
    })
}

/// Exact `F` of the first-order ultra-local model: `dy/dt - alpha u`.
pub fn f_true(y_dot: f64, u: f64, alpha: f64) -> f64 {
    y_dot - alpha * u
}

/// Exact `F` for the nonlinear plant `y'' + 4y' + 3y = 3 u' u^2 + 2 u^3`
/// with `alpha = 1`, written from the plant equation:
/// `F = (3 u' u^2 + 2 u^3 - 4u - y'' - 3y) / 4`.
///
/// It equals `y' - u` along any trajectory; the simulator uses [`f_true`]
/// and this form serves as a cross-check.
pub fn f_true_nonlinear(y: f64, y_ddot: f64, u: f64, u_dot: f64) -> f64 {
    (3.0 * u_dot * u * u + 2.0 * u * u * u - 4.0 * u - y_ddot - 3.0 * y) / 4.0
}
