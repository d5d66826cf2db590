//! Discrete-time intelligent controllers and the reference trajectory generator.

use crate::error::{Error, Result};
use crate::types::{ControllerKind, Gains};

/// Integral and derivative memory of one intelligent controller.
///
/// The law is `u = (-F_est + y*^(nu) + Fc(e)) / alpha` with
/// `Fc(e) = kp e + ki int(e) + kd de/dt`, restricted to the terms of `kind`.
/// The integral uses the rectangle rule and the derivative a backward
/// difference; there is no anti-windup and no output limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub kind: ControllerKind,
    pub gains: Gains,
    integral: f64,
    prev_error: Option<f64>,
}

impl ControllerState {
    pub fn new(kind: ControllerKind, gains: Gains) -> Result<Self> {
        gains.validate(kind)?;
        Ok(Self {
            kind,
            gains,
            integral: 0.0,
            prev_error: None,
        })
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    /// Accumulated `int(e) dt`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One control update.
    ///
    /// `y_star_deriv` is the `nu`-th derivative of the reference. Non-finite
    /// inputs are a fault.
    pub fn step(&mut self, f_est: f64, y_star_deriv: f64, e: f64, period: f64) -> Result<f64> {
        if !(period > 0.0) {
            return Err(Error::Domain(format!("sample period must be positive, got {period}")));
        }
        if !f_est.is_finite() || !y_star_deriv.is_finite() || !e.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite controller input (f_est = {f_est}, y*' = {y_star_deriv}, e = {e})"
            )));
        }
        let g = &self.gains;
        let mut feedback = g.kp * e;
        if self.kind.uses_integral() {
            self.integral += e * period;
            feedback += g.ki * self.integral;
        }
        if self.kind.uses_derivative() {
            let de = self.prev_error.map_or(0.0, |prev| (e - prev) / period);
            feedback += g.kd * de;
        }
        self.prev_error = Some(e);
        let u = (-f_est + y_star_deriv + feedback) / g.alpha;
        if !u.is_finite() {
            return Err(Error::Domain(format!("controller produced non-finite output {u}")));
        }
        Ok(u)
    }

    /// Proportional action only, used while the estimator warms up.
    /// Leaves the integral and derivative memory untouched.
    pub fn warmup_step(&self, y_star_deriv: f64, e: f64) -> f64 {
        (y_star_deriv + self.gains.kp * e) / self.gains.alpha
    }
}

/// Free-function form of [`ControllerState::step`].
pub fn control_step(
    state: &mut ControllerState,
    f_est: f64,
    y_star_deriv: f64,
    e: f64,
    period: f64,
) -> Result<f64> {
    state.step(f_est, y_star_deriv, e, period)
}

/// Piecewise-constant setpoint schedule: a sorted list of `(time, value)`
/// switch points. Before the first switch the first value holds.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointProfile {
    points: Vec<(f64, f64)>,
}

impl SetpointProfile {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::key("setpoints", "schedule is empty"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::key("setpoints", "times and values must be finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    /// Alternating unit steps: 1 on `[0, 5)`, 0 on `[5, 10)`, and so on.
    pub fn alternating_steps(duration: f64, period: f64, amplitude: f64) -> Self {
        let mut points = Vec::new();
        let mut t = 0.0;
        let mut k = 0usize;
        while t < duration || points.is_empty() {
            points.push((t, if k.is_multiple_of(2) { amplitude } else { 0.0 }));
            k += 1;
            t = k as f64 * period;
        }
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|(ts, _)| *ts <= t);
        self.points[idx.saturating_sub(1)].1
    }

    pub fn max_abs(&self) -> f64 {
        self.points.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }
}

/// Reference sample: `y*` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub y: f64,
    pub dy: f64,
    pub ddy: f64,
}

impl Reference {
    /// Derivative of order `nu` (1 or 2).
    pub fn derivative(&self, nu: u8) -> f64 {
        if nu >= 2 {
            self.ddy
        } else {
            self.dy
        }
    }
}

/// Critically damped second-order low-pass `T^2 y*'' + 2T y*' + y* = r`.
///
/// Advanced with its exact solution for a setpoint held over the step, so the
/// derivatives come from the filter states rather than differencing. With
/// `T = 0` the filter passes the setpoint through and reports zero
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFilter {
    time_constant: f64,
    y: f64,
    dy: f64,
}

impl ReferenceFilter {
    pub fn new(time_constant: f64, initial: f64) -> Result<Self> {
        if !(time_constant >= 0.0) || !time_constant.is_finite() {
            return Err(Error::key(
                "reference_tau",
                format!("must be finite and >= 0, got {time_constant}"),
            ));
        }
        Ok(Self {
            time_constant,
            y: initial,
            dy: 0.0,
        })
    }

    pub fn current(&self, setpoint: f64) -> Reference {
        if self.time_constant == 0.0 {
            return Reference { y: setpoint, dy: 0.0, ddy: 0.0 };
        }
        let tc = self.time_constant;
        Reference {
            y: self.y,
            dy: self.dy,
            ddy: (setpoint - self.y - 2.0 * tc * self.dy) / (tc * tc),
        }
    }

    /// Advances by `dt` with `setpoint` held and returns the new sample.
    pub fn step(&mut self, setpoint: f64, dt: f64) -> Reference {
        if self.time_constant == 0.0 {
            self.y = setpoint;
            self.dy = 0.0;
            return self.current(setpoint);
        }
        let tc = self.time_constant;
        // z = y - r solves z = (c1 + c2 t) exp(-t/T)
        let c1 = self.y - setpoint;
        let c2 = self.dy + c1 / tc;
        let decay = (-dt / tc).exp();
        self.y = setpoint + (c1 + c2 * dt) * decay;
        self.dy = (c2 - (c1 + c2 * dt) / tc) * decay;
        self.current(setpoint)
    }
}

/// Free-function form: evaluates the profile at `t`, advances the filter by
/// `dt` and returns `(y*, y*^(nu))` at `t + dt`.
pub fn reference_step(
    profile: &SetpointProfile,
    filter: &mut ReferenceFilter,
    t: f64,
    dt: f64,
    nu: u8,
) -> (f64, f64) {
    let r = filter.step(profile.value_at(t), dt);
    (r.y, r.derivative(nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(kp: f64) -> ControllerState {
        ControllerState::new(ControllerKind::IP, Gains::ip(kp)).unwrap()
    }

    #[test]
    fn equilibrium_gives_zero() {
        assert_eq!(ip(1.0).step(0.0, 0.0, 0.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn direct_substitution() {
        let u = ip(1.0).step(2.0, 1.0, 0.5, 0.01).unwrap();
        assert!((u + 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_scales_output() {
        let mut c = ControllerState::new(ControllerKind::IP, Gains::ip(2.0).with_alpha(-4.0)).unwrap();
        let u = c.step(1.0, 3.0, 0.5, 0.01).unwrap();
        assert!((u - (-1.0 + 3.0 + 1.0) / -4.0).abs() < 1e-15);
    }

    #[test]
    fn integral_and_derivative_terms() {
        let mut c = ControllerState::new(ControllerKind::IPID, Gains::ipid(1.0, 2.0, 0.5)).unwrap();
        // first step: integral = 0.01, no derivative yet
        let u0 = c.step(0.0, 0.0, 1.0, 0.01).unwrap();
        assert!((u0 - (1.0 + 2.0 * 0.01)).abs() < 1e-15);
        // second step: integral = 0.01 + 0.02 * 0.01 ... e = 2
        let u1 = c.step(0.0, 0.0, 2.0, 0.01).unwrap();
        let integral = 0.01 + 0.02;
        assert!((c.integral() - integral).abs() < 1e-15);
        let want = 2.0 + 2.0 * integral + 0.5 * (2.0 - 1.0) / 0.01;
        assert!((u1 - want).abs() < 1e-12);

        c.reset();
        assert_eq!(c.integral(), 0.0);
    }

    #[test]
    fn ip_ignores_integral() {
        let mut c = ip(1.0);
        for _ in 0..10 {
            c.step(0.0, 0.0, 1.0, 0.1).unwrap();
        }
        assert_eq!(c.integral(), 0.0);
    }

    #[test]
    fn non_finite_input_is_a_fault() {
        assert!(ip(1.0).step(f64::NAN, 0.0, 0.0, 0.01).is_err());
        assert!(ip(1.0).step(0.0, f64::INFINITY, 0.0, 0.01).is_err());
        assert!(ip(1.0).step(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn profile_lookup() {
        let p = SetpointProfile::new(vec![(5.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(p.value_at(-1.0), 1.0);
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(4.999), 1.0);
        assert_eq!(p.value_at(5.0), 2.0);
        assert_eq!(p.max_abs(), 2.0);

        let alt = SetpointProfile::alternating_steps(20.0, 5.0, 1.0);
        assert_eq!(alt.points(), &[(0.0, 1.0), (5.0, 0.0), (10.0, 1.0), (15.0, 0.0)]);
        assert!(SetpointProfile::new(vec![]).is_err());
    }

    #[test]
    fn converged_filter_is_a_fixed_point() {
        let mut f = ReferenceFilter::new(0.5, 3.0).unwrap();
        let r = f.step(3.0, 0.01);
        assert_eq!((r.y, r.dy, r.ddy), (3.0, 0.0, 0.0));
    }

    #[test]
    fn step_response_matches_closed_form() {
        let tc = 0.5;
        let mut f = ReferenceFilter::new(tc, 0.0).unwrap();
        let dt = 0.01;
        for k in 1..=500 {
            let r = f.step(1.0, dt);
            let t = k as f64 * dt;
            let want = 1.0 - (1.0 + t / tc) * (-t / tc).exp();
            let want_dy = t / (tc * tc) * (-t / tc).exp();
            assert!((r.y - want).abs() < 1e-12);
            assert!((r.dy - want_dy).abs() < 1e-12);
        }
    }

    #[test]
    fn pass_through_mode() {
        let p = SetpointProfile::new(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        let mut f = ReferenceFilter::new(0.0, 0.0).unwrap();
        assert_eq!(reference_step(&p, &mut f, 0.5, 0.01, 1), (0.0, 0.0));
        assert_eq!(reference_step(&p, &mut f, 1.5, 0.01, 2), (2.0, 0.0));
        assert!(ReferenceFilter::new(-1.0, 0.0).is_err());
    }
}
