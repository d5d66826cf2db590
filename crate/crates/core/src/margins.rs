//! Open-loop transfer functions of the intelligent controllers and their
//! stability margins.
//!
//! With perfect estimation of `F` the error obeys `e^(nu) + Fc(e) = 0`, so the
//! loop gain seen by the error is `T(s) = T_Fc(s) / s^nu`. For the four
//! families this gives
//!
//! | family | `T(s)`                          |
//! |--------|---------------------------------|
//! | iP     | `kp/s`                          |
//! | iPI    | `kp/s + ki/s^2`                 |
//! | iPD    | `kd/s + kp/s^2`                 |
//! | iPID   | `kd/s + kp/s^2 + ki/s^3`        |
//!
//! optionally multiplied by the transport delay `exp(-tau s)`.
//!
//! The analytic margin functions ([`margins_ip`], [`margins_ipi`],
//! [`margins_ipd`], [`margins_ipid`]) are cross-checked by
//! [`margins_numeric`], a log-grid frequency sweep refined by bisection.
//!
//! Note on the iPID gain margin: the single phase crossover sits at
//! `omega_pi = sqrt(ki/kd)` and `1/|T(j omega_pi)| = ki/(kd kp)`. This is below
//! one exactly when the closed loop is stable (`kd kp > ki`), i.e. it measures
//! how far the loop gain may be *reduced* before instability. The value is
//! reported as defined, `1/|T(j omega_pi)|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::cubic::Cubic;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{ControllerKind, Gains};

/// Open-loop transfer function of one intelligent-controller family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenLoopTf {
    pub kind: ControllerKind,
    pub gains: Gains,
    /// Input transport delay in seconds.
    pub delay: f64,
}

/// Coefficients of `c1/s + c2/s^2 + c3/s^3`.
#[derive(Debug, Clone, Copy)]
struct InversePowers {
    c1: f64,
    c2: f64,
    c3: f64,
}

impl OpenLoopTf {
    pub fn new(kind: ControllerKind, gains: Gains) -> Self {
        Self {
            kind,
            gains,
            delay: 0.0,
        }
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    fn powers(&self) -> InversePowers {
        let g = &self.gains;
        match self.kind {
            ControllerKind::IP => InversePowers { c1: g.kp, c2: 0.0, c3: 0.0 },
            ControllerKind::IPI => InversePowers { c1: g.kp, c2: g.ki, c3: 0.0 },
            ControllerKind::IPD => InversePowers { c1: g.kd, c2: g.kp, c3: 0.0 },
            ControllerKind::IPID => InversePowers { c1: g.kd, c2: g.kp, c3: g.ki },
        }
    }

    fn undelayed(&self, omega: f64) -> Complex64 {
        // 1/(jw) = -j/w, 1/(jw)^2 = -1/w^2, 1/(jw)^3 = j/w^3
        let InversePowers { c1, c2, c3 } = self.powers();
        let re = -c2 / (omega * omega);
        let im = c3 / (omega * omega * omega) - c1 / omega;
        Complex64::new(re, im)
    }

    /// `T(j omega)`, including the delay factor.
    pub fn evaluate(&self, omega: f64) -> Result<Complex64> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "open-loop transfer functions are singular at omega = 0; need omega > 0, got {omega}"
            )));
        }
        if !(self.delay >= 0.0) {
            return Err(Error::Domain(format!("delay must be >= 0, got {}", self.delay)));
        }
        Ok(self.eval_unchecked(omega))
    }

    fn eval_unchecked(&self, omega: f64) -> Complex64 {
        let t = self.undelayed(omega);
        if self.delay > 0.0 {
            t * Complex64::from_polar(1.0, -omega * self.delay)
        } else {
            t
        }
    }

    /// Continuous (unwrapped) phase in degrees.
    ///
    /// The delay-free part always has a negative real part or lies on the
    /// negative imaginary axis, so its phase is taken in `(-270, -90]`; the
    /// delay then subtracts `omega * tau` radians.
    pub fn phase_deg(&self, omega: f64) -> f64 {
        let t = self.undelayed(omega);
        let mut base = t.im.atan2(t.re).to_degrees();
        if base > 0.0 {
            base -= 360.0;
        }
        base - (omega * self.delay).to_degrees()
    }
}

/// Free function form of [`OpenLoopTf::evaluate`].
pub fn evaluate(tf: &OpenLoopTf, omega: f64) -> Result<Complex64> {
    tf.evaluate(omega)
}

/// Gain margin on a linear scale. Infinity is its own variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMargin {
    Finite(f64),
    Infinite,
}

impl GainMargin {
    pub fn is_infinite(&self) -> bool {
        matches!(self, GainMargin::Infinite)
    }

    pub fn value(&self) -> f64 {
        match self {
            GainMargin::Finite(v) => *v,
            GainMargin::Infinite => f64::INFINITY,
        }
    }

    pub fn db(&self) -> f64 {
        20.0 * self.value().log10()
    }
}

impl Serialize for GainMargin {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GainMargin::Finite(v) => s.serialize_f64(*v),
            GainMargin::Infinite => s.serialize_str("inf"),
        }
    }
}

/// A frequency where `|T(j omega)| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainCrossover {
    pub omega: f64,
    pub phase_margin_deg: f64,
}

/// A frequency where the loop phase is -180 degrees (mod 360).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCrossover {
    pub omega: f64,
    pub gain_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub gain_margin: GainMargin,
    pub gain_margin_db: f64,
    /// Worst (smallest) phase margin in degrees, if there is a gain crossover.
    pub phase_margin_deg: Option<f64>,
    pub omega_gain_crossover: Option<f64>,
    pub omega_phase_crossover: Option<f64>,
    pub gain_crossovers: Vec<GainCrossover>,
    pub phase_crossovers: Vec<PhaseCrossover>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MarginReport {
    fn from_crossovers(
        mut gain_crossovers: Vec<GainCrossover>,
        mut phase_crossovers: Vec<PhaseCrossover>,
    ) -> Self {
        gain_crossovers.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        phase_crossovers.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let worst_pm = gain_crossovers
            .iter()
            .min_by(|a, b| a.phase_margin_deg.total_cmp(&b.phase_margin_deg))
            .copied();
        let worst_gm = phase_crossovers
            .iter()
            .min_by(|a, b| a.gain_margin.total_cmp(&b.gain_margin))
            .copied();
        let gain_margin = match worst_gm {
            Some(pc) => GainMargin::Finite(pc.gain_margin),
            None => GainMargin::Infinite,
        };
        let note = worst_pm
            .is_none()
            .then(|| "no gain crossover (|T| = 1) found in the frequency range".to_string());
        Self {
            gain_margin,
            gain_margin_db: gain_margin.db(),
            phase_margin_deg: worst_pm.map(|c| c.phase_margin_deg),
            omega_gain_crossover: worst_pm.map(|c| c.omega),
            omega_phase_crossover: worst_gm.map(|c| c.omega),
            gain_crossovers,
            phase_crossovers,
            note,
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGains(format!("{name} must be positive, got {v}")))
    }
}

/// Maps a phase margin into `(-180, 180]`.
fn wrap_deg(mut deg: f64) -> f64 {
    deg %= 360.0;
    if deg > 180.0 {
        deg -= 360.0;
    } else if deg <= -180.0 {
        deg += 360.0;
    }
    deg
}

/// iP: `T = kp/s`. Phase is -90 degrees everywhere, so PM = 90 and GM is infinite.
pub fn margins_ip(gains: &Gains) -> Result<MarginReport> {
    require_positive("kp", gains.kp)?;
    Ok(MarginReport::from_crossovers(
        vec![GainCrossover {
            omega: gains.kp,
            phase_margin_deg: 90.0,
        }],
        vec![],
    ))
}

/// `T = a/s + b/s^2` with `a, b > 0`, the shape shared by iPI and iPD.
fn first_plus_second_order(a: f64, b: f64) -> MarginReport {
    // |T|^2 = 1  <=>  w^4 - a^2 w^2 - b^2 = 0
    let a2 = a * a;
    let omega = ((a2 + (a2 * a2 + 4.0 * b * b).sqrt()) / 2.0).sqrt();
    MarginReport::from_crossovers(
        vec![GainCrossover {
            omega,
            phase_margin_deg: (a * omega / b).atan().to_degrees(),
        }],
        vec![],
    )
}

/// iPI: `T = kp/s + ki/s^2`.
pub fn margins_ipi(gains: &Gains) -> Result<MarginReport> {
    require_positive("kp", gains.kp)?;
    if gains.ki == 0.0 {
        return Err(Error::InvalidGains(
            "ki = 0 reduces iPI to iP; use margins_ip".into(),
        ));
    }
    require_positive("ki", gains.ki)?;
    Ok(first_plus_second_order(gains.kp, gains.ki))
}

/// iPD: `T = kd/s + kp/s^2`, the iPI formulas with `kp -> kd` and `ki -> kp`.
pub fn margins_ipd(gains: &Gains) -> Result<MarginReport> {
    require_positive("kp", gains.kp)?;
    if gains.kd == 0.0 {
        return Err(Error::InvalidGains(
            "kd = 0 leaves a double integrator with no phase margin; iPD needs kd > 0".into(),
        ));
    }
    require_positive("kd", gains.kd)?;
    Ok(first_plus_second_order(gains.kd, gains.kp))
}

/// Cubic in `x = omega^2` whose positive roots are the iPID gain crossovers:
/// `x^3 - kd^2 x^2 + (2 kd ki - kp^2) x - ki^2 = 0`.
pub fn ipid_crossover_cubic(gains: &Gains) -> Cubic {
    let Gains { kp, ki, kd, .. } = *gains;
    Cubic::new(-kd * kd, 2.0 * kd * ki - kp * kp, -ki * ki)
}

/// iPID: `T = kd/s + kp/s^2 + ki/s^3`.
///
/// The phase crossover is `omega_pi = sqrt(ki/kd)` with `GM = ki/(kd kp)`.
/// The gain crossovers are the square roots of the positive real roots of
/// [`ipid_crossover_cubic`], found by Cardano's method. The cubic is negative
/// at zero and grows without bound, so at least one such root exists; when
/// there are three, the report carries the smallest phase margin.
pub fn margins_ipid(gains: &Gains) -> Result<MarginReport> {
    require_positive("kp", gains.kp)?;
    require_positive("ki", gains.ki)?;
    require_positive("kd", gains.kd)?;
    let Gains { kp, ki, kd, .. } = *gains;

    let crossovers = ipid_crossover_cubic(gains)
        .real_roots()
        .into_iter()
        .filter(|x| *x > 0.0)
        .map(|x| {
            let omega = x.sqrt();
            GainCrossover {
                omega,
                phase_margin_deg: ((kd * x - ki) / (kp * omega)).atan().to_degrees(),
            }
        })
        .collect();
    let phase = PhaseCrossover {
        omega: (ki / kd).sqrt(),
        gain_margin: ki / (kd * kp),
    };
    Ok(MarginReport::from_crossovers(crossovers, vec![phase]))
}

/// Closed-form margins of a delay-free transfer function.
pub fn margins_analytic(tf: &OpenLoopTf) -> Result<MarginReport> {
    if tf.delay != 0.0 {
        return Err(Error::Unsupported(
            "closed-form margins exist only for delay-free loops; use margins_numeric".into(),
        ));
    }
    match tf.kind {
        ControllerKind::IP => margins_ip(&tf.gains),
        ControllerKind::IPI => margins_ipi(&tf.gains),
        ControllerKind::IPD => margins_ipd(&tf.gains),
        ControllerKind::IPID => margins_ipid(&tf.gains),
    }
}

/// Largest input delay the iP loop tolerates: `pi / (2 kp)`.
///
/// `kp e^{-tau s}/s` has unit modulus at `omega = kp` with phase
/// `-pi/2 - kp tau`, which reaches `-pi` at this delay.
pub fn delay_margin_ip(kp: f64) -> Result<f64> {
    require_positive("kp", kp)?;
    Ok(PI / (2.0 * kp))
}

/// `ki` giving the iPI loop a 45 degree phase margin for the given `kp`.
///
/// 45 degrees requires `omega_m = ki/kp`; substituting into
/// `w^4 - kp^2 w^2 - ki^2 = 0` gives `ki = sqrt(2) kp^2`.
pub fn ipi_ki_for_45deg(kp: f64) -> Result<f64> {
    require_positive("kp", kp)?;
    Ok(std::f64::consts::SQRT_2 * kp * kp)
}

/// Characteristic polynomial of the delay-free error dynamics
/// `e^(nu) + Fc(e) = 0`, after differentiating away the integral, with
/// coefficients in descending powers of `s`.
pub fn closed_loop_polynomial(kind: ControllerKind, gains: &Gains) -> Vec<f64> {
    let Gains { kp, ki, kd, .. } = *gains;
    match kind {
        ControllerKind::IP => vec![1.0, kp],
        ControllerKind::IPI => vec![1.0, kp, ki],
        ControllerKind::IPD => vec![1.0, kd, kp],
        ControllerKind::IPID => vec![1.0, kd, kp, ki],
    }
}

/// Routh-Hurwitz test on [`closed_loop_polynomial`].
pub fn routh_stable(kind: ControllerKind, gains: &Gains) -> bool {
    let c = closed_loop_polynomial(kind, gains);
    let positive = c.iter().all(|v| *v > 0.0);
    match c.len() {
        4 => positive && c[1] * c[2] > c[0] * c[3],
        _ => positive,
    }
}

/// Log-spaced frequency grid for [`margins_numeric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyRange {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points_per_decade: usize,
}

impl Default for FrequencyRange {
    fn default() -> Self {
        Self {
            omega_min: 1e-4,
            omega_max: 1e4,
            points_per_decade: 400,
        }
    }
}

impl FrequencyRange {
    fn grid(&self) -> Vec<f64> {
        let lo = self.omega_min.log10();
        let hi = self.omega_max.log10();
        let n = ((hi - lo) * self.points_per_decade as f64).ceil() as usize + 1;
        (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Bisects `f` on `[lo, hi]` (in log-frequency) given a sign change.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tolerance: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if (hi - lo) <= tolerance * mid || mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Point in `[lo, hi]` (log-frequency golden section) where `sign * f` is
/// smallest, assuming it is unimodal there.
fn golden_min(f: impl Fn(f64) -> f64, sign: f64, lo: f64, hi: f64, tolerance: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let g = |x: f64| sign * f(x.exp());
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if b - a <= tolerance {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - R * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + R * (b - a);
            gd = g(d);
        }
    }
    ((a + b) / 2.0).exp()
}

/// Roots of `f` on the grid: exact grid zeros, bisected sign changes, and
/// root pairs hidden between grid points where `|f|` dips toward zero
/// without changing sign.
fn grid_roots(grid: &[f64], f: impl Fn(f64) -> f64 + Copy, tolerance: f64) -> Vec<f64> {
    let values: Vec<f64> = grid.iter().map(|w| f(*w)).collect();
    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < grid.len() && values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0) {
            roots.push(bisect(f, grid[i], grid[i + 1], tolerance));
        }
        if i == 0 || i + 1 == grid.len() {
            continue;
        }
        let sign = values[i].signum();
        let (prev, next) = (sign * values[i - 1], sign * values[i + 1]);
        let v = sign * values[i];
        if prev > 0.0 && next > 0.0 && v < prev && v <= next {
            let w = golden_min(f, sign, grid[i - 1], grid[i + 1], tolerance);
            if sign * f(w) < 0.0 {
                roots.push(bisect(f, grid[i - 1], w, tolerance));
                roots.push(bisect(f, w, grid[i + 1], tolerance));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Frequency-sweep margins for any [`OpenLoopTf`], delayed or not.
///
/// Gain crossovers are sign changes of `ln|T| `; phase crossovers are sign
/// changes of `Im T` where `Re T < 0`. Each is refined by bisection to the
/// relative `tolerance`.
pub fn margins_numeric(
    tf: &OpenLoopTf,
    range: &FrequencyRange,
    tolerance: f64,
) -> Result<MarginReport> {
    if !(range.omega_min > 0.0 && range.omega_min <= 1e-3 && range.omega_max >= 1e3) {
        return Err(Error::Domain(format!(
            "frequency range must cover at least [1e-3, 1e3] rad/s, got [{}, {}]",
            range.omega_min, range.omega_max
        )));
    }
    if range.points_per_decade < 2 {
        return Err(Error::Domain("need at least 2 points per decade".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tolerance}")));
    }
    if !(tf.delay >= 0.0) {
        return Err(Error::Domain(format!("delay must be >= 0, got {}", tf.delay)));
    }
    let grid = range.grid();

    let gain_crossovers = grid_roots(&grid, |w| tf.eval_unchecked(w).norm().ln(), tolerance)
        .into_iter()
        .map(|omega| GainCrossover {
            omega,
            phase_margin_deg: wrap_deg(180.0 + tf.phase_deg(omega)),
        })
        .collect();

    // A delay turns the phase by `omega tau` per radian of frequency; above
    // `resolvable` adjacent grid points differ by more than 45 degrees and
    // sign changes of Im T can be missed, so the search stops there.
    let log_step = std::f64::consts::LN_10 / range.points_per_decade as f64;
    let resolvable = if tf.delay > 0.0 {
        (PI / 4.0) / (tf.delay * log_step)
    } else {
        f64::INFINITY
    };
    let phase_crossovers = grid_roots(&grid, |w| tf.eval_unchecked(w).im, tolerance)
        .into_iter()
        .filter(|omega| *omega <= resolvable)
        .filter_map(|omega| {
            let t = tf.eval_unchecked(omega);
            (t.re < 0.0).then(|| PhaseCrossover {
                omega,
                gain_margin: 1.0 / t.norm(),
            })
        })
        .collect();

    let mut report = MarginReport::from_crossovers(gain_crossovers, phase_crossovers);
    if resolvable < range.omega_max {
        let limit = format!("phase crossovers searched up to {resolvable:.4e} rad/s only (delay)");
        report.note = Some(match report.note.take() {
            Some(n) => format!("{n}; {limit}"),
            None => limit,
        });
    }
    Ok(report)
}

/// [`margins_numeric`] over many loops.
pub fn margins_numeric_batch(
    tfs: &[OpenLoopTf],
    range: &FrequencyRange,
    tolerance: f64,
    exec: Execution,
) -> Vec<Result<MarginReport>> {
    exec.map(tfs, |tf| margins_numeric(tf, range, tolerance))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NyquistRow {
    pub omega: f64,
    pub re: f64,
    pub im: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
}

impl NyquistRow {
    pub const CSV_HEADER: &'static str = "omega,re,im,gain_db,phase_deg";
}

/// Log-spaced frequency response of `tf`, ordered by frequency.
pub fn nyquist_sample(
    tf: &OpenLoopTf,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<Vec<NyquistRow>> {
    if !(omega_min > 0.0 && omega_min < omega_max && omega_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n_points}")));
    }
    let (lo, hi) = (omega_min.ln(), omega_max.ln());
    (0..n_points)
        .map(|i| {
            let omega = if i + 1 == n_points {
                omega_max
            } else {
                (lo + (hi - lo) * i as f64 / (n_points - 1) as f64).exp()
            };
            let t = tf.evaluate(omega)?;
            Ok(NyquistRow {
                omega,
                re: t.re,
                im: t.im,
                gain_db: 20.0 * t.norm().log10(),
                phase_deg: tf.phase_deg(omega),
            })
        })
        .collect()
}

/// Writes Nyquist rows as CSV text.
pub fn nyquist_csv(rows: &[NyquistRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(NyquistRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.omega, r.re, r.im, r.gain_db, r.phase_deg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn evaluate_examples() {
        let ip = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        assert_eq!(ip.evaluate(1.0).unwrap(), Complex64::new(0.0, -1.0));

        let ipi = OpenLoopTf::new(ControllerKind::IPI, Gains::ipi(1.0, 1.0));
        assert_eq!(ipi.evaluate(1.0).unwrap(), Complex64::new(-1.0, -1.0));

        let ipid = OpenLoopTf::new(ControllerKind::IPID, Gains::ipid(1.0, 4.0, 1.0));
        let t = ipid.evaluate(2.0).unwrap();
        assert!((t.re + 0.25).abs() < 1e-15 && t.im.abs() < 1e-15, "{t}");
    }

    #[test]
    fn evaluate_rejects_non_positive_frequency() {
        let ip = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        assert!(matches!(ip.evaluate(0.0), Err(Error::Domain(_))));
        assert!(matches!(ip.evaluate(-1.0), Err(Error::Domain(_))));
        assert!(matches!(ip.evaluate(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn ip_margins() {
        for kp in [1.0, 10.0, 0.5] {
            let r = margins_ip(&Gains::ip(kp)).unwrap();
            assert_eq!(r.phase_margin_deg, Some(90.0));
            assert_eq!(r.gain_margin, GainMargin::Infinite);
            assert_eq!(r.omega_gain_crossover, Some(kp));
            assert_eq!(r.omega_phase_crossover, None);
        }
        assert!(matches!(margins_ip(&Gains::ip(0.0)), Err(Error::InvalidGains(_))));
        assert!(matches!(margins_ip(&Gains::ip(-1.0)), Err(Error::InvalidGains(_))));
    }

    #[test]
    fn ipi_margins_match_oracle_values() {
        // oracle: bisection on |T| = 1 then phase readout (tests/oracles.rs)
        let r = margins_ipi(&Gains::ipi(1.0, 1.0)).unwrap();
        assert!(close(r.omega_gain_crossover.unwrap(), 1.272_019_649_514_069, 1e-12));
        assert!(close(r.phase_margin_deg.unwrap(), 51.827_292_372_987_76, 1e-12));
        assert!(r.gain_margin.is_infinite());
    }

    #[test]
    fn ipi_45_degree_relation() {
        for kp in [0.3, 1.0, 2.5, 40.0] {
            let ki = ipi_ki_for_45deg(kp).unwrap();
            let r = margins_ipi(&Gains::ipi(kp, ki)).unwrap();
            assert!(close(r.omega_gain_crossover.unwrap(), ki / kp, 1e-12));
            assert!(close(r.phase_margin_deg.unwrap(), 45.0, 1e-12));
        }
    }

    #[test]
    fn ipi_tends_to_ip_as_ki_vanishes() {
        let r = margins_ipi(&Gains::ipi(1.0, 1e-9)).unwrap();
        assert!((r.phase_margin_deg.unwrap() - 90.0).abs() < 1e-6);
        assert!(matches!(margins_ipi(&Gains::ipi(1.0, 0.0)), Err(Error::InvalidGains(_))));
    }

    #[test]
    fn ipd_is_ipi_with_swapped_roles() {
        let pd = margins_ipd(&Gains::ipd(1.0, 1.0)).unwrap();
        let pi = margins_ipi(&Gains::ipi(1.0, 1.0)).unwrap();
        assert_eq!(pd, pi);

        // w^4 - kd^2 w^2 - kp^2 = 0 with kd = 1, kp = 4
        let r = margins_ipd(&Gains::ipd(4.0, 1.0)).unwrap();
        let w = r.omega_gain_crossover.unwrap();
        assert!(close(w * w, (1.0 + 65f64.sqrt()) / 2.0, 1e-12));
    }

    #[test]
    fn ipid_closed_forms() {
        let r = margins_ipid(&Gains::ipid(1.0, 4.0, 1.0)).unwrap();
        assert!(close(r.omega_phase_crossover.unwrap(), 2.0, 1e-15));
        assert_eq!(r.gain_margin, GainMargin::Finite(4.0));

        let r = margins_ipid(&Gains::ipid(1.0, 1.0, 2.0)).unwrap();
        // oracle values from bisection on |T| = 1 (tests/oracles.rs)
        assert!(close(r.omega_gain_crossover.unwrap(), 1.774_231_956_567_344_6, 1e-12));
        assert!(close(r.phase_margin_deg.unwrap(), 71.477_792_556_950_89, 1e-10));

        let r = margins_ipid(&Gains::ipid(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.gain_margin, GainMargin::Finite(1.0));

        assert!(margins_ipid(&Gains::ipid(1.0, 0.0, 1.0)).is_err());
        assert!(margins_ipid(&Gains::ipid(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn ipid_with_three_crossovers_reports_worst() {
        // kd = 3, ki = 1, small kp: |T| = 1 is crossed three times
        let g = Gains::ipid(0.05, 1.0, 3.0);
        let r = margins_ipid(&g).unwrap();
        assert_eq!(r.gain_crossovers.len(), 3);
        let worst = r
            .gain_crossovers
            .iter()
            .map(|c| c.phase_margin_deg)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.phase_margin_deg, Some(worst));
        let tf = OpenLoopTf::new(ControllerKind::IPID, g);
        for c in &r.gain_crossovers {
            assert!((tf.evaluate(c.omega).unwrap().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn delay_margin() {
        assert!(close(delay_margin_ip(1.0).unwrap(), PI / 2.0, 1e-15));
        assert!(close(delay_margin_ip(10.0).unwrap(), PI / 20.0, 1e-15));
        assert!(close(delay_margin_ip(PI / 2.0).unwrap(), 1.0, 1e-15));
        assert!(delay_margin_ip(0.0).is_err());
    }

    #[test]
    fn numeric_matches_ip_and_delayed_ip() {
        let range = FrequencyRange::default();
        let ip = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        let r = margins_numeric(&ip, &range, 1e-14).unwrap();
        assert!((r.phase_margin_deg.unwrap() - 90.0).abs() < 1e-6);
        assert!(r.gain_margin.is_infinite());

        let delayed = ip.with_delay(PI / 2.0);
        let r = margins_numeric(&delayed, &range, 1e-14).unwrap();
        assert!(r.phase_margin_deg.unwrap().abs() < 1e-6, "{r:?}");
        // at the delay margin the phase crossover coincides with omega = kp
        assert!((r.omega_phase_crossover.unwrap() - 1.0).abs() < 1e-9);
        assert!((r.gain_margin.value() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn numeric_finds_crossovers_between_grid_points() {
        // |T| dips below 1 near sqrt(ki / kd) over a band narrower than
        // one grid step
        let g = Gains::ipid(0.010185669462771925, 1.0, 57.69622151644501);
        let tf = OpenLoopTf::new(ControllerKind::IPID, g);
        let a = margins_ipid(&g).unwrap();
        let n = margins_numeric(&tf, &FrequencyRange::default(), 1e-13).unwrap();
        assert_eq!(a.gain_crossovers.len(), 3);
        assert_eq!(n.gain_crossovers.len(), 3);
        for (x, y) in a.gain_crossovers.iter().zip(&n.gain_crossovers) {
            assert!(close(x.omega, y.omega, 1e-9), "{} {}", x.omega, y.omega);
        }
        assert!(close(a.phase_margin_deg.unwrap(), n.phase_margin_deg.unwrap(), 1e-6));
    }

    #[test]
    fn numeric_reports_missing_crossover() {
        // kp/s with kp = 1e-6 crosses |T| = 1 at 1e-6, below the grid
        let tf = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1e-6));
        let r = margins_numeric(&tf, &FrequencyRange::default(), 1e-12).unwrap();
        assert_eq!(r.omega_gain_crossover, None);
        assert_eq!(r.phase_margin_deg, None);
        assert!(r.note.is_some());
    }

    #[test]
    fn numeric_rejects_narrow_range() {
        let tf = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        let narrow = FrequencyRange {
            omega_min: 0.1,
            omega_max: 10.0,
            points_per_decade: 100,
        };
        assert!(margins_numeric(&tf, &narrow, 1e-9).is_err());
    }

    #[test]
    fn nyquist_rows() {
        let ip = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        let rows = nyquist_sample(&ip, 0.1, 10.0, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[1].omega - 1.0).abs() < 1e-12);
        for r in &rows {
            assert!((r.phase_deg + 90.0).abs() < 1e-12);
            assert_eq!(r.re, 0.0);
        }

        let delayed = ip.with_delay(0.3);
        for r in nyquist_sample(&delayed, 0.01, 100.0, 25).unwrap() {
            let want = -90.0 - (r.omega * 0.3).to_degrees();
            assert!((r.phase_deg - want).abs() < 1e-9);
        }

        let ipi = OpenLoopTf::new(ControllerKind::IPI, Gains::ipi(1.0, 1.0));
        let wm = margins_ipi(&ipi.gains).unwrap().omega_gain_crossover.unwrap();
        let rows = nyquist_sample(&ipi, wm, 10.0, 2).unwrap();
        assert!(rows[0].gain_db.abs() < 1e-12);

        assert!(nyquist_sample(&ip, 1.0, 1.0, 10).is_err());
        assert!(nyquist_sample(&ip, 1.0, 2.0, 1).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let ip = OpenLoopTf::new(ControllerKind::IP, Gains::ip(1.0));
        let csv = nyquist_csv(&nyquist_sample(&ip, 0.1, 10.0, 4).unwrap());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("omega,re,im,gain_db,phase_deg"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn routh_conditions() {
        assert!(routh_stable(ControllerKind::IPI, &Gains::ipi(0.1, 50.0)));
        assert!(routh_stable(ControllerKind::IPID, &Gains::ipid(2.0, 1.0, 1.0)));
        assert!(!routh_stable(ControllerKind::IPID, &Gains::ipid(1.0, 4.0, 1.0)));
        assert!(!routh_stable(ControllerKind::IPID, &Gains::ipid(1.0, 1.0, 1.0)));
    }

    #[test]
    fn gain_margin_serializes_infinity_as_string() {
        let r = margins_ip(&Gains::ip(1.0)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["gain_margin"], "inf");
        let r = margins_ipid(&Gains::ipid(1.0, 4.0, 1.0)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["gain_margin"], 4.0);
    }
}
