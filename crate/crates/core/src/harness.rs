//! Closed-loop scenario execution, parameter sweeps and trace output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::control::{ControllerState, ReferenceFilter};
use crate::error::{Error, Result};
use crate::estimator::{f_true, SampledWindow, MIN_SAMPLES};
use crate::exec::Execution;
use crate::plants::{PlantKind, PlantState};
use crate::plot;
use crate::scenario::{EstimatorMode, Scenario};
use crate::types::TraceRow;

/// Outputs beyond this multiple of the largest setpoint over the final 10% of
/// a run mark it unstable.
pub const INSTABILITY_FACTOR: f64 = 1e3;

/// Growth of the tracking error between mid-run and the end that marks a run
/// unstable.
pub const GROWTH_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: Vec<TraceRow>,
    pub stable: bool,
    /// RMS of `e` over the final half of the run, after warm-up.
    /// Infinite when the run diverged.
    pub tracking_rmse: f64,
    /// RMS of `f_est - f_true` after warm-up.
    pub estimation_rmse: f64,
    pub diverged_at: Option<f64>,
    /// End of the warm-up period excluded from the RMS figures.
    pub warmup: f64,
    pub notes: Vec<String>,
}

impl RunResult {
    /// `tracking_rmse` relative to the largest setpoint magnitude.
    pub fn relative_tracking_error(&self, scenario: &Scenario) -> f64 {
        self.tracking_rmse / scenario.setpoints.max_abs().max(f64::MIN_POSITIVE)
    }

    /// One-line human readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "stable={} tracking_rmse={:.6e} estimation_rmse={:.6e} rows={}",
            self.stable,
            self.tracking_rmse,
            self.estimation_rmse,
            self.trace.len()
        );
        if let Some(t) = self.diverged_at {
            let _ = write!(s, " diverged_at={t}");
        }
        s
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Peak `|e|` over the final 10% exceeds [`GROWTH_FACTOR`] times the peak
/// over the 10% ending at mid-run. Catches slowly growing oscillations that
/// have not reached the absolute threshold yet.
fn error_grows(trace: &[TraceRow], duration: f64) -> bool {
    let peak = |lo: f64, hi: f64| {
        trace
            .iter()
            .filter(|r| r.t >= lo && r.t < hi)
            .map(|r| r.e.abs())
            .fold(0.0, f64::max)
    };
    let middle = peak(0.4 * duration, 0.5 * duration);
    let tail = peak(0.9 * duration, f64::INFINITY);
    tail > GROWTH_FACTOR * middle.max(1e-9)
}

/// Runs one closed loop for the scenario's duration.
///
/// Each sample: measure `y`, update the window, estimate `F`, evaluate the
/// reference, apply the control law, then push the command through the
/// delay line and advance the plant by one period. Divergence ends the run
/// early and marks it unstable.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    if scenario.controller.order() != 1 {
        return Err(Error::Unsupported(format!(
            "controller {} needs a second-order ultra-local model; the simulator estimates F for nu = 1 only",
            scenario.controller
        )));
    }

    let period = scenario.sample_period;
    let alpha = scenario.gains.alpha;
    let nu = scenario.gains.nu;
    let steps = (scenario.duration / period).round().max(1.0) as usize;
    let mut notes = Vec::new();

    let mut plant = PlantState::new(
        scenario.plant,
        period,
        scenario.delay,
        scenario.noise_std,
        scenario.seed,
    )?;
    if (plant.effective_delay() - scenario.delay).abs() > 1e-9 {
        notes.push(format!(
            "delay {} s rounded to {} s (whole samples)",
            scenario.delay,
            plant.effective_delay()
        ));
    }

    // Control updates every `ratio` plant samples.
    let (ratio, mut window) = match scenario.estimator_mode {
        EstimatorMode::Loop => {
            let ratio = (scenario.estimator_window / period).round().max(1.0) as usize;
            (ratio, SampledWindow::new(MIN_SAMPLES, ratio as f64 * period)?)
        }
        EstimatorMode::Window | EstimatorMode::Oracle => {
            (1, SampledWindow::for_length(scenario.estimator_window, period)?)
        }
    };
    let control_period = ratio as f64 * period;
    if scenario.estimator_mode == EstimatorMode::Window
        && (window.length() - scenario.estimator_window).abs() > 1e-9
    {
        notes.push(format!(
            "estimator window {} s realized as {} samples spanning {} s",
            scenario.estimator_window,
            window.capacity(),
            window.length()
        ));
    }
    let warmup = match scenario.estimator_mode {
        EstimatorMode::Oracle => scenario.reference_tau,
        _ => window.length() + scenario.reference_tau,
    };

    let mut controller = ControllerState::new(scenario.controller, scenario.gains)?;
    let initial_setpoint = scenario.setpoints.value_at(0.0);
    let mut reference = ReferenceFilter::new(scenario.reference_tau, initial_setpoint)?;

    let mut trace = Vec::with_capacity(steps);
    let mut measurement = plant.measure();
    let mut u_prev = 0.0;
    let mut f_est = 0.0;
    let mut diverged_at = None;

    for k in 0..steps {
        let t = k as f64 * period;
        let setpoint = scenario.setpoints.value_at(t);
        let r = reference.current(setpoint);
        let y = measurement.y_measured;
        // The ultra-local model sees the input the plant received, i.e. the
        // command after the transport delay.
        let applied = measurement.applied;
        let f_exact = f_true(measurement.y_dot, applied, alpha);
        let e = r.y - y;

        let u = if k % ratio == 0 {
            window.push(t, y, applied);
            let estimate = match scenario.estimator_mode {
                EstimatorMode::Oracle => Some(f_exact),
                _ => window.estimate(alpha),
            };
            let command = match estimate {
                Some(f) => {
                    f_est = f;
                    controller.step(f, r.derivative(nu), e, control_period)
                }
                None => {
                    f_est = 0.0;
                    Ok(controller.warmup_step(r.derivative(nu), e))
                }
            };
            match command {
                Ok(u) => u,
                Err(err) => {
                    trace.push(TraceRow {
                        t,
                        setpoint,
                        y_star: r.y,
                        y,
                        u: f64::NAN,
                        f_true: f_exact,
                        f_est,
                        e,
                        integral_e: controller.integral(),
                    });
                    notes.push(format!("controller fault at t = {t}: {err}"));
                    diverged_at = Some(t);
                    break;
                }
            }
        } else {
            u_prev
        };

        trace.push(TraceRow {
            t,
            setpoint,
            y_star: r.y,
            y,
            u,
            f_true: f_exact,
            f_est,
            e,
            integral_e: controller.integral(),
        });

        match plant.step(u) {
            Ok(out) => measurement = out,
            Err(div) => {
                notes.push(div.to_string());
                diverged_at = Some(div.t);
                break;
            }
        }
        reference.step(setpoint, period);
        u_prev = u;
    }

    let duration = scenario.duration;
    let tail_start = 0.9 * duration;
    let limit = INSTABILITY_FACTOR * scenario.setpoints.max_abs().max(1.0);
    let blew_up = trace
        .iter()
        .filter(|row| row.t >= tail_start)
        .any(|row| !(row.y.abs() <= limit));
    let stable = diverged_at.is_none() && !blew_up && !error_grows(&trace, duration);

    let tracking_rmse = if diverged_at.is_some() {
        f64::INFINITY
    } else {
        let from = warmup.max(0.5 * duration);
        rms(trace.iter().filter(|r| r.t >= from).map(|r| r.e))
    };
    let estimation_rmse = if diverged_at.is_some() {
        f64::INFINITY
    } else {
        rms(trace.iter().filter(|r| r.t >= warmup).map(|r| r.f_est - r.f_true))
    };

    Ok(RunResult {
        trace,
        stable,
        tracking_rmse,
        estimation_rmse,
        diverged_at,
        warmup,
        notes,
    })
}

/// Runs many scenarios, in parallel when `exec` allows it.
pub fn run_batch(scenarios: &[Scenario], exec: Execution) -> Vec<Result<RunResult>> {
    exec.map(scenarios, run_scenario)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPoint {
    pub tau: f64,
    pub stable: bool,
    pub tracking_rmse: f64,
}

/// One run per delay under an iP loop with gain `kp`; everything else,
/// including the plant, comes from `base` (`linear` and `linear-delayed` are
/// switched to match the delay). Results are ordered by delay.
pub fn delay_sweep(
    kp: f64,
    tau_values: &[f64],
    base: &Scenario,
    exec: Execution,
) -> Result<Vec<DelayPoint>> {
    let mut taus = tau_values.to_vec();
    taus.sort_by(|a, b| a.total_cmp(b));
    let scenarios: Vec<Scenario> = taus
        .iter()
        .map(|&tau| {
            let mut s = base.clone();
            s.gains.kp = kp;
            s.delay = tau;
            s.plant = match s.plant {
                PlantKind::Linear | PlantKind::LinearDelayed if tau > 0.0 => PlantKind::LinearDelayed,
                PlantKind::Linear | PlantKind::LinearDelayed => PlantKind::Linear,
                other => other,
            };
            s
        })
        .collect();
    run_batch(&scenarios, exec)
        .into_iter()
        .zip(taus)
        .map(|(res, tau)| {
            let r = res?;
            Ok(DelayPoint {
                tau,
                stable: r.stable,
                tracking_rmse: r.tracking_rmse,
            })
        })
        .collect()
}

/// Evenly spaced delays `tau_min, tau_min + step, ...` up to `tau_max`,
/// rounded to whole multiples of the sample period.
pub fn delay_grid(tau_min: f64, tau_max: f64, step: f64, period: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(tau_min >= 0.0) || !(tau_max >= tau_min) {
        return Err(Error::Domain(format!(
            "need 0 <= tau_min <= tau_max and step > 0, got [{tau_min}, {tau_max}] step {step}"
        )));
    }
    let n = ((tau_max - tau_min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((tau_min + i as f64 * step) / period).round() * period)
        .collect())
}

/// First delay of a sweep at which the loop is unstable.
pub fn stability_boundary(points: &[DelayPoint]) -> Option<f64> {
    points.iter().find(|p| !p.stable).map(|p| p.tau)
}

/// One run per estimator window length.
pub fn window_sweep(base: &Scenario, windows: &[f64], exec: Execution) -> Result<Vec<RunResult>> {
    let scenarios: Vec<Scenario> = windows
        .iter()
        .map(|&w| {
            let mut s = base.clone();
            s.estimator_window = w;
            s
        })
        .collect();
    run_batch(&scenarios, exec).into_iter().collect()
}

/// CSV text of a trace, header included.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::with_capacity(96 * (trace.len() + 1));
    out.push_str(TraceRow::CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t, r.setpoint, r.y_star, r.y, r.u, r.f_true, r.f_est, r.e
        );
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn emit_trace(result: &RunResult, path: &Path) -> Result<()> {
    write_file(path, &trace_csv(&result.trace))
}

/// Three-panel plot of a run.
pub fn emit_plot(result: &RunResult, title: &str, path: &Path) -> Result<()> {
    if result.trace.is_empty() {
        return Err(Error::Domain("cannot plot an empty trace".into()));
    }
    write_file(path, &plot::time_series_svg(&result.trace, title))
}

/// Files written by [`reproduce`].
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub scenario: Scenario,
    pub result: RunResult,
    pub trace_path: PathBuf,
    pub plot_path: PathBuf,
}

/// Runs a figure preset and writes `<name>.csv` and `<name>.svg` into `out_dir`.
/// With `slow_loop` the whole control loop runs at the window period
/// instead of sliding a window at the sample period.
pub fn reproduce(name: &str, out_dir: &Path, slow_loop: bool) -> Result<Reproduction> {
    let mut scenario = Scenario::preset(name)?;
    if slow_loop {
        scenario.estimator_mode = EstimatorMode::Loop;
    }
    let result = run_scenario(&scenario)?;
    let trace_path = out_dir.join(format!("{name}.csv"));
    let plot_path = out_dir.join(format!("{name}.svg"));
    emit_trace(&result, &trace_path)?;
    emit_plot(&result, name, &plot_path)?;
    Ok(Reproduction {
        scenario,
        result,
        trace_path,
        plot_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(kp: f64) -> Scenario {
        let mut s = Scenario::preset("fig4").unwrap();
        s.gains.kp = kp;
        s
    }

    #[test]
    fn trace_rows_are_consistent() {
        let r = run_scenario(&Scenario::preset("fig1").unwrap()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        for row in &r.trace {
            assert_eq!(row.e, row.y_star - row.y);
        }
    }

    #[test]
    fn csv_shape() {
        let mut s = linear(1.0);
        s.duration = 10.0;
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.trace.len(), 1000);
        let csv = trace_csv(&r.trace);
        assert_eq!(csv.lines().count(), 1001);
        assert_eq!(csv.lines().next(), Some(TraceRow::CSV_HEADER));
        assert_eq!(trace_csv(&[]), format!("{}\n", TraceRow::CSV_HEADER));
    }

    #[test]
    fn second_order_controllers_are_rejected() {
        let mut s = linear(1.0);
        s.controller = crate::types::ControllerKind::IPD;
        s.gains = crate::types::Gains::ipd(1.0, 1.0);
        assert!(matches!(run_scenario(&s), Err(Error::Unsupported(_))));
    }

    #[test]
    fn integral_is_recorded_for_ipi() {
        let mut s = linear(1.0);
        s.controller = crate::types::ControllerKind::IPI;
        s.gains = crate::types::Gains::ipi(1.0, 0.5);
        s.duration = 5.0;
        let r = run_scenario(&s).unwrap();
        assert!(r.trace.iter().any(|row| row.integral_e != 0.0));
    }

    #[test]
    fn delay_grid_rounds_to_samples() {
        let g = delay_grid(1.0, 2.0, 0.05, 0.01).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 2.0).abs() < 1e-12);
        assert!(delay_grid(1.0, 0.5, 0.1, 0.01).is_err());
    }

    #[test]
    fn sweep_is_sorted_by_delay() {
        let mut base = linear(1.0);
        base.duration = 5.0;
        let pts = delay_sweep(1.0, &[0.3, 0.1, 0.2], &base, Execution::Sequential).unwrap();
        let taus: Vec<f64> = pts.iter().map(|p| p.tau).collect();
        assert_eq!(taus, vec![0.1, 0.2, 0.3]);
    }
}
