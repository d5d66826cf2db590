//! Command-line front end of the model-free control lab.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfc_core::harness::{self, emit_plot, emit_trace, run_scenario};
use mfc_core::margins::{self, FrequencyRange, MarginReport};
use mfc_core::plants::PlantKind;
use mfc_core::plot;
use mfc_core::{ControllerKind, Error, Execution, Gains, OpenLoopTf, Result, Scenario};

#[derive(Parser)]
#[command(name = "mfc", version, about = "Model-free control lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gain and phase margins of an intelligent controller loop.
    Margins {
        #[command(flatten)]
        gains: GainArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Largest input delay an iP loop tolerates, pi / (2 kp).
    DelayMargin {
        #[arg(long)]
        kp: f64,
        #[arg(long)]
        json: bool,
    },
    /// Frequency response samples as CSV (and optionally an SVG plot).
    Nyquist {
        #[command(flatten)]
        gains: GainArgs,
        #[arg(long, default_value_t = 1e-2)]
        omega_min: f64,
        #[arg(long, default_value_t = 1e2)]
        omega_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a scenario file and write `<name>.csv` and `<name>.svg`.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one of the figure presets (fig1 to fig6).
    Reproduce {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run the whole control loop at the estimator window period.
        #[arg(long)]
        slow_loop: bool,
    },
    /// Closed-loop stability of an iP loop over a grid of input delays.
    SweepDelay {
        #[arg(long)]
        kp: f64,
        #[arg(long)]
        tau_min: f64,
        #[arg(long)]
        tau_max: f64,
        #[arg(long)]
        step: f64,
        /// Base scenario file; defaults to the `delay-sweep` preset.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override the plant of the base scenario.
        #[arg(long)]
        plant: Option<PlantKind>,
        /// Override the run length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Run the sweep on a single thread.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct GainArgs {
    #[arg(long)]
    controller: ControllerKind,
    #[arg(long)]
    kp: f64,
    #[arg(long, default_value_t = 0.0)]
    ki: f64,
    #[arg(long, default_value_t = 0.0)]
    kd: f64,
    /// Input delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
}

impl GainArgs {
    fn transfer_function(&self) -> Result<OpenLoopTf> {
        let gains = Gains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            alpha: 1.0,
            nu: self.controller.order(),
        };
        gains.validate(self.controller)?;
        if !self.delay.is_finite() || self.delay < 0.0 {
            return Err(Error::Domain(format!("delay must be >= 0, got {}", self.delay)));
        }
        Ok(OpenLoopTf::new(self.controller, gains).with_delay(self.delay))
    }
}

fn print_report(report: &MarginReport, json: bool) -> Result<()> {
    if json {
        let text = serde_json::to_string_pretty(report)
            .map_err(|e| Error::Domain(format!("cannot serialize report: {e}")))?;
        println!("{text}");
        return Ok(());
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"));
    if report.gain_margin.is_infinite() {
        println!("gain margin:       inf");
    } else {
        println!(
            "gain margin:       {:.6} ({:.3} dB)",
            report.gain_margin.value(),
            report.gain_margin_db
        );
    }
    println!("phase margin:      {} deg", opt(report.phase_margin_deg));
    println!("gain crossover:    {} rad/s", opt(report.omega_gain_crossover));
    println!("phase crossover:   {} rad/s", opt(report.omega_phase_crossover));
    if report.gain_crossovers.len() > 1 {
        for c in &report.gain_crossovers {
            println!("  crossover {:.6} rad/s, PM {:.6} deg", c.omega, c.phase_margin_deg);
        }
    }
    if let Some(note) = &report.note {
        println!("note: {note}");
    }
    Ok(())
}

fn simulate(path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let scenario: Scenario = text.parse()?;
    let result = run_scenario(&scenario)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let csv = out.join(format!("{stem}.csv"));
    let svg = out.join(format!("{stem}.svg"));
    emit_trace(&result, &csv)?;
    emit_plot(&result, stem, &svg)?;
    println!("{}", result.summary());
    for note in &result.notes {
        println!("note: {note}");
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Margins { gains, json } => {
            let tf = gains.transfer_function()?;
            let report = if tf.delay > 0.0 {
                margins::margins_numeric(&tf, &FrequencyRange::default(), 1e-12)?
            } else {
                margins::margins_analytic(&tf)?
            };
            print_report(&report, json)
        }
        Command::DelayMargin { kp, json } => {
            let tau = margins::delay_margin_ip(kp)?;
            if json {
                println!("{}", serde_json::json!({ "kp": kp, "tau_max": tau }));
            } else {
                println!("tau_max = {tau:.6} s");
            }
            Ok(())
        }
        Command::Nyquist {
            gains,
            omega_min,
            omega_max,
            points,
            out,
            svg,
        } => {
            let tf = gains.transfer_function()?;
            let rows = margins::nyquist_sample(&tf, omega_min, omega_max, points)?;
            write(&out, &margins::nyquist_csv(&rows))?;
            if let Some(svg) = svg {
                let title = format!("{} loop", gains.controller);
                write(&svg, &plot::frequency_svg(&rows, &title))?;
            }
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Simulate { scenario, out } => simulate(&scenario, &out),
        Command::Reproduce { name, out, slow_loop } => {
            let rep = harness::reproduce(&name, &out, slow_loop)?;
            println!("{name}: {}", rep.result.summary());
            for note in &rep.result.notes {
                println!("note: {note}");
            }
            println!("wrote {} and {}", rep.trace_path.display(), rep.plot_path.display());
            Ok(())
        }
        Command::SweepDelay {
            kp,
            tau_min,
            tau_max,
            step,
            scenario,
            plant,
            duration,
            sequential,
        } => {
            let mut base = match scenario {
                Some(path) => std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io { path, source: e })?
                    .parse()?,
                None => Scenario::preset("delay-sweep")?,
            };
            if let Some(plant) = plant {
                base.plant = plant;
            }
            if let Some(d) = duration {
                base.duration = d;
            }
            let exec = if sequential { Execution::Sequential } else { Execution::default() };
            let taus = harness::delay_grid(tau_min, tau_max, step, base.sample_period)?;
            let points = harness::delay_sweep(kp, &taus, &base, exec)?;
            println!("tau,stable,tracking_rmse");
            for p in &points {
                println!("{:.6},{},{}", p.tau, p.stable, p.tracking_rmse);
            }
            match harness::stability_boundary(&points) {
                Some(tau) => println!("first unstable delay: {tau:.6} s"),
                None => println!("first unstable delay: none in range"),
            }
            println!("analytic delay margin: {:.6} s", margins::delay_margin_ip(kp)?);
            Ok(())
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
