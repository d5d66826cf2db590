//! Scenario files: `key = value` lines, optionally grouped under `[section]`
//! headers, `#` comments. Sections are only for readability; every key is
//! unique across the document.
//!
//! ```text
//! [plant]
//! plant = linear
//! delay = 0.2
//! noise_std = 0.03
//!
//! [controller]
//! controller = ip
//! kp = 1
//!
//! [simulation]
//! sample_period = 0.01
//! estimator_window = 0.05
//! duration = 30
//! setpoints = 0:1, 5:0, 10:1
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::control::SetpointProfile;
use crate::error::{Error, Result};
use crate::plants::PlantKind;
use crate::types::{ControllerKind, Gains};

pub const REQUIRED_KEYS: [&str; 6] = [
    "plant",
    "controller",
    "kp",
    "sample_period",
    "estimator_window",
    "duration",
];

pub const OPTIONAL_KEYS: [&str; 10] = [
    "ki",
    "kd",
    "alpha",
    "nu",
    "delay",
    "noise_std",
    "setpoints",
    "reference_tau",
    "seed",
    "estimator_mode",
];

pub const DEFAULT_REFERENCE_TAU: f64 = 0.5;
/// Switching period of the default setpoint schedule.
pub const DEFAULT_STEP_PERIOD: f64 = 5.0;

/// Where `F_est` comes from during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorMode {
    /// Sliding window of `estimator_window` seconds, refreshed every sample.
    #[default]
    Window,
    /// The whole control loop (sampling, estimation, control update) runs at
    /// period `estimator_window`; the window spans the minimum three of those
    /// samples. The plant and the trace stay at `sample_period`.
    Loop,
    /// `F_est := F_true`, bypassing the estimator.
    Oracle,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Window => "window",
            EstimatorMode::Loop => "loop",
            EstimatorMode::Oracle => "oracle",
        }
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "window" => Ok(EstimatorMode::Window),
            "loop" => Ok(EstimatorMode::Loop),
            "oracle" => Ok(EstimatorMode::Oracle),
            other => Err(Error::key(
                "estimator_mode",
                format!("unknown mode `{other}` (expected window, loop or oracle)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantKind,
    pub controller: ControllerKind,
    pub gains: Gains,
    pub sample_period: f64,
    pub estimator_window: f64,
    pub delay: f64,
    pub noise_std: f64,
    pub duration: f64,
    pub setpoints: SetpointProfile,
    pub reference_tau: f64,
    pub seed: u64,
    pub estimator_mode: EstimatorMode,
}

impl Scenario {
    /// Checks every scenario invariant.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::key(key, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::key(key, format!("must be >= 0, got {v}")))
            }
        };
        positive("sample_period", self.sample_period)?;
        positive("duration", self.duration)?;
        positive("estimator_window", self.estimator_window)?;
        if self.estimator_window < self.sample_period {
            return Err(Error::key(
                "estimator_window",
                format!(
                    "must be at least the sample period {}, got {}",
                    self.sample_period, self.estimator_window
                ),
            ));
        }
        non_negative("delay", self.delay)?;
        non_negative("noise_std", self.noise_std)?;
        non_negative("reference_tau", self.reference_tau)?;
        self.gains.validate(self.controller)
    }

    /// Serializes to the scenario file format. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.gains;
        let _ = writeln!(s, "[plant]");
        let _ = writeln!(s, "plant = {}", self.plant);
        let _ = writeln!(s, "delay = {:?}", self.delay);
        let _ = writeln!(s, "noise_std = {:?}", self.noise_std);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[controller]");
        let _ = writeln!(s, "controller = {}", self.controller);
        let _ = writeln!(s, "nu = {}", g.nu);
        let _ = writeln!(s, "kp = {:?}", g.kp);
        let _ = writeln!(s, "ki = {:?}", g.ki);
        let _ = writeln!(s, "kd = {:?}", g.kd);
        let _ = writeln!(s, "alpha = {:?}", g.alpha);
        let _ = writeln!(s, "\n[simulation]");
        let _ = writeln!(s, "sample_period = {:?}", self.sample_period);
        let _ = writeln!(s, "estimator_window = {:?}", self.estimator_window);
        let _ = writeln!(s, "estimator_mode = {}", self.estimator_mode.as_str());
        let _ = writeln!(s, "duration = {:?}", self.duration);
        let _ = writeln!(s, "reference_tau = {:?}", self.reference_tau);
        let points: Vec<String> = self
            .setpoints
            .points()
            .iter()
            .map(|(t, v)| format!("{t:?}:{v:?}"))
            .collect();
        let _ = writeln!(s, "setpoints = {}", points.join(", "));
        s
    }

    /// One of the shipped presets: the figures `fig1` to `fig6`, or
    /// `delay-sweep`, the base scenario for delay sweeps.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "fig1" => include_str!("../presets/fig1.scn"),
            "fig2" => include_str!("../presets/fig2.scn"),
            "fig3" => include_str!("../presets/fig3.scn"),
            "fig4" => include_str!("../presets/fig4.scn"),
            "fig5" => include_str!("../presets/fig5.scn"),
            "fig6" => include_str!("../presets/fig6.scn"),
            "delay-sweep" => include_str!("../presets/delay-sweep.scn"),
            other => {
                return Err(Error::Unsupported(format!(
                    "unknown preset `{other}` (expected fig1 to fig6 or delay-sweep)"
                )))
            }
        };
        parse_scenario(text)
    }

    pub const PRESETS: [&'static str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_scenario(s)
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::key(key, format!("expected a number, got `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::key(key, format!("must be finite, got `{raw}`")));
    }
    Ok(v)
}

fn parse_setpoints(raw: &str) -> Result<SetpointProfile> {
    let points = raw
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (t, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::key("setpoints", format!("expected time:value, got `{pair}`")))?;
            Ok((parse_f64("setpoints", t)?, parse_f64("setpoints", v)?))
        })
        .collect::<Result<Vec<_>>>()?;
    SetpointProfile::new(points)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut values: BTreeMap<&str, &str> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') || line.len() < 3 {
                return Err(Error::Syntax {
                    line: idx + 1,
                    reason: format!("bad section header `{line}`"),
                });
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
            line: idx + 1,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
            return Err(Error::key(key, "unknown key"));
        }
        if values.insert(key, value.trim()).is_some() {
            return Err(Error::key(key, "duplicate key"));
        }
    }

    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| !values.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingKeys(missing));
    }

    let number = |key: &str, default: f64| match values.get(key) {
        Some(raw) => parse_f64(key, raw),
        None => Ok(default),
    };

    let plant: PlantKind = values["plant"].parse()?;
    let controller: ControllerKind = values["controller"].parse()?;
    let nu = match values.get("nu") {
        Some(raw) => raw
            .parse::<u8>()
            .ok()
            .filter(|n| *n == 1 || *n == 2)
            .ok_or_else(|| Error::key("nu", format!("must be 1 or 2, got `{raw}`")))?,
        None => controller.order(),
    };
    if nu != controller.order() {
        return Err(Error::OrderMismatch(format!(
            "controller {controller} requires nu = {}, but nu = {nu}",
            controller.order()
        )));
    }
    let gains = Gains {
        kp: number("kp", 0.0)?,
        ki: number("ki", 0.0)?,
        kd: number("kd", 0.0)?,
        alpha: number("alpha", 1.0)?,
        nu,
    };
    let duration = number("duration", 0.0)?;
    let setpoints = match values.get("setpoints") {
        Some(raw) => parse_setpoints(raw)?,
        None => SetpointProfile::alternating_steps(duration, DEFAULT_STEP_PERIOD, 1.0),
    };
    let seed = match values.get("seed") {
        Some(raw) => raw
            .parse::<u64>()
            .map_err(|_| Error::key("seed", format!("expected an unsigned integer, got `{raw}`")))?,
        None => 0,
    };
    let estimator_mode = match values.get("estimator_mode") {
        Some(raw) => raw.parse()?,
        None => EstimatorMode::Window,
    };

    let scenario = Scenario {
        plant,
        controller,
        gains,
        sample_period: number("sample_period", 0.0)?,
        estimator_window: number("estimator_window", 0.0)?,
        delay: number("delay", 0.0)?,
        noise_std: number("noise_std", 0.0)?,
        duration,
        setpoints,
        reference_tau: number("reference_tau", DEFAULT_REFERENCE_TAU)?,
        seed,
        estimator_mode,
    };
    scenario.validate()?;
    Ok(scenario)
}
