//! Domain types shared by the controllers, the margin analysis and the simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intelligent controller family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    #[serde(rename = "ip")]
    IP,
    #[serde(rename = "ipi")]
    IPI,
    #[serde(rename = "ipd")]
    IPD,
    #[serde(rename = "ipid")]
    IPID,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [Self::IP, Self::IPI, Self::IPD, Self::IPID];

    /// Derivation order of the ultra-local model this controller closes.
    pub fn order(self) -> u8 {
        match self {
            Self::IP | Self::IPI => 1,
            Self::IPD | Self::IPID => 2,
        }
    }

    pub fn uses_integral(self) -> bool {
        matches!(self, Self::IPI | Self::IPID)
    }

    pub fn uses_derivative(self) -> bool {
        matches!(self, Self::IPD | Self::IPID)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IP => "ip",
            Self::IPI => "ipi",
            Self::IPD => "ipd",
            Self::IPID => "ipid",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ip" => Ok(Self::IP),
            "ipi" => Ok(Self::IPI),
            "ipd" => Ok(Self::IPD),
            "ipid" => Ok(Self::IPID),
            other => Err(Error::key(
                "controller",
                format!("unknown controller `{other}` (expected ip, ipi, ipd or ipid)"),
            )),
        }
    }
}

/// Tuning gains of an intelligent controller together with the input scaling
/// `alpha` and the derivation order `nu` of the ultra-local model
/// `y^(nu) = F + alpha * u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub alpha: f64,
    pub nu: u8,
}

impl Gains {
    pub fn ip(kp: f64) -> Self {
        Self {
            kp,
            ki: 0.0,
            kd: 0.0,
            alpha: 1.0,
            nu: 1,
        }
    }

    pub fn ipi(kp: f64, ki: f64) -> Self {
        Self { ki, ..Self::ip(kp) }
    }

    pub fn ipd(kp: f64, kd: f64) -> Self {
        Self {
            kd,
            nu: 2,
            ..Self::ip(kp)
        }
    }

    pub fn ipid(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            ki,
            kd,
            nu: 2,
            ..Self::ip(kp)
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Checks the gain invariants for the given controller family.
    ///
    /// Gains that the family does not use must be zero, gains it does use
    /// must be strictly positive, and `nu` must match the family's order.
    pub fn validate(&self, kind: ControllerKind) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd), ("alpha", self.alpha)] {
            if !v.is_finite() {
                return Err(Error::InvalidGains(format!("{name} must be finite, got {v}")));
            }
        }
        if self.kp <= 0.0 {
            return Err(Error::InvalidGains(format!("kp must be positive, got {}", self.kp)));
        }
        if self.ki < 0.0 || self.kd < 0.0 {
            return Err(Error::InvalidGains("ki and kd must be non-negative".into()));
        }
        if self.alpha == 0.0 {
            return Err(Error::InvalidGains("alpha must be non-zero".into()));
        }
        if self.nu != kind.order() {
            return Err(Error::OrderMismatch(format!(
                "{kind} requires nu = {}, got nu = {}",
                kind.order(),
                self.nu
            )));
        }
        if kind.uses_integral() != (self.ki > 0.0) {
            return Err(Error::InvalidGains(if kind.uses_integral() {
                format!("{kind} requires ki > 0")
            } else {
                format!("{kind} has no integral term, ki must be 0")
            }));
        }
        if kind.uses_derivative() != (self.kd > 0.0) {
            return Err(Error::InvalidGains(if kind.uses_derivative() {
                format!("{kind} requires kd > 0")
            } else {
                format!("{kind} has no derivative term, kd must be 0")
            }));
        }
        Ok(())
    }
}

/// One sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub setpoint: f64,
    pub y_star: f64,
    pub y: f64,
    pub u: f64,
    pub f_true: f64,
    pub f_est: f64,
    /// Tracking error `y_star - y`.
    pub e: f64,
    /// Integral accumulator of the controller after this step. Not part of the CSV trace.
    #[serde(skip)]
    pub integral_e: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "t,setpoint,y_star,y,u,f_true,f_est,e";
}
