//! Model-free control laboratory.
//!
//! * [`types`] and [`scenario`]: gains, controller families, trace rows and
//!   the scenario file format.
//! * [`margins`]: open-loop transfer functions of the intelligent
//!   controllers, closed-form and frequency-sweep stability margins, delay
//!   margin, Nyquist sampling.
//! * [`estimator`]: windowed algebraic estimate of `F`.
//! * [`control`]: the intelligent P/PI/PD/PID law and the reference filter.
//! * [`plants`]: the simulated test plants.
//! * [`harness`]: closed-loop runs, sweeps, CSV traces and SVG plots.
//!
//! Batch operations take an [`Execution`]; with the default `parallel`
//! feature they fan out on rayon, otherwise they run sequentially.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod cubic;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod harness;
pub mod margins;
pub mod plants;
pub mod plot;
pub mod scenario;
pub mod types;

pub use error::{Error, Result};
pub use exec::Execution;
pub use margins::{GainMargin, MarginReport, OpenLoopTf};
pub use scenario::{parse_scenario, EstimatorMode, Scenario};
pub use types::{ControllerKind, Gains, TraceRow};
