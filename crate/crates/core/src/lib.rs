//! Writer/eraser consensus on an anonymous shared strand.
//!
//! Mobile writers and erasers walk a one-dimensional array of tri-state
//! cells (`Empty`, `0`, `1`). Writers fill empty cells with their mark,
//! erasers remove their mark where it meets the opposite one, and the strand
//! eventually settles on a single value. The crate contains
//!
//! * [`strand`], [`agents`] and [`scheduler`]: the simulator,
//! * [`bounds`]: closed-form absorption probabilities and runtime bounds,
//! * [`oracle`]: a linear-solve oracle for the same quantities,
//! * [`harness`]: batch experiments and CSV/JSON artifacts.

pub mod agents;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod scheduler;
pub mod strand;

pub use agents::{Agent, AgentKind, Direction, Population, Variant};
pub use error::{Error, Result};
pub use scheduler::{run_trial, Decision, Schedule, StepRecord, TrialConfig, TrialResult};
pub use strand::{CellState, Strand, Value};
