//! Divide-and-conquer inference of system-level guarded state machines
//! from the interleaved logs of component-based systems.
//!
//! The pipeline projects system logs onto each component, infers one
//! deterministic model per component, stitches the component models back
//! together along the interleavings recorded in each log, and finally
//! determinizes the stitched machine.

pub mod automaton;
pub mod deadline;
pub mod determinization;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod log_model;
pub mod pipeline;
pub mod pool;
pub mod scalar;
pub mod stitching;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational used for metrics that must compare without rounding.
pub type Exact = num_rational::Ratio<u64>;

pub type ExactReport = evaluation::EvalReport<Exact>;
pub type FloatReport = evaluation::EvalReport<f64>;
pub type SingleReport = evaluation::EvalReport<f32>;
