//! Real-time planar simulation of bevel-tip needle insertion into layered
//! soft tissue.
//!
//! The needle is an Euler-Bernoulli beam discretised with Hermite elements and
//! supported laterally by a nonlinear Ogden foundation that is built up as the
//! needle advances. See [`sim::Simulator`] for the stepping loop.

pub mod banded;
pub mod fem;
pub mod frames;
pub mod ground_truth;
pub mod metrics;
pub mod session;
pub mod sim;
pub mod plot;
pub mod presets;
pub mod scenario;
pub mod tissue;
pub mod trace;
pub mod tuning;
pub mod units;

pub use frames::{FramePair, Pose2};
pub use sim::{Bevel, ControlInput, ConvergenceReport, NeedleSpec, SimError, SimState, Simulator, SolverConfig, VInput};
pub use tissue::{Boundary, ForceMode, OgdenLayer, TissueDomain};
