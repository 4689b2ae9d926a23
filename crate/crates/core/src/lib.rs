//! Decentralized multi-agent collision avoidance.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`geometry`]: planar vectors, agent state, obstacles and the
//!   heading-aligned local frame every learned component works in.
//! * [`orca`]: the reciprocal velocity-obstacle expert and its 2D linear
//!   program.
//! * [`sensing`]: a simulated 360 beam lidar and coherent point drift scan
//!   registration producing per-beam velocity estimates.
//! * [`dataset`]: expert frame generation, cleansing, augmentation,
//!   standardization, the 61-class velocity partition and the binary
//!   dataset format.
//! * [`canet`]: the two-branch classifier, its training loop, stratified
//!   folds and checkpoints.
//! * [`policy`]: the runtime controller turning class probabilities into a
//!   safe velocity.
//! * [`sim`]: world stepping, scenario builders and metrics.

pub mod canet;
pub mod dataset;
mod error;
pub mod geometry;
pub mod orca;
pub mod policy;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{AgentState, LocalFrame, Obstacle, OrcaParams, Vec2};

/// Sensing-acting cycle period used throughout, in seconds.
pub const CYCLE_PERIOD: f64 = 0.1;
