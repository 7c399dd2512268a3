//! Prospective reserves for multi-state life insurance contracts driven by
//! Markov jump processes on hybrid (discrete × continuous) state spaces.
//!
//! * [`discrete`]: finite chains, classical Thiele recursion and forward
//!   Kolmogorov transition probabilities.
//! * [`duration`]: disability with duration-dependent rehabilitation, solved
//!   on a triangular (onset, time) grid.
//! * [`measure`]: random-spouse contracts whose kernel has a continuous part.
//! * [`simulator`]: Monte Carlo of the jump process itself, used as the
//!   independent check on every solver.

pub mod discrete;
pub mod duration;
pub mod error;
pub mod measure;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
