//! Sketch abstraction-efficiency scoring.
//!
//! [`metric`] holds the score itself. [`analysis`] checks its derivatives and
//! constraint regions, [`sweeps`] reproduces the 1-D and hyperparameter
//! ablation surfaces, [`dataset`] loads commonsense element databases and
//! annotations, and [`evaluation`] covers VQA benchmarking, agreement
//! statistics and score distributions.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod metric;
pub mod sweeps;

pub use error::{Error, Result};
pub use metric::{sea, Hyperparams, ScoreBreakdown, Signals, Source};
