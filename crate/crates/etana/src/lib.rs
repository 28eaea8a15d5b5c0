//! Sequential classification with per-feature costs: features are bought
//! one at a time in a fixed order and the classifier stops as soon as the
//! expected cost of deciding now drops below the expected cost of looking
//! further. Two stopping policies are provided: an optimal one backed by
//! value iteration on a discretized belief simplex, and a fast one backed
//! by learned linear thresholds.

pub mod dataset;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod fetana;
pub mod grid;
pub mod model;
pub mod probability;
pub mod runtime;
pub mod solver;

pub use error::{Error, Result};
