//! Pay-for-percentile teacher incentives: the occupational-choice model, a
//! synthetic two-tier experiment, psychometric and seeded-tournament scoring,
//! composite awards, the pre-specified estimators, randomization inference and
//! teacher value added.

pub mod awards;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod irt;
pub mod linalg;
pub mod metric;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod tva;
pub mod world;

pub use error::{Error, Result};
