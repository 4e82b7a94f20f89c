//! Generative adversarial imitation learning with linear kernel MDPs: an
//! online optimistic learner, an offline pessimistic learner, and the
//! evaluation tooling around them.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod numerics;
pub mod ogap;
pub mod pgap;
pub mod rng;
pub mod runlog;
pub mod suites;

pub use error::{Error, Result};
