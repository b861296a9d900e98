//! Attention-aware inverse planning.
//!
//! A forward model of attention-limited planning (value-guided construal with
//! a learnable attentional bias) and the inverse problem of recovering bias
//! weights from observed behavior, in a tabular driving gridworld and a small
//! continuous driving simulator. An inverse-reinforcement-learning baseline
//! fits decision noise and auxiliary rewards to the same data for comparison.

pub mod construal;
pub mod continuous;
pub mod driving_world;
pub mod error;
pub mod inference;
pub mod irl;
pub mod oomdp;
pub mod optim;
pub mod planner;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
