//! Linearly-solvable Markov decision processes with hierarchical
//! decomposition.
//!
//! The crate is organised bottom-up:
//!
//! - [`lmdp`]: the LMDP type, exact power-iteration solver, optimal policy
//!   extraction and single Z-learning updates.
//! - [`hierarchy`]: partitions into subtasks, equivalence classes, base
//!   LMDPs, compositional state values and the exit-state system.
//! - [`learner`]: model-free hierarchical Z-learning (variants V1, V2, V3)
//!   and the flat importance-sampled Z-learning baseline.
//! - [`envs`]: rooms and taxi generators plus an ASCII map loader.
//! - [`bench`]: ground truth, MAE and multi-seed benchmark sweeps.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod bench;
pub mod envs;
mod error;
pub mod hierarchy;
pub mod learner;
pub mod lmdp;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Lmdp64 = lmdp::Lmdp<f64>;
pub type ZVector64 = lmdp::ZVector<f64>;
pub type SolveConfig64 = lmdp::SolveConfig<f64>;
pub type SubtaskTemplate64 = hierarchy::SubtaskTemplate<f64>;
pub type BaseValueSet64 = hierarchy::BaseValueSet<f64>;
pub type ExitSystem64 = hierarchy::ExitSystem<f64>;
pub type Decomposition64 = envs::Decomposition<f64>;
pub type LearnerState64 = learner::LearnerState<f64>;
pub type LearnConfig64 = learner::LearnConfig<f64>;
pub type BenchmarkConfig64 = bench::BenchmarkConfig<f64>;

pub type Lmdp32 = lmdp::Lmdp<f32>;
pub type ZVector32 = lmdp::ZVector<f32>;
pub type SolveConfig32 = lmdp::SolveConfig<f32>;
