//! Multi-objective tuning of text-to-image generation parameters.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of the tuner:
//!
//! * [`search_space`]: the mixed integer / real / token-subset genome with its variation operators.
//! * [`nsga2`]: non-dominated sorting, crowding distance and the elitist evolutionary loop,
//!   including a weighted single-objective mode used for quality-only baselines.
//! * [`evaluation`]: the evaluator abstraction plus caching and retry dispatch.
//! * [`surrogate`]: a deterministic stand-in for a diffusion model + object detector.
//! * [`metrics`]: Pareto-front extraction, exact 2-D hypervolume and repeat statistics.
//! * [`importance`]: CART regression forests and mean-decrease-impurity importances.
//!
//! IO, subprocess backends, file formats and the command line live in the `pareto-tuner` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod evaluation;
pub mod importance;
pub mod metrics;
pub mod nsga2;
pub mod problems;
pub mod search_space;
pub mod seed;
pub mod surrogate;

pub use evaluation::{CacheStore, Dispatcher, EvalRequest, EvalResult, EvaluationRecord, Evaluator, MemoryCache};
pub use metrics::{ComparisonReport, HvPoint, RefPoint, RunStats};
pub use nsga2::{Individual, Mode, NsgaConfig, ObjectiveVector, RunArchive, RunObserver, ScalingWeights};
pub use search_space::{Candidate, Gene, ParamKind, ParamSpec, SearchSpace, SpaceError};
pub use surrogate::{Surrogate, SurrogateConfig};
