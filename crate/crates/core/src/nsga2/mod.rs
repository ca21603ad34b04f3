//! Elitist non-dominated sorting GA over a mixed [`SearchSpace`](crate::SearchSpace).
//!
//! Both objectives are mapped through [`ScalingWeights`] before any comparison, and the scaled
//! coordinates are maximized. [`Mode::Pareto`] compares the two scaled coordinates with Pareto
//! dominance; [`Mode::WeightedSingle`] collapses them into their sum, which turns the same loop
//! into a single-objective GA.

mod evolve;
mod selection;
mod sorting;

use alloc::string::String;
use alloc::vec::Vec;

pub use evolve::{evolve, GenerationSnapshot, RunObserver};
pub use selection::{select_survivors, tournament_select};
pub use sorting::{
    assign_rank_and_crowding, crowding_distance, crowding_distances, dominates, dominates_slice,
    fast_nondominated_sort, nondominated_fronts,
};

use crate::evaluation::EvaluationRecord;
use crate::metrics::RefPoint;
use crate::search_space::{Candidate, SearchSpace};

/// Raw objectives of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveVector {
    /// Inference time in milliseconds.
    pub time_ms: f64,
    /// Detection-confidence score in `[0, 1]`.
    pub quality: f64,
}

impl ObjectiveVector {
    pub fn new(time_ms: f64, quality: f64) -> Self {
        Self { time_ms, quality }
    }

    pub fn is_valid(&self) -> bool {
        self.time_ms.is_finite() && self.time_ms >= 0.0 && (0.0..=1.0).contains(&self.quality)
    }

    pub fn time_s(&self) -> f64 {
        self.time_ms / 1000.0
    }

    /// `(w_quality * quality, w_time * time_s)`.
    pub fn scaled(&self, w: &ScalingWeights) -> (f64, f64) {
        (w.w_quality * self.quality, w.w_time * self.time_s())
    }

    /// `w_quality * quality + w_time * time_s`.
    pub fn scalar(&self, w: &ScalingWeights) -> f64 {
        let (q, t) = self.scaled(w);
        q + t
    }
}

/// Objective weights. A positive weight means the objective is maximized, a negative one that
/// it is minimized. The time weight applies to seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingWeights {
    pub w_quality: f64,
    pub w_time: f64,
}

impl ScalingWeights {
    pub const fn new(w_quality: f64, w_time: f64) -> Self {
        Self { w_quality, w_time }
    }

    /// Quality-only weights used by the single-objective baseline.
    pub const QUALITY_ONLY: Self = Self::new(1.0, 0.0);
}

impl Default for ScalingWeights {
    fn default() -> Self {
        Self::new(0.001, -1000.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    #[default]
    Pareto,
    WeightedSingle,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("{0} must lie in [0, 1]")]
    RateOutOfRange(&'static str),
    #[error("weights must be finite")]
    NonFiniteWeights,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NsgaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub weights: ScalingWeights,
    pub mode: Mode,
    pub master_seed: u64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        Self {
            population_size: 25,
            generations: 50,
            mutation_rate: 0.2,
            crossover_rate: 0.2,
            weights: ScalingWeights::default(),
            mode: Mode::Pareto,
            master_seed: 0,
        }
    }
}

impl NsgaConfig {
    /// Default settings in weighted mode with quality-only weights.
    pub fn quality_only_baseline() -> Self {
        Self { weights: ScalingWeights::QUALITY_ONLY, mode: Mode::WeightedSingle, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size == 0 {
            return Err(ConfigError::EmptyPopulation);
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(ConfigError::RateOutOfRange("mutation_rate"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(ConfigError::RateOutOfRange("crossover_rate"));
        }
        if !self.weights.w_quality.is_finite() || !self.weights.w_time.is_finite() {
            return Err(ConfigError::NonFiniteWeights);
        }
        Ok(())
    }

    /// The coordinates compared during sorting: two scaled objectives in pareto mode, their
    /// sum in weighted mode. All coordinates are maximized.
    pub fn fitness(&self, o: &ObjectiveVector) -> Fitness {
        match self.mode {
            Mode::Pareto => {
                let (q, t) = o.scaled(&self.weights);
                Fitness { coords: [q, t], dims: 2 }
            }
            Mode::WeightedSingle => Fitness { coords: [o.scalar(&self.weights), 0.0], dims: 1 },
        }
    }
}

/// Maximized comparison coordinates of one individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    coords: [f64; 2],
    dims: usize,
}

impl AsRef<[f64]> for Fitness {
    fn as_ref(&self) -> &[f64] {
        &self.coords[..self.dims]
    }
}

/// A candidate with its objectives and its sorting state.
///
/// `rank` (front index, 0 = non-dominated) and `crowding` are set by
/// [`assign_rank_and_crowding`] and only describe the population they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub candidate: Candidate,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(candidate: Candidate, objectives: ObjectiveVector) -> Self {
        Self { candidate, objectives, rank: usize::MAX, crowding: 0.0 }
    }
}

/// Everything one optimization run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub config: NsgaConfig,
    pub space: SearchSpace,
    pub base_prompt: String,
    pub evaluator_id: String,
    pub ref_point: RefPoint,
    /// One record per backend evaluation, in evaluation order.
    pub records: Vec<EvaluationRecord>,
    /// Rank-0 members of the final population, one per distinct candidate.
    pub final_front: Vec<Individual>,
    pub complete: bool,
    pub failure: Option<String>,
}
