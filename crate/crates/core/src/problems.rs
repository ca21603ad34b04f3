//! Analytic test problems expressed as evaluators.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::evaluation::{EvalRequest, EvalResult, Evaluator};
use crate::nsga2::ObjectiveVector;
use crate::search_space::{ParamSpec, SearchSpace};

/// Schaffer's problem N.1: minimize `x^2` and `(x - 2)^2` for `x` in `[-10, 10]`.
///
/// The first objective is reported as `time_ms`, the second as
/// `quality = 1 - (x - 2)^2 / 144`, a decreasing affine map onto `[0, 1]`. Neither map changes
/// the Pareto set, which is `x` in `[0, 2]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Schaffer;

impl Schaffer {
    pub const LO: f64 = -10.0;
    pub const HI: f64 = 10.0;

    pub fn space() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::real("x", Self::LO, Self::HI)]).expect("valid space")
    }

    pub fn objectives(x: f64) -> ObjectiveVector {
        let f2 = (x - 2.0) * (x - 2.0);
        ObjectiveVector::new(x * x, 1.0 - f2 / 144.0)
    }
}

impl Evaluator for Schaffer {
    fn id(&self) -> String {
        String::from("schaffer")
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        requests
            .iter()
            .map(|r| match r.candidate.genes.first().and_then(|g| g.as_real()) {
                Some(x) => EvalResult::ok(r.id.clone(), Self::objectives(x)),
                None => EvalResult::error(r.id.clone(), "expected one real gene"),
            })
            .collect()
    }
}
