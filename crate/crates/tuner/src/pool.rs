//! Parallel evaluators: a thread pool for pure in-process models and a process pool for
//! protocol backends. Both return results in request order, so parallelism never changes a run.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use pareto_tuner_core::problems::Schaffer;
use pareto_tuner_core::{EvalRequest, EvalResult, Evaluator, SearchSpace, Surrogate};

use crate::protocol::{spawn_backend, BackendHandle, BackendSpec, ProtocolError, WireRequest};

/// An evaluator whose result depends only on the request, so requests may run on any thread.
pub trait PureEvaluator: Sync {
    fn id(&self) -> String;
    fn evaluate_one(&self, req: &EvalRequest) -> EvalResult;
}

impl PureEvaluator for Surrogate {
    fn id(&self) -> String {
        Evaluator::id(self)
    }

    fn evaluate_one(&self, req: &EvalRequest) -> EvalResult {
        EvalResult { id: req.id.clone(), outcome: self.evaluate(&req.candidate) }
    }
}

impl PureEvaluator for Schaffer {
    fn id(&self) -> String {
        Evaluator::id(self)
    }

    fn evaluate_one(&self, req: &EvalRequest) -> EvalResult {
        let mut this = *self;
        this.evaluate_batch(std::slice::from_ref(req)).remove(0)
    }
}

/// Splits each batch into `parallelism` contiguous chunks evaluated on scoped threads.
pub struct ThreadPool<P> {
    inner: P,
    parallelism: usize,
}

impl<P: PureEvaluator> ThreadPool<P> {
    pub fn new(inner: P, parallelism: usize) -> Self {
        Self { inner, parallelism: parallelism.max(1) }
    }
}

impl<P: PureEvaluator> Evaluator for ThreadPool<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        if self.parallelism == 1 || requests.len() < 2 {
            return requests.iter().map(|r| self.inner.evaluate_one(r)).collect();
        }
        let chunk = requests.len().div_ceil(self.parallelism);
        let inner = &self.inner;
        thread::scope(|s| {
            let workers: Vec<_> = requests
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|r| inner.evaluate_one(r)).collect::<Vec<_>>()))
                .collect();
            workers.into_iter().flat_map(|w| w.join().expect("evaluator thread panicked")).collect()
        })
    }
}

/// One backend process per worker; each process has at most one request in flight.
///
/// A worker whose backend fails reports the error for that request and starts a fresh process
/// for its next request.
pub struct ProcessPool {
    spec: BackendSpec,
    space: SearchSpace,
    workers: Vec<Option<BackendHandle>>,
}

impl ProcessPool {
    /// Starts `parallelism` backends up front so a bad command fails before any run begins.
    pub fn spawn(spec: BackendSpec, space: SearchSpace, parallelism: usize) -> Result<Self, ProtocolError> {
        let workers = (0..parallelism.max(1)).map(|_| spawn_backend(&spec).map(Some)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { spec, space, workers })
    }

    pub fn size(&self) -> usize {
        self.workers.len()
    }

    fn serve(
        spec: &BackendSpec,
        slot: &mut Option<BackendHandle>,
        wire: &WireRequest,
    ) -> Result<pareto_tuner_core::ObjectiveVector, String> {
        if slot.as_ref().is_none_or(|h| h.is_dead()) {
            *slot = Some(spawn_backend(spec).map_err(|e| e.to_string())?);
        }
        let handle = slot.as_mut().expect("slot filled above");
        match handle.roundtrip(wire) {
            Ok(resp) => resp.outcome,
            Err(e) => {
                *slot = None;
                Err(e.to_string())
            }
        }
    }
}

impl Evaluator for ProcessPool {
    fn id(&self) -> String {
        format!("external:{}", self.spec.display_command())
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        let wire: Vec<Result<WireRequest, String>> =
            requests.iter().map(|r| WireRequest::from_eval(r, &self.space)).collect();
        let results: Mutex<Vec<Option<EvalResult>>> = Mutex::new(vec![None; requests.len()]);
        let next = AtomicUsize::new(0);
        let spec = &self.spec;
        thread::scope(|s| {
            for slot in self.workers.iter_mut() {
                let (wire, results, next) = (&wire, &results, &next);
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= requests.len() {
                        break;
                    }
                    let outcome = match &wire[i] {
                        Ok(w) => Self::serve(spec, slot, w),
                        Err(e) => Err(e.clone()),
                    };
                    results.lock().expect("results lock")[i] = Some(EvalResult { id: requests[i].id.clone(), outcome });
                });
            }
        });
        results.into_inner().expect("results lock").into_iter().map(|r| r.expect("every request served")).collect()
    }
}
