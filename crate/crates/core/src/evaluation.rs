//! Evaluator abstraction, result caching and retry dispatch.
//!
//! An [`Evaluator`] turns a batch of [`EvalRequest`]s into [`EvalResult`]s. The [`Dispatcher`]
//! sits between the optimizer and the evaluator: it consults a [`CacheStore`] by
//! [`Candidate::cache_key`], sends each distinct uncached candidate to the evaluator once,
//! retries failures, and hands back exactly one result per request in request order.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::nsga2::ObjectiveVector;
use crate::search_space::{Candidate, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    /// Unique within a run.
    pub id: String,
    pub candidate: Candidate,
    pub base_prompt: String,
    pub positive_prompt: String,
    pub negative_prompt: String,
}

impl EvalRequest {
    pub fn new(id: String, candidate: Candidate, base_prompt: &str, space: &SearchSpace) -> Self {
        let (positive_prompt, negative_prompt) = space.render_prompt(&candidate, base_prompt);
        Self { id, candidate, base_prompt: base_prompt.into(), positive_prompt, negative_prompt }
    }
}

/// Objectives or an error message for one request; never both.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub id: String,
    pub outcome: Result<ObjectiveVector, String>,
}

impl EvalResult {
    pub fn ok(id: impl Into<String>, objectives: ObjectiveVector) -> Self {
        Self { id: id.into(), outcome: Ok(objectives) }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self { id: id.into(), outcome: Err(message.into()) }
    }

    pub fn objectives(&self) -> Option<ObjectiveVector> {
        self.outcome.as_ref().ok().copied()
    }
}

/// One backend evaluation as logged in a run archive.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub generation: usize,
    pub candidate: Candidate,
    pub time_ms: f64,
    pub quality: f64,
    pub evaluator_id: String,
    /// Milliseconds since the Unix epoch, when a clock was available.
    pub wall_clock_ms: Option<u64>,
}

impl EvaluationRecord {
    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.time_ms, self.quality)
    }
}

/// Something that can score candidates.
///
/// Implementations return one result per request. The [`Dispatcher`] matches results to
/// requests by id, so the order of the returned vector does not matter.
pub trait Evaluator {
    fn id(&self) -> String;
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult>;
}

impl<E: Evaluator + ?Sized> Evaluator for &mut E {
    fn id(&self) -> String {
        (**self).id()
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        (**self).evaluate_batch(requests)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        (**self).evaluate_batch(requests)
    }
}

/// Key → objectives storage consulted before dispatch.
pub trait CacheStore {
    fn get(&self, key: &str) -> Option<ObjectiveVector>;
    fn put(&mut self, key: &str, objectives: ObjectiveVector);
}

impl<C: CacheStore + ?Sized> CacheStore for &mut C {
    fn get(&self, key: &str) -> Option<ObjectiveVector> {
        (**self).get(key)
    }

    fn put(&mut self, key: &str, objectives: ObjectiveVector) {
        (**self).put(key, objectives)
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryCache {
    entries: BTreeMap<String, ObjectiveVector>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CacheStore for MemoryCache {
    fn get(&self, key: &str) -> Option<ObjectiveVector> {
        self.entries.get(key).copied()
    }

    fn put(&mut self, key: &str, objectives: ObjectiveVector) {
        self.entries.insert(key.into(), objectives);
    }
}

/// A dispatched result plus whether it is the first result for its candidate in this run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatched {
    pub result: EvalResult,
    pub fresh: bool,
}

/// Cache + dedup + retry front end for an [`Evaluator`].
pub struct Dispatcher<'a> {
    evaluator: Box<dyn Evaluator + 'a>,
    cache: Box<dyn CacheStore + 'a>,
    store: Option<Box<dyn CacheStore + 'a>>,
    retries: u32,
    backend_requests: usize,
}

impl<'a> Dispatcher<'a> {
    /// In-memory cache and one retry.
    pub fn new(evaluator: impl Evaluator + 'a) -> Self {
        Self::with_cache(evaluator, MemoryCache::new(), 1)
    }

    pub fn with_cache(evaluator: impl Evaluator + 'a, cache: impl CacheStore + 'a, retries: u32) -> Self {
        Self { evaluator: Box::new(evaluator), cache: Box::new(cache), store: None, retries, backend_requests: 0 }
    }

    /// Adds a persistent store consulted after the run cache and before the backend.
    ///
    /// The run cache decides freshness: a candidate first answered by the store is still a
    /// fresh result for this run, so archives do not depend on what the store already holds.
    pub fn persistent(mut self, store: impl CacheStore + 'a) -> Self {
        self.store = Some(Box::new(store));
        self
    }

    pub fn retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn evaluator_id(&self) -> String {
        self.evaluator.id()
    }

    /// Requests sent to the backend so far, retries included.
    pub fn backend_requests(&self) -> usize {
        self.backend_requests
    }

    /// Evaluates `requests`, returning one result per request in the same order.
    ///
    /// Cached candidates are answered without a backend call, a candidate that appears several
    /// times in the batch is sent once, and failed candidates are re-sent up to `retries`
    /// times. Whatever still fails comes back as an error result.
    pub fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<Dispatched> {
        let mut out: Vec<Option<Dispatched>> = (0..requests.len()).map(|_| None).collect();
        // Distinct uncached keys in first-seen order, each with the requests that share it.
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        let mut group_of: BTreeMap<String, usize> = BTreeMap::new();
        for (i, req) in requests.iter().enumerate() {
            let key = req.candidate.cache_key();
            if let Some(obj) = self.cache.get(&key) {
                out[i] = Some(Dispatched { result: EvalResult::ok(req.id.clone(), obj), fresh: false });
            } else if let Some(&g) = group_of.get(&key) {
                groups[g].1.push(i);
            } else {
                group_of.insert(key.clone(), groups.len());
                groups.push((key, alloc::vec![i]));
            }
        }

        let mut pending: Vec<usize> = Vec::new();
        for (g, (key, members)) in groups.iter().enumerate() {
            match self.store.as_ref().and_then(|s| s.get(key)).filter(|o| o.is_valid()) {
                Some(obj) => {
                    self.cache.put(key, obj);
                    for (k, &i) in members.iter().enumerate() {
                        out[i] =
                            Some(Dispatched { result: EvalResult::ok(requests[i].id.clone(), obj), fresh: k == 0 });
                    }
                }
                None => pending.push(g),
            }
        }
        let mut last_error: BTreeMap<usize, String> = BTreeMap::new();
        let mut attempt = 0;
        while !pending.is_empty() {
            let batch: Vec<EvalRequest> = pending.iter().map(|&g| requests[groups[g].1[0]].clone()).collect();
            self.backend_requests += batch.len();
            let mut by_id: BTreeMap<String, Result<ObjectiveVector, String>> =
                self.evaluator.evaluate_batch(&batch).into_iter().map(|r| (r.id, r.outcome)).collect();
            let mut still_failing = Vec::new();
            for (&g, req) in pending.iter().zip(&batch) {
                let outcome = by_id.remove(&req.id).unwrap_or_else(|| Err(String::from("backend returned no result")));
                match outcome {
                    Ok(obj) if obj.is_valid() => {
                        self.cache.put(&groups[g].0, obj);
                        if let Some(store) = self.store.as_mut() {
                            store.put(&groups[g].0, obj);
                        }
                        for (k, &i) in groups[g].1.iter().enumerate() {
                            out[i] =
                                Some(Dispatched { result: EvalResult::ok(requests[i].id.clone(), obj), fresh: k == 0 });
                        }
                    }
                    Ok(obj) => {
                        last_error
                            .insert(g, format!("invalid objectives: time_ms {} quality {}", obj.time_ms, obj.quality));
                        still_failing.push(g);
                    }
                    Err(e) => {
                        last_error.insert(g, e);
                        still_failing.push(g);
                    }
                }
            }
            pending = still_failing;
            if attempt >= self.retries {
                break;
            }
            attempt += 1;
        }
        for g in pending {
            let message = last_error.remove(&g).unwrap_or_default();
            for &i in &groups[g].1 {
                out[i] = Some(Dispatched {
                    result: EvalResult::error(requests[i].id.clone(), message.clone()),
                    fresh: false,
                });
            }
        }
        out.into_iter().map(|d| d.expect("every request is resolved")).collect()
    }
}
