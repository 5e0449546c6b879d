use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::{frontier, CertificateSet, Frontier, SearchSpace, SpaceError, TrainedRecord};
use crate::eval::{EvalError, Evaluator};
use crate::latency::Latency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionStrategy {
    /// Every candidate equally likely.
    #[default]
    Uniform,
    /// Candidate weight is one plus its number of precedents in the space,
    /// so larger architectures (which can prune more) come up more often.
    /// Materialized spaces only.
    PrecedentWeighted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub seed: u64,
    /// Stop after this many consecutive evaluations that leave the frontier unchanged.
    pub patience: usize,
    pub max_evaluations: Option<usize>,
    pub strategy: SelectionStrategy,
    /// Candidates drawn per round. Evaluated concurrently when the evaluator allows it.
    pub batch_size: usize,
    /// Consecutive rejected draws before a sampled space counts as exhausted.
    pub max_sample_retries: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            patience: 20,
            max_evaluations: None,
            strategy: SelectionStrategy::Uniform,
            batch_size: 1,
            max_sample_retries: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxEvaluations,
    Exhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxEvaluations => "max_evaluations",
            StopReason::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("the search space is empty")]
    EmptySpace,
    #[error("cannot price {element}: {source}")]
    Space { element: String, source: SpaceError },
    #[error("evaluating {element} failed: {source}")]
    Evaluator { element: String, source: EvalError },
}

/// One evaluation, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry<E> {
    pub iteration: usize,
    pub code: E,
    pub latency: Latency,
    pub accuracy: f64,
    /// Trained so far, this one included.
    pub trained: usize,
    /// Pruned so far; `None` when the space is not materialized.
    pub pruned: Option<usize>,
    pub frontier_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStatistics {
    pub trained: usize,
    pub pruned: Option<usize>,
    pub space_size: Option<usize>,
    pub pruned_per_trained: Option<f64>,
    /// `(trained + pruned) / trained`.
    pub coverage_ratio: Option<f64>,
    pub iterations: usize,
    pub frontier_size: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<E: Ord> {
    pub frontier: Frontier<E>,
    pub records: Vec<TrainedRecord<E>>,
    pub history: Vec<HistoryEntry<E>>,
    pub statistics: SearchStatistics,
    pub certificates: CertificateSet<E>,
}

impl SearchConfig {
    fn validate(&self) -> Result<(), SearchError> {
        if self.patience == 0 {
            return Err(SearchError::Config("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(SearchError::Config("batch size must be at least 1".into()));
        }
        if self.max_evaluations == Some(0) {
            return Err(SearchError::Config(
                "max evaluations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the search until the frontier stops moving, the budget runs out or
/// every member has been trained or pruned.
pub fn pop_search<S, V>(
    space: &S,
    evaluator: &V,
    config: &SearchConfig,
) -> Result<SearchOutcome<S::Element>, SearchError>
where
    S: SearchSpace + Sync,
    V: Evaluator<S::Element> + Sync + ?Sized,
{
    config.validate()?;
    let state = State::new(config);
    match space.elements() {
        Some(elements) => {
            if elements.is_empty() {
                return Err(SearchError::EmptySpace);
            }
            run_materialized(space, elements, evaluator, config, state)
        }
        None => {
            if config.strategy != SelectionStrategy::Uniform {
                return Err(SearchError::Config(
                    "precedent-weighted selection needs a materialized space".into(),
                ));
            }
            run_sampled(space, evaluator, config, state)
        }
    }
}

struct State<'c, E: Ord> {
    config: &'c SearchConfig,
    rng: ChaCha8Rng,
    records: Vec<TrainedRecord<E>>,
    history: Vec<HistoryEntry<E>>,
    certificates: CertificateSet<E>,
    frontier: Frontier<E>,
    stale: usize,
}

impl<'c, E: Clone + Ord> State<'c, E> {
    fn new(config: &'c SearchConfig) -> Self {
        State {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            records: Vec::new(),
            history: Vec::new(),
            certificates: CertificateSet::new(),
            frontier: Frontier {
                members: Vec::new(),
            },
            stale: 0,
        }
    }

    fn room(&self) -> usize {
        let left = self
            .config
            .max_evaluations
            .map_or(usize::MAX, |m| m.saturating_sub(self.records.len()));
        left.min(self.config.batch_size)
    }

    /// Adds one result and returns the anchors whose certificate changed.
    fn fold(&mut self, code: E, latency: Latency, accuracy: f64) -> Vec<E> {
        let iteration = self.records.len() + 1;
        self.records.push(TrainedRecord {
            code: code.clone(),
            latency,
            accuracy,
            iteration,
        });
        let changed = self.certificates.update(&self.records);
        let next = frontier(&self.records);
        let frontier_changed = !next.codes().eq(self.frontier.codes());
        self.frontier = next;
        if frontier_changed {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.history.push(HistoryEntry {
            iteration,
            code,
            latency,
            accuracy,
            trained: iteration,
            pruned: None,
            frontier_changed,
        });
        changed
    }

    /// Checked after a whole round has been folded in.
    fn stop_after_round(&self) -> Option<StopReason> {
        if self.stale >= self.config.patience {
            Some(StopReason::Converged)
        } else if self
            .config
            .max_evaluations
            .is_some_and(|m| self.records.len() >= m)
        {
            Some(StopReason::MaxEvaluations)
        } else {
            None
        }
    }

    fn finish(
        self,
        stop_reason: StopReason,
        pruned: Option<usize>,
        space_size: Option<usize>,
    ) -> SearchOutcome<E> {
        let trained = self.records.len();
        let ratio = |p: usize| (trained > 0).then(|| p as f64 / trained as f64);
        SearchOutcome {
            statistics: SearchStatistics {
                trained,
                pruned,
                space_size,
                pruned_per_trained: pruned.and_then(ratio),
                coverage_ratio: pruned.and_then(|p| ratio(trained + p)),
                iterations: trained,
                frontier_size: self.frontier.len(),
                stop_reason,
            },
            frontier: self.frontier,
            records: self.records,
            history: self.history,
            certificates: self.certificates,
        }
    }
}

fn evaluate_batch<E, V>(evaluator: &V, batch: &[E]) -> Result<Vec<f64>, SearchError>
where
    E: std::fmt::Display + Sync,
    V: Evaluator<E> + Sync + ?Sized,
{
    let wrap = |e: &E, r: Result<f64, EvalError>| {
        r.and_then(|a| {
            if (0.0..=1.0).contains(&a) {
                Ok(a)
            } else {
                Err(EvalError::OutOfRange(a))
            }
        })
        .map_err(|source| SearchError::Evaluator {
            element: e.to_string(),
            source,
        })
    };
    if batch.len() > 1 && evaluator.concurrency_safe() {
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|e| scope.spawn(move || evaluator.evaluate(e)))
                .collect();
            handles
                .into_iter()
                .zip(batch)
                .map(|(h, e)| wrap(e, h.join().expect("evaluator thread panicked")))
                .collect()
        })
    } else {
        batch
            .iter()
            .map(|e| wrap(e, evaluator.evaluate(e)))
            .collect()
    }
}

/// Untrained, unpruned indices with O(1) removal.
struct Pool {
    items: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl Pool {
    fn full(n: usize) -> Self {
        Pool {
            items: (0..n).collect(),
            slot: (0..n).map(Some).collect(),
        }
    }

    fn remove(&mut self, i: usize) -> bool {
        let Some(pos) = self.slot[i].take() else {
            return false;
        };
        self.items.swap_remove(pos);
        if let Some(&moved) = self.items.get(pos) {
            self.slot[moved] = Some(pos);
        }
        true
    }
}

fn run_materialized<S, V>(
    space: &S,
    elements: &[S::Element],
    evaluator: &V,
    config: &SearchConfig,
    mut state: State<'_, S::Element>,
) -> Result<SearchOutcome<S::Element>, SearchError>
where
    S: SearchSpace + Sync,
    V: Evaluator<S::Element> + Sync + ?Sized,
{
    let n = elements.len();
    let latency: Vec<Latency> = elements
        .iter()
        .map(|e| {
            space.latency(e).map_err(|source| SearchError::Space {
                element: e.to_string(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let position: BTreeMap<&S::Element, usize> =
        elements.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let weights: Option<Vec<u64>> =
        (config.strategy == SelectionStrategy::PrecedentWeighted).then(|| {
            elements
                .iter()
                .map(|x| 1 + elements.iter().filter(|m| space.precedes(m, x)).count() as u64)
                .collect()
        });

    let mut pool = Pool::full(n);
    let mut pruned = 0usize;
    let stop = loop {
        if pool.items.is_empty() {
            break StopReason::Exhausted;
        }
        let take = state.room().min(pool.items.len());
        let mut batch = Vec::with_capacity(take);
        for _ in 0..take {
            let i = match &weights {
                None => pool.items[state.rng.random_range(0..pool.items.len())],
                Some(w) => {
                    let dist = WeightedIndex::new(pool.items.iter().map(|&i| w[i]))
                        .expect("weights are positive");
                    pool.items[dist.sample(&mut state.rng)]
                }
            };
            pool.remove(i);
            batch.push(i);
        }
        let codes: Vec<S::Element> = batch.iter().map(|&i| elements[i].clone()).collect();
        let accuracies = evaluate_batch(evaluator, &codes)?;
        for (&i, acc) in batch.iter().zip(accuracies) {
            let changed = state.fold(elements[i].clone(), latency[i], acc);
            for anchor in &changed {
                let cert = state
                    .certificates
                    .get(anchor)
                    .expect("changed anchors have certificates");
                let threshold = cert.threshold;
                let anchor_idx = position[anchor];
                let hit: Vec<usize> = pool
                    .items
                    .iter()
                    .copied()
                    .filter(|&j| {
                        latency[j] >= threshold
                            && space.precedes(&elements[j], &elements[anchor_idx])
                    })
                    .collect();
                for j in hit {
                    if pool.remove(j) {
                        pruned += 1;
                    }
                }
            }
            state.history.last_mut().expect("just folded").pruned = Some(pruned);
        }
        if let Some(reason) = state.stop_after_round() {
            break reason;
        }
    };
    Ok(state.finish(stop, Some(pruned), Some(n)))
}

fn run_sampled<S, V>(
    space: &S,
    evaluator: &V,
    config: &SearchConfig,
    mut state: State<'_, S::Element>,
) -> Result<SearchOutcome<S::Element>, SearchError>
where
    S: SearchSpace + Sync,
    V: Evaluator<S::Element> + Sync + ?Sized,
{
    let mut trained: BTreeSet<S::Element> = BTreeSet::new();
    let stop = loop {
        let take = state.room();
        let mut batch: Vec<(S::Element, Latency)> = Vec::with_capacity(take);
        let mut misses = 0;
        while batch.len() < take && misses < config.max_sample_retries {
            let Some(code) = space.sample(&mut state.rng) else {
                break;
            };
            let fresh = space.contains(&code)
                && !trained.contains(&code)
                && !batch.iter().any(|(c, _)| *c == code);
            let lat = if fresh {
                space.latency(&code).ok()
            } else {
                None
            };
            match lat {
                Some(l)
                    if !state
                        .certificates
                        .prunes(&code, l, |a, b| space.precedes(a, b)) =>
                {
                    batch.push((code, l));
                    misses = 0;
                }
                _ => misses += 1,
            }
        }
        if batch.is_empty() {
            if state.records.is_empty() {
                return Err(SearchError::EmptySpace);
            }
            break StopReason::Exhausted;
        }
        let codes: Vec<S::Element> = batch.iter().map(|(c, _)| c.clone()).collect();
        let accuracies = evaluate_batch(evaluator, &codes)?;
        for ((code, lat), acc) in batch.into_iter().zip(accuracies) {
            trained.insert(code.clone());
            state.fold(code, lat, acc);
        }
        if let Some(reason) = state.stop_after_round() {
            break reason;
        }
    };
    Ok(state.finish(stop, None, None))
}
