//! Clone-detection and completion evaluation harnesses.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::FileId;
use crate::dense::{build_vector_index, init_params};
use crate::eval::bench::{CloneBenchmark, CompletionSet};
use crate::eval::metrics::{
    average_precision_at_k, edit_similarity, exact_match, map_at_k, perplexity, precision_at_1,
    EvalError,
};
use crate::generate::{
    complete_line, score_tokens, CopyAugmentedModel, GenerateError, RetrievalHook,
    DEFAULT_LINE_CAP,
};
use crate::hybrid::{retrieve, HybridError, Indices, RetrievalConfig, RetrievalMode};
use crate::token::render_line;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HarnessError {
    Retrieval(HybridError),
    Metric(EvalError),
    Generation(GenerateError),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Retrieval(e) => write!(f, "{e}"),
            HarnessError::Metric(e) => write!(f, "{e}"),
            HarnessError::Generation(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for HarnessError {}

impl From<HybridError> for HarnessError {
    fn from(e: HybridError) -> Self {
        HarnessError::Retrieval(e)
    }
}

impl From<EvalError> for HarnessError {
    fn from(e: EvalError) -> Self {
        HarnessError::Metric(e)
    }
}

impl From<GenerateError> for HarnessError {
    fn from(e: GenerateError) -> Self {
        HarnessError::Generation(e)
    }
}

/// Metric values plus per-query breakdown; a pure function of the
/// benchmark bytes and the config fingerprint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    pub per_query: Vec<PerQueryRecord>,
    /// Human-readable echo of the evaluated configuration.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryRecord {
    pub id: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuerySplit {
    All,
    Dev,
    Test,
}

impl QuerySplit {
    fn selects(self, dev: bool) -> bool {
        match self {
            QuerySplit::All => true,
            QuerySplit::Dev => dev,
            QuerySplit::Test => !dev,
        }
    }
}

/// Ranks pool programs for one query: fragment hits collapse to their
/// program with max-fragment-score aggregation (hits arrive sorted, so
/// first sighting of a file is its best fragment).
fn ranked_programs(
    benchmark: &CloneBenchmark,
    query_tokens: &[crate::token::Token],
    query_api: &crate::syntax::ApiSequence,
    config: &RetrievalConfig,
    indices: &Indices<'_>,
) -> Result<Vec<FileId>, HarnessError> {
    let outcome = retrieve(query_tokens, query_api, config, indices)?;
    let mut seen: BTreeSet<FileId> = BTreeSet::new();
    let mut ranked = Vec::new();
    for hit in &outcome.hits {
        let file = benchmark.pool.fragment(hit.fragment).map_err(HybridError::from)?.file;
        if seen.insert(file) {
            ranked.push(file);
        }
    }
    Ok(ranked)
}

/// Partial-search clone detection: per-query program ranking with the
/// query's own program excluded, reported as MAP@K and P@1.
pub fn run_clone_eval(
    benchmark: &CloneBenchmark,
    config: &RetrievalConfig,
    indices: &Indices<'_>,
    split: QuerySplit,
    map_k: usize,
) -> Result<EvalReport, HarnessError> {
    let mut aps = Vec::new();
    let mut rank_one = Vec::new();
    let mut per_query = Vec::new();
    for (index, query) in benchmark.queries.iter().enumerate() {
        if !split.selects(query.dev) {
            continue;
        }
        let query_config = RetrievalConfig { exclude_file: Some(query.source), ..config.clone() };
        let ranked = ranked_programs(benchmark, &query.tokens, &query.api, &query_config, indices)?;
        let relevant = benchmark.relevant(query);
        let ap = average_precision_at_k(&ranked, &relevant, map_k)?;
        let hit = ranked.first().map(|f| relevant.contains(f)).unwrap_or(false);
        aps.push(ap);
        rank_one.push(hit);
        let mut values = BTreeMap::new();
        values.insert("ap".to_string(), ap);
        values.insert("p1".to_string(), if hit { 1.0 } else { 0.0 });
        values.insert("problem".to_string(), query.problem as f64);
        per_query.push(PerQueryRecord { id: format!("query{index:04}"), values });
    }
    let mut metrics = BTreeMap::new();
    metrics.insert(format!("map@{map_k}"), map_at_k(&aps)?);
    metrics.insert("p@1".to_string(), precision_at_1(&rank_one)?);
    metrics.insert("queries".to_string(), aps.len() as f64);
    Ok(EvalReport {
        metrics,
        per_query,
        fingerprint: format!(
            "clone mode={} alpha={} k={} split={split:?} map_k={map_k}",
            config.mode, config.alpha, config.k
        ),
    })
}

/// Line-level (EM, edit similarity) and token-level (teacher-forced
/// perplexity) completion over the held-out set, with the retrieval-off
/// ablation of the identical generator reported alongside.
pub fn run_completion_eval(
    completion: &CompletionSet,
    model: &CopyAugmentedModel,
    config: &RetrievalConfig,
    indices: &Indices<'_>,
) -> Result<EvalReport, HarnessError> {
    let hook_on = RetrievalHook::On { config, indices };
    let hook_off = RetrievalHook::Off;

    let mut em = Vec::new();
    let mut em_base = Vec::new();
    let mut edit = Vec::new();
    let mut edit_base = Vec::new();
    let mut log_probs = Vec::new();
    let mut log_probs_base = Vec::new();
    let mut per_query = Vec::new();

    for (index, item) in completion.items.iter().enumerate() {
        let augmented = complete_line(model, &hook_on, &item.context, DEFAULT_LINE_CAP)?;
        let base = complete_line(model, &hook_off, &item.context, DEFAULT_LINE_CAP)?;
        let em_a = exact_match(&augmented.tokens, &item.gold_line) as f64;
        let em_b = exact_match(&base.tokens, &item.gold_line) as f64;
        let gold_line = render_line(&item.gold_line);
        let edit_a = edit_similarity(&render_line(&augmented.tokens), &gold_line);
        let edit_b = edit_similarity(&render_line(&base.tokens), &gold_line);
        em.push(em_a);
        em_base.push(em_b);
        edit.push(edit_a);
        edit_base.push(edit_b);

        let (lp_a, _) = score_tokens(model, &hook_on, &item.context, &item.gold_tokens)?;
        let (lp_b, _) = score_tokens(model, &hook_off, &item.context, &item.gold_tokens)?;
        log_probs.extend_from_slice(&lp_a);
        log_probs_base.extend_from_slice(&lp_b);

        let mut values = BTreeMap::new();
        values.insert("em".to_string(), em_a);
        values.insert("em_base".to_string(), em_b);
        values.insert("edit_sim".to_string(), edit_a);
        values.insert("edit_sim_base".to_string(), edit_b);
        values.insert("problem".to_string(), item.problem as f64);
        per_query.push(PerQueryRecord { id: format!("item{index:04}"), values });
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    let mut metrics = BTreeMap::new();
    metrics.insert("em".to_string(), mean(&em));
    metrics.insert("em_base".to_string(), mean(&em_base));
    metrics.insert("edit_sim".to_string(), mean(&edit));
    metrics.insert("edit_sim_base".to_string(), mean(&edit_base));
    metrics.insert("perplexity".to_string(), perplexity(&log_probs)?);
    metrics.insert("perplexity_base".to_string(), perplexity(&log_probs_base)?);
    metrics.insert("items".to_string(), completion.items.len() as f64);
    Ok(EvalReport {
        metrics,
        per_query,
        fingerprint: format!(
            "completion mode={} alpha={} k={} lambda={} min_match={} order={}",
            config.mode, config.alpha, config.k, model.lambda, model.min_match, model.base.order
        ),
    })
}

/// Dev-split MAP for each alpha in hybrid mode; returns the sweep and
/// the winning alpha (first maximum).
pub fn alpha_sweep(
    benchmark: &CloneBenchmark,
    alphas: &[f64],
    config: &RetrievalConfig,
    indices: &Indices<'_>,
    map_k: usize,
) -> Result<(Vec<(f64, f64)>, f64), HarnessError> {
    let mut sweep = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &alpha in alphas {
        let tuned = RetrievalConfig { mode: RetrievalMode::Hybrid, alpha, ..config.clone() };
        let report = run_clone_eval(benchmark, &tuned, indices, QuerySplit::Dev, map_k)?;
        let map = report.metrics[&format!("map@{map_k}")];
        sweep.push((alpha, map));
        if map > best.0 {
            best = (map, alpha);
        }
    }
    Ok((sweep, best.1))
}

/// Monte Carlo chance baseline: mean dense-mode P@1 over freshly
/// initialized random-embedding encoders.
pub fn random_encoder_chance(
    benchmark: &CloneBenchmark,
    d: usize,
    init_seeds: &[u64],
    config: &RetrievalConfig,
    split: QuerySplit,
    map_k: usize,
) -> Result<f64, HarnessError> {
    let mut p1s = Vec::new();
    for &seed in init_seeds {
        let params = init_params(&benchmark.pool, d, seed);
        let index = build_vector_index(&params, &benchmark.pool);
        let indices =
            Indices { corpus: &benchmark.pool, sparse: None, dense: Some((&params, &index)) };
        let dense_config = RetrievalConfig { mode: RetrievalMode::Dense, ..config.clone() };
        let report = run_clone_eval(benchmark, &dense_config, &indices, split, map_k)?;
        p1s.push(report.metrics["p@1"]);
    }
    Ok(p1s.iter().sum::<f64>() / p1s.len().max(1) as f64)
}
