//! Trainable dense retriever: a shared-weight encoder maps (possibly
//! partial) code plus its API sequence to a d-dimensional vector;
//! similarity is the raw dot product and training minimizes in-batch
//! InfoNCE with no hard negatives.
//!
//! The encoder is mean-pooled token embeddings followed by a linear
//! projection. The interface (tokens -> vector, dot-product similarity,
//! one set of weights for queries and fragments) is what retrieval and
//! training depend on, so a deeper encoder can be swapped in behind it.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::TrainingPair;
use crate::corpus::Corpus;
use crate::math::{exp, ln};
use crate::seeds;
use crate::syntax::{api_scan, ApiSequence};
use crate::token::Token;
use crate::{FragmentId, ScoredHit};

pub const OOV_SYMBOL: &str = "<oov>";
pub const SEP_SYMBOL: &str = "<sep>";
pub const DEFAULT_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenseError {
    BatchTooSmall { got: usize },
    DimensionMismatch { expected: usize, got: usize },
    NonFiniteInput,
    InsufficientPairs { have: usize, need: usize },
    Diverged { epoch: usize, batch: usize },
}

impl fmt::Display for DenseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenseError::BatchTooSmall { got } => {
                write!(f, "InfoNCE needs a batch of at least 2, got {got}")
            }
            DenseError::DimensionMismatch { expected, got } => {
                write!(f, "vector dimension mismatch: expected {expected}, got {got}")
            }
            DenseError::NonFiniteInput => write!(f, "non-finite input vector"),
            DenseError::InsufficientPairs { have, need } => {
                write!(f, "training needs at least {need} pairs, have {have}")
            }
            DenseError::Diverged { epoch, batch } => {
                write!(f, "training diverged: non-finite loss at epoch {epoch}, batch {batch}")
            }
        }
    }
}

impl core::error::Error for DenseError {}

/// Shared weights of the dual encoder: one embedding row per vocabulary
/// symbol plus a d x d projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// Symbol -> embedding row. Covers corpus tokens, fragment API
    /// names, and the OOV/separator symbols.
    pub vocab: BTreeMap<String, u32>,
    /// `vocab.len() * d`, row-major.
    pub embedding: Vec<f64>,
    /// `d * d`, row-major.
    pub projection: Vec<f64>,
    pub d: usize,
}

impl EncoderParams {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn symbol_id(&self, symbol: &str) -> u32 {
        match self.vocab.get(symbol) {
            Some(&id) => id,
            None => self.vocab[OOV_SYMBOL],
        }
    }
}

/// Collects the encoder vocabulary from a corpus: every fragment token
/// text, every fragment-level API name, and the two special symbols.
fn build_vocab(corpus: &Corpus) -> BTreeMap<String, u32> {
    let mut symbols: alloc::collections::BTreeSet<String> = alloc::collections::BTreeSet::new();
    for fragment in corpus.fragments() {
        for token in &fragment.tokens {
            symbols.insert(token.text.clone());
        }
        for name in api_scan(&fragment.tokens).calls {
            symbols.insert(name);
        }
    }
    symbols.insert(OOV_SYMBOL.to_string());
    symbols.insert(SEP_SYMBOL.to_string());
    symbols.into_iter().enumerate().map(|(i, s)| (s, i as u32)).collect()
}

/// Fresh parameters: embeddings uniform in [-0.05, 0.05], projection
/// identity, so an untrained encoder is an unbiased random projection
/// of mean token embeddings.
pub fn init_params(corpus: &Corpus, d: usize, seed: u64) -> EncoderParams {
    let vocab = build_vocab(corpus);
    let mut rng = seeds::derive(seed, seeds::STAGE_INIT, 0);
    let mut embedding = Vec::with_capacity(vocab.len() * d);
    for _ in 0..vocab.len() * d {
        embedding.push(rng.gen_range(-0.05..=0.05));
    }
    let mut projection = alloc::vec![0.0; d * d];
    for i in 0..d {
        projection[i * d + i] = 1.0;
    }
    EncoderParams { vocab, embedding, projection, d }
}

/// Symbol ids fed to the encoder: code tokens, the separator, then the
/// API names. Unknown symbols map to OOV.
fn input_symbols(params: &EncoderParams, tokens: &[Token], api: &ApiSequence) -> Vec<u32> {
    let mut ids = Vec::with_capacity(tokens.len() + 1 + api.calls.len());
    for token in tokens {
        ids.push(params.symbol_id(&token.text));
    }
    ids.push(params.vocab[SEP_SYMBOL]);
    for name in &api.calls {
        ids.push(params.symbol_id(name));
    }
    ids
}

fn mean_embedding(params: &EncoderParams, ids: &[u32]) -> Vec<f64> {
    let d = params.d;
    let mut mean = alloc::vec![0.0; d];
    for &id in ids {
        let row = &params.embedding[id as usize * d..(id as usize + 1) * d];
        for (m, &e) in mean.iter_mut().zip(row) {
            *m += e;
        }
    }
    let n = ids.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

fn project(params: &EncoderParams, mean: &[f64]) -> Vec<f64> {
    let d = params.d;
    let mut out = alloc::vec![0.0; d];
    for i in 0..d {
        let row = &params.projection[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for (p, m) in row.iter().zip(mean) {
            acc += p * m;
        }
        out[i] = acc;
    }
    out
}

/// Encodes code plus its API sequence: projection of the mean input
/// embedding. The single encoding path for queries and fragments.
pub fn encode(params: &EncoderParams, tokens: &[Token], api: &ApiSequence) -> Vec<f64> {
    let ids = input_symbols(params, tokens, api);
    project(params, &mean_embedding(params, &ids))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// InfoNCE loss and exact gradients for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceResult {
    pub loss: f64,
    pub grad_queries: Vec<Vec<f64>>,
    pub grad_positives: Vec<Vec<f64>>,
}

/// In-batch-negative InfoNCE over raw dot products:
/// `-(1/B) sum_i log softmax_j(sim(q_i, c_j))[i]`, stabilized by
/// row-wise max subtraction. Gradients are with respect to every query
/// and positive vector.
pub fn info_nce_loss(
    query_vecs: &[Vec<f64>],
    positive_vecs: &[Vec<f64>],
) -> Result<InfoNceResult, DenseError> {
    let b = query_vecs.len();
    if b < 2 || positive_vecs.len() != b {
        return Err(DenseError::BatchTooSmall { got: b.min(positive_vecs.len()) });
    }
    let d = query_vecs[0].len();
    for v in query_vecs.iter().chain(positive_vecs) {
        if v.len() != d {
            return Err(DenseError::DimensionMismatch { expected: d, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DenseError::NonFiniteInput);
        }
    }

    let mut sims = alloc::vec![0.0; b * b];
    for i in 0..b {
        for j in 0..b {
            sims[i * b + j] = dot(&query_vecs[i], &positive_vecs[j]);
        }
    }

    let mut loss = 0.0;
    // d_sims[i*b+j] = dL/d sims_ij = (softmax_ij - delta_ij) / B
    let mut d_sims = alloc::vec![0.0; b * b];
    for i in 0..b {
        let row = &sims[i * b..(i + 1) * b];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for &s in row {
            z += exp(s - max);
        }
        loss += -(row[i] - max - ln(z));
        for j in 0..b {
            let p = exp(row[j] - max) / z;
            d_sims[i * b + j] = (p - if i == j { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    loss /= b as f64;

    let mut grad_queries = alloc::vec![alloc::vec![0.0; d]; b];
    let mut grad_positives = alloc::vec![alloc::vec![0.0; d]; b];
    for i in 0..b {
        for j in 0..b {
            let w = d_sims[i * b + j];
            for k in 0..d {
                grad_queries[i][k] += w * positive_vecs[j][k];
                grad_positives[j][k] += w * query_vecs[i][k];
            }
        }
    }
    Ok(InfoNceResult { loss, grad_queries, grad_positives })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// In-batch negatives per query: batch_size - 1.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty applied with the update to the parameters a batch
    /// touched. Raw dot-product similarities let embedding norms grow
    /// without bound otherwise, which turns short fragments into
    /// retrieval hubs.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch_size: 64, learning_rate: 2.0, epochs: 200, weight_decay: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

struct Forward {
    ids: Vec<u32>,
    mean: Vec<f64>,
}

/// Mini-batch gradient descent on [`info_nce_loss`], encoding queries
/// and positives with the same parameters throughout. Deterministic
/// given the config seed; ragged tail batches are dropped.
pub fn train_encoder(
    init: &EncoderParams,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainLog), DenseError> {
    if config.batch_size < 2 {
        return Err(DenseError::BatchTooSmall { got: config.batch_size });
    }
    if pairs.len() < config.batch_size {
        return Err(DenseError::InsufficientPairs { have: pairs.len(), need: config.batch_size });
    }
    let mut params = init.clone();
    let d = params.d;
    let mut log = TrainLog::default();
    let mut rng = seeds::derive(config.seed, seeds::STAGE_TRAIN, 0);
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            if batch.len() < config.batch_size {
                continue;
            }
            let mut q_fwd = Vec::with_capacity(batch.len());
            let mut c_fwd = Vec::with_capacity(batch.len());
            let mut q_vecs = Vec::with_capacity(batch.len());
            let mut c_vecs = Vec::with_capacity(batch.len());
            for &idx in batch {
                let pair = &pairs[idx];
                let q_ids = input_symbols(&params, &pair.query_tokens, &pair.query_api);
                let c_ids = input_symbols(&params, &pair.positive_tokens, &pair.positive_api);
                let q_mean = mean_embedding(&params, &q_ids);
                let c_mean = mean_embedding(&params, &c_ids);
                q_vecs.push(project(&params, &q_mean));
                c_vecs.push(project(&params, &c_mean));
                q_fwd.push(Forward { ids: q_ids, mean: q_mean });
                c_fwd.push(Forward { ids: c_ids, mean: c_mean });
            }
            let result = info_nce_loss(&q_vecs, &c_vecs)?;
            if !result.loss.is_finite() {
                return Err(DenseError::Diverged { epoch, batch: batch_idx });
            }
            epoch_loss += result.loss;
            batches += 1;

            // Backprop through v = P * mean(E[ids]).
            let mut d_proj = alloc::vec![0.0; d * d];
            let mut d_embed: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let samples = q_fwd
                .iter()
                .zip(&result.grad_queries)
                .chain(c_fwd.iter().zip(&result.grad_positives));
            for (fwd, grad) in samples {
                for i in 0..d {
                    for j in 0..d {
                        d_proj[i * d + j] += grad[i] * fwd.mean[j];
                    }
                }
                // dL/dmean = P^T grad, spread evenly over the symbols.
                let mut d_mean = alloc::vec![0.0; d];
                for i in 0..d {
                    for j in 0..d {
                        d_mean[j] += params.projection[i * d + j] * grad[i];
                    }
                }
                let scale = 1.0 / fwd.ids.len() as f64;
                for &id in &fwd.ids {
                    let slot = d_embed.entry(id).or_insert_with(|| alloc::vec![0.0; d]);
                    for (s, &g) in slot.iter_mut().zip(&d_mean) {
                        *s += g * scale;
                    }
                }
            }
            let keep = 1.0 - config.learning_rate * config.weight_decay;
            for (p, g) in params.projection.iter_mut().zip(&d_proj) {
                *p = *p * keep - config.learning_rate * g;
            }
            for (id, grad) in d_embed {
                let row = &mut params.embedding[id as usize * d..(id as usize + 1) * d];
                for (e, &g) in row.iter_mut().zip(&grad) {
                    *e = *e * keep - config.learning_rate * g;
                }
            }
        }
        log.epoch_losses.push(if batches > 0 { epoch_loss / batches as f64 } else { 0.0 });
    }
    Ok((params, log))
}

/// Exact dot-product index: one vector per fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    /// Indexed by fragment id.
    pub vectors: Vec<Vec<f64>>,
    pub d: usize,
}

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Encodes every corpus fragment (tokens plus lexically scanned API
/// names, since fragments need not parse).
pub fn build_vector_index(params: &EncoderParams, corpus: &Corpus) -> VectorIndex {
    let vectors = corpus
        .fragments()
        .iter()
        .map(|fragment| encode(params, &fragment.tokens, &api_scan(&fragment.tokens)))
        .collect();
    VectorIndex { vectors, d: params.d }
}

/// Exhaustive top-k by dot product, descending, ties by ascending
/// fragment id.
pub fn dense_topk(
    index: &VectorIndex,
    params: &EncoderParams,
    query_tokens: &[Token],
    query_api: &ApiSequence,
    k: usize,
) -> Vec<ScoredHit> {
    let query = encode(params, query_tokens, query_api);
    let mut hits: Vec<ScoredHit> = index
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| ScoredHit { fragment: FragmentId(i as u32), score: dot(&query, v) })
        .collect();
    hits.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.fragment.cmp(&b.fragment)));
    hits.truncate(k);
    hits
}
