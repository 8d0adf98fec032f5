//! Hybrid retrieval: fuses dense similarity with BM25 as
//! `sim(q,c) + alpha * BM25(q,c)`, resolves fragment alignment, and
//! applies the self-file exclusion policy.
//!
//! Hybrid mode scores the union of each retriever's top-k candidates;
//! the sub-score a candidate is missing gets computed on demand rather
//! than defaulted to zero, so fusion is exact on the candidate set.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, FileId, FragmentId};
use crate::dense::{dense_topk, dot, encode, EncoderParams, VectorIndex};
use crate::sparse::{bm25_score, bm25_topk, extract_terms, Bm25Index};
use crate::syntax::ApiSequence;
use crate::token::Token;
use crate::ScoredHit;

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    Sparse,
    Dense,
    Hybrid,
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetrievalMode::Sparse => write!(f, "sparse"),
            RetrievalMode::Dense => write!(f, "dense"),
            RetrievalMode::Hybrid => write!(f, "hybrid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub alpha: f64,
    /// Candidates taken from each retriever before fusion.
    pub k: usize,
    /// Self-file exclusion: fragments of this file never surface.
    pub exclude_file: Option<FileId>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            mode: RetrievalMode::Hybrid,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_CANDIDATES,
            exclude_file: None,
        }
    }
}

/// Borrowed handles to whatever indices the active mode needs.
#[derive(Clone, Copy)]
pub struct Indices<'a> {
    pub corpus: &'a Corpus,
    pub sparse: Option<&'a Bm25Index>,
    pub dense: Option<(&'a EncoderParams, &'a VectorIndex)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HybridError {
    MissingSparseIndex,
    MissingDenseIndex,
    Corpus(CorpusError),
    InvalidConfig { message: String },
}

impl fmt::Display for HybridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HybridError::MissingSparseIndex => write!(f, "sparse index required but not built"),
            HybridError::MissingDenseIndex => write!(f, "dense index required but not built"),
            HybridError::Corpus(err) => write!(f, "{err}"),
            HybridError::InvalidConfig { message } => write!(f, "invalid retrieval config: {message}"),
        }
    }
}

impl core::error::Error for HybridError {}

impl From<CorpusError> for HybridError {
    fn from(err: CorpusError) -> Self {
        HybridError::Corpus(err)
    }
}

/// One ranked candidate with its per-retriever sub-scores for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub fragment: FragmentId,
    pub score: f64,
    pub dense: Option<f64>,
    pub bm25: Option<f64>,
}

/// Result of one retrieval: the best hit, the aligned fragment handed
/// to the generator (the best hit's successor when it exists, else the
/// best hit itself), and the ranked candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub best: Option<ScoredHit>,
    pub aligned: Option<FragmentId>,
    pub hits: Vec<RankedHit>,
}

impl RetrievalOutcome {
    pub fn empty() -> Self {
        RetrievalOutcome { best: None, aligned: None, hits: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_none()
    }
}

/// The fusion formula: `dense_sim + alpha * bm25`.
pub fn hybrid_score(dense_sim: f64, bm25: f64, alpha: f64) -> f64 {
    dense_sim + alpha * bm25
}

fn excluded(corpus: &Corpus, config: &RetrievalConfig, fragment: FragmentId) -> bool {
    match config.exclude_file {
        Some(file) => corpus
            .fragment(fragment)
            .map(|f| f.file == file)
            .unwrap_or(false),
        None => false,
    }
}

/// How many extra candidates to request so that k survive exclusion.
fn fetch_count(corpus: &Corpus, config: &RetrievalConfig) -> usize {
    match config.exclude_file {
        Some(file) => config.k + corpus.fragments_of_file(file).count(),
        None => config.k,
    }
}

/// Retrieves the best-matching fragment for a query in the configured
/// mode and resolves fragment alignment. An empty candidate set after
/// exclusion yields an empty outcome (the generator then runs
/// retrieval-free).
pub fn retrieve(
    query_tokens: &[Token],
    query_api: &ApiSequence,
    config: &RetrievalConfig,
    indices: &Indices<'_>,
) -> Result<RetrievalOutcome, HybridError> {
    if config.k == 0 {
        return Err(HybridError::InvalidConfig { message: "k must be at least 1".into() });
    }
    if config.alpha < 0.0 || !config.alpha.is_finite() {
        return Err(HybridError::InvalidConfig { message: "alpha must be finite and >= 0".into() });
    }
    let fetch = fetch_count(indices.corpus, config);
    let mut hits: Vec<RankedHit> = match config.mode {
        RetrievalMode::Sparse => {
            let index = indices.sparse.ok_or(HybridError::MissingSparseIndex)?;
            let terms = extract_terms(query_tokens);
            bm25_topk(index, &terms, fetch)
                .into_iter()
                .map(|h| RankedHit {
                    fragment: h.fragment,
                    score: h.score,
                    dense: None,
                    bm25: Some(h.score),
                })
                .collect()
        }
        RetrievalMode::Dense => {
            let (params, index) = indices.dense.ok_or(HybridError::MissingDenseIndex)?;
            dense_topk(index, params, query_tokens, query_api, fetch)
                .into_iter()
                .map(|h| RankedHit {
                    fragment: h.fragment,
                    score: h.score,
                    dense: Some(h.score),
                    bm25: None,
                })
                .collect()
        }
        RetrievalMode::Hybrid => {
            let sparse_index = indices.sparse.ok_or(HybridError::MissingSparseIndex)?;
            let (params, dense_index) = indices.dense.ok_or(HybridError::MissingDenseIndex)?;
            let terms = extract_terms(query_tokens);
            let query_vec = encode(params, query_tokens, query_api);

            let mut candidates: alloc::collections::BTreeSet<FragmentId> =
                alloc::collections::BTreeSet::new();
            for hit in bm25_topk(sparse_index, &terms, fetch) {
                candidates.insert(hit.fragment);
            }
            for hit in dense_topk(dense_index, params, query_tokens, query_api, fetch) {
                candidates.insert(hit.fragment);
            }
            let mut fused = Vec::with_capacity(candidates.len());
            for fragment in candidates {
                let bm25 = bm25_score(sparse_index, &terms, fragment)?;
                let dense = dot(&query_vec, &dense_index.vectors[fragment.index()]);
                fused.push(RankedHit {
                    fragment,
                    score: hybrid_score(dense, bm25, config.alpha),
                    dense: Some(dense),
                    bm25: Some(bm25),
                });
            }
            fused
        }
    };

    hits.retain(|h| !excluded(indices.corpus, config, h.fragment));
    hits.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.fragment.cmp(&b.fragment)));
    hits.truncate(config.k);

    let Some(top) = hits.first() else {
        return Ok(RetrievalOutcome::empty());
    };
    let best = ScoredHit { fragment: top.fragment, score: top.score };
    let aligned = match indices.corpus.successor(best.fragment)? {
        Some(next) => next.id,
        None => best.fragment,
    };
    Ok(RetrievalOutcome { best: Some(best), aligned: Some(aligned), hits })
}
