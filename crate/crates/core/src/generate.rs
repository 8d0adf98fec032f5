//! Auto-regressive completion conditioned on a retrieved fragment's
//! successor concatenated with the query context.
//!
//! The reference generator is a copy-augmented interpolated backoff
//! n-gram model: the next-token distribution mixes the base model with
//! a copy distribution that follows the longest context suffix found in
//! the retrieved tokens. Any model exposing a next-token distribution
//! over `GeneratorInput` can replace it without touching retrieval.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::hybrid::{retrieve, HybridError, Indices, RetrievalConfig, RetrievalOutcome};
use crate::lex::classify_text;
use crate::math::ln;
use crate::syntax::api_scan;
use crate::token::{Token, TokenKind};

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MIN_MATCH: usize = 2;
pub const DEFAULT_LINE_CAP: usize = 64;
/// Tokens generated before the single re-retrieval in budget mode.
pub const RERETRIEVE_AT: usize = 100;
/// Interpolation weight given to each order's ML estimate when its
/// history was seen.
pub const DEFAULT_INTERPOLATION: f64 = 0.7;

const SEP_TEXT: &str = "<sep>";
const OOV_TEXT: &str = "<oov>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenerateError {
    InvalidOrder { got: usize },
    EmptyContext,
    ZeroBudget,
    Retrieval(HybridError),
}

impl fmt::Display for GenerateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenerateError::InvalidOrder { got } => {
                write!(f, "configuration error: n-gram order must be >= 1, got {got}")
            }
            GenerateError::EmptyContext => write!(f, "completion context is empty"),
            GenerateError::ZeroBudget => write!(f, "token budget must be >= 1"),
            GenerateError::Retrieval(err) => write!(f, "{err}"),
        }
    }
}

impl core::error::Error for GenerateError {}

impl From<HybridError> for GenerateError {
    fn from(err: HybridError) -> Self {
        GenerateError::Retrieval(err)
    }
}

// ---------------------------------------------------------------------------
// Base n-gram model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct HistEntry {
    total: u64,
    successors: BTreeMap<u32, u64>,
}

/// Interpolated backoff n-gram model with add-one smoothing at the
/// unigram level. Vocabulary ids are lexicographic over corpus token
/// texts; the OOV symbol takes the last id so argmax ties prefer real
/// tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramModel {
    pub order: usize,
    vocab: Vec<String>,
    vocab_map: BTreeMap<String, u32>,
    /// counts[o-2] holds order-o histories (length o-1) for o in 2..=order.
    counts: Vec<BTreeMap<Vec<u32>, HistEntry>>,
    /// Add-one unigram over vocab plus OOV; sums to 1.
    unigram: Vec<f64>,
    /// weights[o-1] is the ML weight for order o; index 0 unused.
    pub weights: Vec<f64>,
}

impl NgramModel {
    /// Vocabulary size including the OOV symbol.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn oov_id(&self) -> u32 {
        self.vocab.len() as u32
    }

    pub fn symbol_id(&self, text: &str) -> u32 {
        self.vocab_map.get(text).copied().unwrap_or(self.oov_id())
    }

    /// Token for a vocabulary id; the kind is re-derived from the text.
    pub fn token_for(&self, id: u32) -> Token {
        let text = if id == self.oov_id() {
            OOV_TEXT
        } else {
            &self.vocab[id as usize]
        };
        Token::new(text, classify_text(text))
    }

    /// Maximum-likelihood conditional before interpolation; `None` when
    /// the history was never seen.
    pub fn ml_probability(&self, history: &[&str], next: &str) -> Option<f64> {
        let order = history.len() + 1;
        if order < 2 || order > self.order {
            return None;
        }
        let h: Vec<u32> = history.iter().map(|t| self.symbol_id(t)).collect();
        let entry = self.counts[order - 2].get(&h)?;
        let c = entry.successors.get(&self.symbol_id(next)).copied().unwrap_or(0);
        Some(c as f64 / entry.total as f64)
    }

    /// Interpolated next-token distribution given the last `order - 1`
    /// context tokens. Always sums to 1 and is everywhere positive.
    pub fn distribution(&self, context: &[Token]) -> Vec<f64> {
        let mut dist = self.unigram.clone();
        let ids: Vec<u32> = context.iter().map(|t| self.symbol_id(&t.text)).collect();
        for order in 2..=self.order {
            let hlen = order - 1;
            if ids.len() < hlen {
                break;
            }
            let history = &ids[ids.len() - hlen..];
            if let Some(entry) = self.counts[order - 2].get(history) {
                let w = self.weights[order - 1];
                for p in dist.iter_mut() {
                    *p *= 1.0 - w;
                }
                for (&next, &count) in &entry.successors {
                    dist[next as usize] += w * count as f64 / entry.total as f64;
                }
            }
        }
        dist
    }
}

/// Counts 1..=order grams per file (no cross-file histories) and fixes
/// the interpolation weights.
pub fn train_ngram(corpus: &Corpus, order: usize) -> Result<NgramModel, GenerateError> {
    if order < 1 {
        return Err(GenerateError::InvalidOrder { got: order });
    }
    let mut texts: alloc::collections::BTreeSet<String> = alloc::collections::BTreeSet::new();
    for fragment in corpus.fragments() {
        for token in &fragment.tokens {
            texts.insert(token.text.clone());
        }
    }
    let vocab: Vec<String> = texts.into_iter().collect();
    let vocab_map: BTreeMap<String, u32> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();

    let mut unigram_counts = alloc::vec![0u64; vocab.len() + 1];
    let mut counts: Vec<BTreeMap<Vec<u32>, HistEntry>> =
        (2..=order).map(|_| BTreeMap::new()).collect();
    let mut total_tokens = 0u64;

    for file in corpus.files() {
        let tokens = corpus.file_tokens(file.id).unwrap_or_default();
        let ids: Vec<u32> = tokens.iter().map(|t| vocab_map[&t.text]).collect();
        total_tokens += ids.len() as u64;
        for &id in &ids {
            unigram_counts[id as usize] += 1;
        }
        for o in 2..=order {
            if ids.len() < o {
                continue;
            }
            for window in ids.windows(o) {
                let entry = counts[o - 2].entry(window[..o - 1].to_vec()).or_default();
                entry.total += 1;
                *entry.successors.entry(window[o - 1]).or_insert(0) += 1;
            }
        }
    }

    let v = (vocab.len() + 1) as f64;
    let unigram: Vec<f64> = unigram_counts
        .iter()
        .map(|&c| (c as f64 + 1.0) / (total_tokens as f64 + v))
        .collect();
    let weights = alloc::vec![DEFAULT_INTERPOLATION; order];

    Ok(NgramModel { order, vocab, vocab_map, counts, unigram, weights })
}

// ---------------------------------------------------------------------------
// Copy-augmented model
// ---------------------------------------------------------------------------

/// Generator input: the aligned retrieved fragment (possibly empty) and
/// the query context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorInput {
    pub retrieved: Vec<Token>,
    pub context: Vec<Token>,
}

impl GeneratorInput {
    /// The wire form for window-bounded plug-in models:
    /// `retrieved ++ [separator] ++ context`. Models with a bounded
    /// window should truncate this from the left.
    pub fn concatenated(&self) -> Vec<Token> {
        let mut out = self.retrieved.clone();
        out.push(Token::new(SEP_TEXT, classify_text(SEP_TEXT)));
        out.extend(self.context.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyAugmentedModel {
    pub base: NgramModel,
    /// Weight of the base model in the mixture.
    pub lambda: f64,
    /// Shortest context suffix the copy path may match.
    pub min_match: usize,
}

impl CopyAugmentedModel {
    pub fn new(base: NgramModel) -> Self {
        CopyAugmentedModel { base, lambda: DEFAULT_LAMBDA, min_match: DEFAULT_MIN_MATCH }
    }
}

/// Follower positions of the longest context suffix occurring in
/// `retrieved` with a following token; empty when nothing of at least
/// `min_match` tokens matches.
fn copy_followers(retrieved: &[Token], context: &[Token], min_match: usize) -> Vec<usize> {
    let mut best_len = 0usize;
    let mut followers: Vec<usize> = Vec::new();
    // Matches are evaluated at each end position `e`; the follower is
    // retrieved[e], so e stays below retrieved.len().
    for e in min_match..retrieved.len() {
        let cap = e.min(context.len());
        let mut len = 0usize;
        while len < cap && retrieved[e - 1 - len] == context[context.len() - 1 - len] {
            len += 1;
        }
        if len < min_match {
            continue;
        }
        if len > best_len {
            best_len = len;
            followers.clear();
        }
        if len == best_len {
            followers.push(e);
        }
    }
    followers
}

/// Mixture distribution `lambda * P_ngram + (1 - lambda) * P_copy`.
/// With empty retrieved tokens or no match, the result is exactly the
/// base distribution.
pub fn next_distribution(model: &CopyAugmentedModel, input: &GeneratorInput) -> Vec<f64> {
    let base = model.base.distribution(&input.context);
    if input.retrieved.is_empty() {
        return base;
    }
    let followers = copy_followers(&input.retrieved, &input.context, model.min_match);
    if followers.is_empty() {
        return base;
    }
    let mut dist: Vec<f64> = base.iter().map(|p| model.lambda * p).collect();
    let mass = (1.0 - model.lambda) / followers.len() as f64;
    for e in followers {
        let id = model.base.symbol_id(&input.retrieved[e].text);
        dist[id as usize] += mass;
    }
    dist
}

// ---------------------------------------------------------------------------
// Completion
// ---------------------------------------------------------------------------

/// Retrieval wiring for completion: off, or a config over built indices.
#[derive(Clone, Copy)]
pub enum RetrievalHook<'a> {
    Off,
    On { config: &'a RetrievalConfig, indices: &'a Indices<'a> },
}

impl<'a> RetrievalHook<'a> {
    fn run(&self, query: &[Token]) -> Result<(RetrievalOutcome, Vec<Token>), GenerateError> {
        match self {
            RetrievalHook::Off => Ok((RetrievalOutcome::empty(), Vec::new())),
            RetrievalHook::On { config, indices } => {
                let outcome = retrieve(query, &api_scan(query), config, indices)?;
                let retrieved = aligned_tokens(indices.corpus, &outcome);
                Ok((outcome, retrieved))
            }
        }
    }
}

fn aligned_tokens(corpus: &Corpus, outcome: &RetrievalOutcome) -> Vec<Token> {
    match outcome.aligned {
        Some(id) => corpus.fragment(id).map(|f| f.tokens.clone()).unwrap_or_default(),
        None => Vec::new(),
    }
}

/// Completion output plus the retrieval provenance that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub tokens: Vec<Token>,
    /// Natural-log probability of each emitted token at its step.
    pub log_probs: Vec<f64>,
    pub retrievals: Vec<RetrievalOutcome>,
}

/// Greedy argmax with ties broken by ascending vocabulary index.
fn argmax(dist: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// Completes one line: retrieves once with the full context as the
/// query, then greedily emits tokens until a newline or the cap.
pub fn complete_line(
    model: &CopyAugmentedModel,
    retrieval: &RetrievalHook<'_>,
    context: &[Token],
    cap: usize,
) -> Result<CompletionResult, GenerateError> {
    if context.is_empty() {
        return Err(GenerateError::EmptyContext);
    }
    let (outcome, retrieved) = retrieval.run(context)?;
    let mut extended = context.to_vec();
    let mut tokens = Vec::new();
    let mut log_probs = Vec::new();
    while tokens.len() < cap {
        let input = GeneratorInput { retrieved: retrieved.clone(), context: extended.clone() };
        let dist = next_distribution(model, &input);
        let id = argmax(&dist);
        let token = model.base.token_for(id as u32);
        log_probs.push(ln(dist[id]));
        let is_newline = token.kind == TokenKind::Newline;
        extended.push(token.clone());
        tokens.push(token);
        if is_newline {
            break;
        }
    }
    Ok(CompletionResult { tokens, log_probs, retrievals: alloc::vec![outcome] })
}

/// Budgeted completion: the first `min(n, 100)` tokens use retrieval
/// from the initial query; past 100 tokens, one re-retrieval runs with
/// the context extended by the first 100 generated tokens.
pub fn complete_tokens(
    model: &CopyAugmentedModel,
    retrieval: &RetrievalHook<'_>,
    context: &[Token],
    budget: usize,
) -> Result<CompletionResult, GenerateError> {
    if context.is_empty() {
        return Err(GenerateError::EmptyContext);
    }
    if budget == 0 {
        return Err(GenerateError::ZeroBudget);
    }
    let (outcome, mut retrieved) = retrieval.run(context)?;
    let mut retrievals = alloc::vec![outcome];
    let mut extended = context.to_vec();
    let mut tokens = Vec::new();
    let mut log_probs = Vec::new();
    for step in 0..budget {
        if step == RERETRIEVE_AT {
            let (outcome, tokens_again) = retrieval.run(&extended)?;
            if !matches!(retrieval, RetrievalHook::Off) {
                retrieved = tokens_again;
                retrievals.push(outcome);
            }
        }
        let input = GeneratorInput { retrieved: retrieved.clone(), context: extended.clone() };
        let dist = next_distribution(model, &input);
        let id = argmax(&dist);
        let token = model.base.token_for(id as u32);
        log_probs.push(ln(dist[id]));
        extended.push(token.clone());
        tokens.push(token);
    }
    Ok(CompletionResult { tokens, log_probs, retrievals })
}

/// Teacher-forced scoring for perplexity: the log-probability of each
/// gold token under the gold history, with the same retrieval schedule
/// as [`complete_tokens`].
pub fn score_tokens(
    model: &CopyAugmentedModel,
    retrieval: &RetrievalHook<'_>,
    context: &[Token],
    gold: &[Token],
) -> Result<(Vec<f64>, Vec<RetrievalOutcome>), GenerateError> {
    if context.is_empty() {
        return Err(GenerateError::EmptyContext);
    }
    let (outcome, mut retrieved) = retrieval.run(context)?;
    let mut retrievals = alloc::vec![outcome];
    let mut extended = context.to_vec();
    let mut log_probs = Vec::with_capacity(gold.len());
    for (step, token) in gold.iter().enumerate() {
        if step == RERETRIEVE_AT {
            let (outcome, tokens_again) = retrieval.run(&extended)?;
            if !matches!(retrieval, RetrievalHook::Off) {
                retrieved = tokens_again;
                retrievals.push(outcome);
            }
        }
        let input = GeneratorInput { retrieved: retrieved.clone(), context: extended.clone() };
        let dist = next_distribution(model, &input);
        let id = model.base.symbol_id(&token.text);
        log_probs.push(ln(dist[id as usize]));
        extended.push(token.clone());
    }
    Ok((log_probs, retrievals))
}
