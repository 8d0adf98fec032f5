//! Semantic-preserving transformations and contrastive pair building.
//!
//! Positives are built by renaming identifiers (consistently at every
//! occurrence, candidates drawn from corpus frequency per role) and
//! inserting dead code whose names never appear in the host program.
//! Queries are random truncations of the untransformed original, so a
//! pair teaches the encoder to match partial code against whole
//! programs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FileId};
use crate::seeds;
use crate::syntax::{api_scan, api_sequence, identifiers, parse, ApiSequence, IdentifierRole, StatementTree};
use crate::token::{render_tokens, Token, TokenKind};

pub const MIN_TRUNCATE_LEN: usize = 10;
const MAX_CANDIDATES: usize = 10;

/// Fallback fresh names appended to every dead-code name pool so small
/// corpora cannot exhaust it in practice.
const DEFAULT_FRESH_NAMES: &[&str] = &[
    "aux", "probe", "stash", "spare", "scratch", "filler", "pad", "shadow", "ghost", "blank",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AugmentError {
    UntruncatableProgram { len: usize },
    FreshNamePoolExhausted,
    EmptyHostProgram,
    InvalidProbability { value_milli: i64 },
}

impl fmt::Display for AugmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentError::UntruncatableProgram { len } => {
                write!(f, "untruncatable program: {len} tokens is below the minimum of {MIN_TRUNCATE_LEN}")
            }
            AugmentError::FreshNamePoolExhausted => write!(f, "fresh-name pool exhausted"),
            AugmentError::EmptyHostProgram => write!(f, "host program has no statements"),
            AugmentError::InvalidProbability { value_milli } => {
                write!(f, "probability out of [0,1]: {}e-3", value_milli)
            }
        }
    }
}

impl core::error::Error for AugmentError {}

// ---------------------------------------------------------------------------
// Candidate model
// ---------------------------------------------------------------------------

/// Source of rename candidates. The reference implementation ranks
/// corpus identifiers by frequency per role; a learned model can be
/// plugged in behind the same interface.
pub trait CandidateModel {
    /// Up to ten candidates for replacing `name` in `role`; never
    /// contains `name` itself.
    fn candidates(&self, name: &str, role: IdentifierRole) -> Vec<String>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyCandidates {
    /// Per role: names ranked by descending occurrence count, ties by
    /// name. Kept unbounded; truncation happens per query.
    ranked: BTreeMap<IdentifierRole, Vec<(String, u64)>>,
}

impl FrequencyCandidates {
    pub fn ranked(&self, role: IdentifierRole) -> &[(String, u64)] {
        self.ranked.get(&role).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl CandidateModel for FrequencyCandidates {
    fn candidates(&self, name: &str, role: IdentifierRole) -> Vec<String> {
        let ranked = match self.ranked.get(&role) {
            Some(r) if r.len() >= 2 => r,
            _ => return Vec::new(),
        };
        ranked
            .iter()
            .filter(|(candidate, _)| candidate != name)
            .take(MAX_CANDIDATES)
            .map(|(candidate, _)| candidate.clone())
            .collect()
    }
}

/// Ranks corpus identifiers by occurrence count per role. Files that
/// fail to parse contribute nothing.
pub fn build_candidate_model(corpus: &Corpus) -> FrequencyCandidates {
    let mut counts: BTreeMap<IdentifierRole, BTreeMap<String, u64>> = BTreeMap::new();
    for file in corpus.files() {
        let tokens = match corpus.file_tokens(file.id) {
            Ok(tokens) => tokens,
            Err(_) => continue,
        };
        let tree = match parse(&tokens) {
            Ok(tree) => tree,
            Err(_) => continue,
        };
        for (name, entry) in identifiers(&tree).entries {
            *counts.entry(entry.role).or_default().entry(name).or_insert(0) +=
                entry.positions.len() as u64;
        }
    }
    let mut ranked = BTreeMap::new();
    for (role, names) in counts {
        let mut list: Vec<(String, u64)> = names.into_iter().collect();
        list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.insert(role, list);
    }
    FrequencyCandidates { ranked }
}

// ---------------------------------------------------------------------------
// Transform records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformRecord {
    Rename {
        /// Old name to new name; injective.
        rename_map: BTreeMap<String, String>,
    },
    DeadCode {
        /// Rendered text of the inserted statement(s).
        rendered: String,
        /// Pre-order index of the statement the code was inserted after.
        statement_index: usize,
        /// Spliced token range: removing `token_pos..token_pos+token_len`
        /// restores the original token stream exactly.
        token_pos: usize,
        token_len: usize,
        /// Fresh names the instantiation used.
        names: Vec<String>,
    },
}

/// Undoes a dead-code insertion by deleting the recorded token range.
pub fn revert_dead_code(tokens: &[Token], record: &TransformRecord) -> Vec<Token> {
    match record {
        TransformRecord::DeadCode { token_pos, token_len, .. } => {
            let mut out = tokens[..*token_pos].to_vec();
            out.extend_from_slice(&tokens[token_pos + token_len..]);
            out
        }
        TransformRecord::Rename { .. } => tokens.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Identifier renaming
// ---------------------------------------------------------------------------

/// Every identifier token text in the program; renames and dead-code
/// names must avoid all of them, including API names, so that no
/// shadowing can change behavior.
fn all_identifier_texts(tree: &StatementTree) -> BTreeSet<String> {
    tree.tokens()
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.clone())
        .collect()
}

/// Renames each table entry with probability `rename_prob`, applying
/// the chosen candidate at every occurrence. Candidates colliding with
/// any name in the program (or an already chosen target) are skipped;
/// if all collide the identifier stays.
pub fn rename_identifiers(
    tree: &StatementTree,
    model: &dyn CandidateModel,
    rename_prob: f64,
    rng: &mut impl Rng,
) -> Result<(StatementTree, TransformRecord), AugmentError> {
    if !(0.0..=1.0).contains(&rename_prob) {
        return Err(AugmentError::InvalidProbability {
            value_milli: (rename_prob * 1000.0) as i64,
        });
    }
    let table = identifiers(tree);
    let mut forbidden = all_identifier_texts(tree);
    let mut renamed = tree.clone();
    let mut rename_map = BTreeMap::new();

    for (name, entry) in &table.entries {
        if !rng.gen_bool(rename_prob) {
            continue;
        }
        let mut candidates = model.candidates(name, entry.role);
        if candidates.is_empty() {
            continue;
        }
        candidates.shuffle(rng);
        let Some(target) = candidates.into_iter().find(|c| !forbidden.contains(c)) else {
            continue;
        };
        for &pos in &entry.positions {
            renamed.set_identifier_text(pos, &target);
        }
        forbidden.insert(target.clone());
        rename_map.insert(name.clone(), target);
    }
    Ok((renamed, TransformRecord::Rename { rename_map }))
}

// ---------------------------------------------------------------------------
// Dead code insertion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateKind {
    Declaration,
    Expression,
    Conditional,
    Looping,
}

pub const ALL_TEMPLATE_KINDS: [TemplateKind; 4] = [
    TemplateKind::Declaration,
    TemplateKind::Expression,
    TemplateKind::Conditional,
    TemplateKind::Looping,
];

/// Template set plus the pool fresh names are drawn from. The pool may
/// be sourced from other files' identifiers; host collisions are
/// filtered per insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadCodeTemplates {
    pub kinds: Vec<TemplateKind>,
    pub name_pool: Vec<String>,
}

impl DeadCodeTemplates {
    pub fn new(name_pool: Vec<String>) -> Self {
        let mut pool: Vec<String> = name_pool;
        pool.extend(DEFAULT_FRESH_NAMES.iter().map(|s| s.to_string()));
        pool.sort();
        pool.dedup();
        DeadCodeTemplates { kinds: ALL_TEMPLATE_KINDS.to_vec(), name_pool: pool }
    }

    /// Pool from every identifier appearing anywhere in the corpus.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut pool = BTreeSet::new();
        for fragment in corpus.fragments() {
            for token in &fragment.tokens {
                if token.kind == TokenKind::Identifier {
                    pool.insert(token.text.clone());
                }
            }
        }
        DeadCodeTemplates::new(pool.into_iter().collect())
    }
}

struct FreshNames<'a, R: Rng> {
    avail: Vec<&'a str>,
    used: Vec<String>,
    rng: &'a mut R,
}

impl<'a, R: Rng> FreshNames<'a, R> {
    fn draw(&mut self) -> Result<String, AugmentError> {
        if self.avail.is_empty() {
            return Err(AugmentError::FreshNamePoolExhausted);
        }
        let i = self.rng.gen_range(0..self.avail.len());
        let name = self.avail.swap_remove(i).to_string();
        self.used.push(name.clone());
        Ok(name)
    }
}

fn push_line(out: &mut Vec<Token>, depth: usize, content: Vec<Token>) {
    for _ in 0..depth {
        out.push(Token::indent());
    }
    out.extend(content);
    out.push(Token::newline());
}

fn int_literal(rng: &mut impl Rng) -> Token {
    Token::new(format!("{}", rng.gen_range(0..100u32)), TokenKind::Literal)
}

fn string_literal(rng: &mut impl Rng) -> Token {
    let len = rng.gen_range(1..=8);
    let mut s = String::from("\"");
    for _ in 0..len {
        s.push((b'a' + rng.gen_range(0..26u8)) as char);
    }
    s.push('"');
    Token::new(s, TokenKind::Literal)
}

fn declaration_line<R: Rng>(fresh: &mut FreshNames<R>) -> Result<Vec<Token>, AugmentError> {
    let name = fresh.draw()?;
    let literal =
        if fresh.rng.gen_bool(0.7) { int_literal(fresh.rng) } else { string_literal(fresh.rng) };
    Ok(alloc::vec![
        Token::new(name, TokenKind::Identifier),
        Token::new("=", TokenKind::Operator),
        literal,
    ])
}

fn expression_line<R: Rng>(fresh: &mut FreshNames<R>) -> Result<Vec<Token>, AugmentError> {
    let mut out = Vec::new();
    out.push(Token::new(fresh.draw()?, TokenKind::Identifier));
    if fresh.rng.gen_bool(0.5) {
        out.push(Token::new(".", TokenKind::Punct));
        out.push(Token::new(fresh.draw()?, TokenKind::Identifier));
    }
    out.push(Token::new("(", TokenKind::Punct));
    out.push(int_literal(fresh.rng));
    out.push(Token::new(")", TokenKind::Punct));
    Ok(out)
}

fn simple_body<R: Rng>(
    out: &mut Vec<Token>,
    depth: usize,
    fresh: &mut FreshNames<R>,
) -> Result<usize, AugmentError> {
    // Appendix-style bodies: one to three simple statements.
    let count = fresh.rng.gen_range(1..=3);
    for _ in 0..count {
        let line = if fresh.rng.gen_bool(0.6) {
            declaration_line(fresh)?
        } else {
            expression_line(fresh)?
        };
        push_line(out, depth, line);
    }
    Ok(count)
}

fn instantiate<R: Rng>(
    kind: TemplateKind,
    depth: usize,
    fresh: &mut FreshNames<R>,
) -> Result<(Vec<Token>, usize), AugmentError> {
    let mut out = Vec::new();
    let statements = match kind {
        TemplateKind::Declaration => {
            let line = declaration_line(fresh)?;
            push_line(&mut out, depth, line);
            1
        }
        TemplateKind::Expression => {
            let line = expression_line(fresh)?;
            push_line(&mut out, depth, line);
            1
        }
        TemplateKind::Conditional => {
            let guard = fresh.draw()?;
            let header = alloc::vec![
                Token::new("if", TokenKind::Keyword),
                Token::new(guard, TokenKind::Identifier),
                Token::new("<", TokenKind::Operator),
                int_literal(fresh.rng),
                Token::new(":", TokenKind::Punct),
            ];
            push_line(&mut out, depth, header);
            1 + simple_body(&mut out, depth + 1, fresh)?
        }
        TemplateKind::Looping => {
            if fresh.rng.gen_bool(0.5) {
                let var = fresh.draw()?;
                let iter = fresh.draw()?;
                let header = alloc::vec![
                    Token::new("for", TokenKind::Keyword),
                    Token::new(var, TokenKind::Identifier),
                    Token::new("in", TokenKind::Keyword),
                    Token::new(iter, TokenKind::Identifier),
                    Token::new(":", TokenKind::Punct),
                ];
                push_line(&mut out, depth, header);
            } else {
                let guard = fresh.draw()?;
                let header = alloc::vec![
                    Token::new("while", TokenKind::Keyword),
                    Token::new(guard, TokenKind::Identifier),
                    Token::new(">", TokenKind::Operator),
                    int_literal(fresh.rng),
                    Token::new(":", TokenKind::Punct),
                ];
                push_line(&mut out, depth, header);
            }
            1 + simple_body(&mut out, depth + 1, fresh)?
        }
    };
    Ok((out, statements))
}

/// Inserts one instantiated template after a uniformly chosen statement
/// at that statement's nesting level. Deleting the recorded token range
/// restores the original program token-exactly.
pub fn insert_dead_code(
    tree: &StatementTree,
    templates: &DeadCodeTemplates,
    rng: &mut impl Rng,
) -> Result<(StatementTree, TransformRecord), AugmentError> {
    if tree.statement_count() == 0 {
        return Err(AugmentError::EmptyHostProgram);
    }
    let forbidden = all_identifier_texts(tree);
    let avail: Vec<&str> = templates
        .name_pool
        .iter()
        .map(|s| s.as_str())
        .filter(|name| !forbidden.contains(*name))
        .collect();
    if avail.is_empty() {
        return Err(AugmentError::FreshNamePoolExhausted);
    }

    // Nodes are stored in line order, so a uniform node id is a uniform
    // statement choice.
    let statement_index = rng.gen_range(0..tree.statement_count());
    let node = tree.node(statement_index);
    let insert_at = node.span.end;
    let depth = node.depth;
    let kind = templates.kinds[rng.gen_range(0..templates.kinds.len())];

    let mut fresh = FreshNames { avail, used: Vec::new(), rng };
    let (mut inserted, _) = instantiate(kind, depth, &mut fresh)?;
    let names = fresh.used;

    // A file whose last line lacks a newline needs one before the
    // splice; it becomes part of the recorded range.
    if insert_at > 0 && tree.tokens()[insert_at - 1].kind != TokenKind::Newline {
        inserted.insert(0, Token::newline());
    }

    let rendered = render_tokens(&inserted);
    let token_len = inserted.len();
    let mut tokens = tree.tokens()[..insert_at].to_vec();
    tokens.extend(inserted);
    tokens.extend_from_slice(&tree.tokens()[insert_at..]);
    let new_tree = parse(&tokens).expect("instantiated dead code must parse");

    Ok((
        new_tree,
        TransformRecord::DeadCode {
            rendered,
            statement_index,
            token_pos: insert_at,
            token_len,
            names,
        },
    ))
}

// ---------------------------------------------------------------------------
// Query truncation
// ---------------------------------------------------------------------------

/// Uniform prefix over `[ceil(0.1 L), floor(0.9 L)]` tokens.
pub fn truncate_query(tokens: &[Token], rng: &mut impl Rng) -> Result<Vec<Token>, AugmentError> {
    let len = tokens.len();
    if len < MIN_TRUNCATE_LEN {
        return Err(AugmentError::UntruncatableProgram { len });
    }
    let lo = len.div_ceil(10);
    let hi = len * 9 / 10;
    let take = rng.gen_range(lo..=hi);
    Ok(tokens[..take].to_vec())
}

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub rename_prob: f64,
    pub dead_code_count: usize,
    pub pairs_per_program: usize,
    /// Ablation switch: `false` uses the full original as the query.
    pub truncate_queries: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rename_prob: 0.5,
            dead_code_count: 1,
            pairs_per_program: 1,
            truncate_queries: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub file: FileId,
    pub pair_index: usize,
    pub seed: u64,
    pub transforms: Vec<TransformRecord>,
}

/// One contrastive example: a truncated original as the query and the
/// fully transformed program as the positive, each with its API
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query_tokens: Vec<Token>,
    pub query_api: ApiSequence,
    pub positive_tokens: Vec<Token>,
    pub positive_api: ApiSequence,
    pub provenance: PairProvenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub emitted: usize,
    pub skipped: Vec<(String, String)>,
}

/// Builds the contrastive pair stream for a corpus: rename, then dead
/// code insertions to form the positive; truncate the original to form
/// the query. Deterministic given the config seed; per-program failures
/// are skipped and reported.
pub fn build_training_pairs(corpus: &Corpus, config: &AugmentConfig) -> (Vec<TrainingPair>, AugmentReport) {
    let model = build_candidate_model(corpus);
    let templates = DeadCodeTemplates::from_corpus(corpus);
    build_training_pairs_with(corpus, config, &model, &templates)
}

pub fn build_training_pairs_with(
    corpus: &Corpus,
    config: &AugmentConfig,
    model: &dyn CandidateModel,
    templates: &DeadCodeTemplates,
) -> (Vec<TrainingPair>, AugmentReport) {
    let mut pairs = Vec::new();
    let mut report = AugmentReport::default();

    for file in corpus.files() {
        let tokens = match corpus.file_tokens(file.id) {
            Ok(tokens) => tokens,
            Err(err) => {
                report.skipped.push((file.path.clone(), format!("{err}")));
                continue;
            }
        };
        let tree = match parse(&tokens) {
            Ok(tree) => tree,
            Err(err) => {
                report.skipped.push((file.path.clone(), format!("{err}")));
                continue;
            }
        };
        for pair_index in 0..config.pairs_per_program {
            let mut rng = seeds::derive(
                config.seed,
                seeds::STAGE_PAIRS,
                (file.id.0 as u64) << 16 | pair_index as u64,
            );
            match build_one_pair(&tree, &tokens, config, model, templates, config.seed, &mut rng, file.id, pair_index) {
                Ok(pair) => {
                    pairs.push(pair);
                    report.emitted += 1;
                }
                Err(err) => report.skipped.push((file.path.clone(), format!("{err}"))),
            }
        }
    }
    (pairs, report)
}

#[allow(clippy::too_many_arguments)]
fn build_one_pair(
    tree: &StatementTree,
    original_tokens: &[Token],
    config: &AugmentConfig,
    model: &dyn CandidateModel,
    templates: &DeadCodeTemplates,
    pair_seed: u64,
    rng: &mut impl Rng,
    file: FileId,
    pair_index: usize,
) -> Result<TrainingPair, AugmentError> {
    let mut transforms = Vec::new();
    let (mut positive, rename_record) = rename_identifiers(tree, model, config.rename_prob, rng)?;
    transforms.push(rename_record);
    // Fresh names must avoid the original program's identifiers as well
    // as the renamed host's; renaming may have freed original names.
    let original_names = all_identifier_texts(tree);
    let scoped = DeadCodeTemplates {
        kinds: templates.kinds.clone(),
        name_pool: templates
            .name_pool
            .iter()
            .filter(|name| !original_names.contains(*name))
            .cloned()
            .collect(),
    };
    for _ in 0..config.dead_code_count {
        let (next, record) = insert_dead_code(&positive, &scoped, rng)?;
        transforms.push(record);
        positive = next;
    }
    let query_tokens = if config.truncate_queries {
        truncate_query(original_tokens, rng)?
    } else {
        original_tokens.to_vec()
    };
    let query_api = api_scan(&query_tokens);
    let positive_api = api_sequence(&positive);
    Ok(TrainingPair {
        query_tokens,
        query_api,
        positive_tokens: positive.into_tokens(),
        positive_api,
        provenance: PairProvenance { file, pair_index, seed: pair_seed, transforms },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, FileInput, Language};
    use crate::lex::tokenize;
    use crate::progen::{generate_program, ProgenConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct FixedModel(BTreeMap<&'static str, Vec<&'static str>>);

    impl CandidateModel for FixedModel {
        fn candidates(&self, name: &str, _role: IdentifierRole) -> Vec<String> {
            self.0
                .get(name)
                .map(|v| v.iter().map(|s| s.to_string()).collect())
                .unwrap_or_default()
        }
    }

    fn tree_of(src: &str) -> StatementTree {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn progen_corpus(n: usize, seed: u64) -> Corpus {
        let config = ProgenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<FileInput> = (0..n)
            .map(|i| FileInput {
                path: alloc::format!("p{i:04}.mini"),
                text: generate_program(&mut rng, &config),
            })
            .collect();
        build_corpus(inputs, Language::Mini, 32).unwrap().0
    }

    #[test]
    fn rename_prob_zero_is_identity() {
        let tree = tree_of("x = 1\ny = x\n");
        let model = FixedModel(BTreeMap::new());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, record) = rename_identifiers(&tree, &model, 0.0, &mut rng).unwrap();
        assert_eq!(out.tokens(), tree.tokens());
        assert_eq!(record, TransformRecord::Rename { rename_map: BTreeMap::new() });
    }

    #[test]
    fn rename_applies_at_every_occurrence() {
        let tree = tree_of("x = 1\ny = x\n");
        let mut map = BTreeMap::new();
        map.insert("x", alloc::vec!["count"]);
        map.insert("y", alloc::vec!["total"]);
        let model = FixedModel(map);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, record) = rename_identifiers(&tree, &model, 1.0, &mut rng).unwrap();
        assert_eq!(out.render(), "count = 1\ntotal = count\n");
        match record {
            TransformRecord::Rename { rename_map } => {
                assert_eq!(rename_map["x"], "count");
                assert_eq!(rename_map["y"], "total");
            }
            _ => panic!("expected rename record"),
        }
    }

    #[test]
    fn colliding_candidates_are_skipped() {
        let tree = tree_of("x = 1\ny = x\n");
        let mut map = BTreeMap::new();
        map.insert("x", alloc::vec!["y", "z"]);
        let model = FixedModel(map);
        // Whatever order the shuffle picks, "y" collides and "z" wins.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (out, _) = rename_identifiers(&tree, &model, 1.0, &mut rng).unwrap();
        assert_eq!(out.render(), "z = 1\ny = z\n");
    }

    #[test]
    fn fully_colliding_candidates_leave_name() {
        let tree = tree_of("x = 1\ny = x\n");
        let mut map = BTreeMap::new();
        map.insert("x", alloc::vec!["y"]);
        let model = FixedModel(map);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (out, record) = rename_identifiers(&tree, &model, 1.0, &mut rng).unwrap();
        assert_eq!(out.render(), "x = 1\ny = x\n");
        assert_eq!(record, TransformRecord::Rename { rename_map: BTreeMap::new() });
    }

    #[test]
    fn rename_never_touches_api_names() {
        let tree = tree_of("x = 1\nprint(x)\nos.path.join(x)\n");
        let mut map = BTreeMap::new();
        map.insert("x", alloc::vec!["value"]);
        let model = FixedModel(map);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (out, _) = rename_identifiers(&tree, &model, 1.0, &mut rng).unwrap();
        assert_eq!(out.render(), "value = 1\nprint(value)\nos.path.join(value)\n");
    }

    #[test]
    fn rename_fraction_tracks_probability() {
        // Monte Carlo over generated programs at p = 0.5: the pooled
        // renamed fraction of eligible identifiers stays within
        // [0.4, 0.6] (n is in the thousands, so this is a wide 95% band).
        let corpus = progen_corpus(60, 99);
        let model = build_candidate_model(&corpus);
        let config = ProgenConfig::default();
        let mut gen_rng = ChaCha8Rng::seed_from_u64(123);
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let mut eligible = 0usize;
        let mut renamed = 0usize;
        for _ in 0..500 {
            let tree = tree_of(&generate_program(&mut gen_rng, &config));
            let table = identifiers(&tree);
            for (name, entry) in &table.entries {
                if !model.candidates(name, entry.role).is_empty() {
                    eligible += 1;
                }
            }
            let (_, record) = rename_identifiers(&tree, &model, 0.5, &mut rng).unwrap();
            if let TransformRecord::Rename { rename_map } = record {
                renamed += rename_map.len();
            }
        }
        let fraction = renamed as f64 / eligible as f64;
        assert!((0.4..=0.6).contains(&fraction), "renamed fraction {fraction}");
    }

    #[test]
    fn candidate_model_ranks_by_frequency() {
        let inputs = alloc::vec![
            FileInput { path: "a.mini".into(), text: "i = 1\ni = i + 1\nj = i\n".into() },
            FileInput { path: "b.mini".into(), text: "i = 2\nk = i\n".into() },
        ];
        let corpus = build_corpus(inputs, Language::Mini, 8).unwrap().0;
        let model = build_candidate_model(&corpus);
        let ranked = model.ranked(IdentifierRole::Variable);
        assert_eq!(ranked[0].0, "i");
        // Query for another name: "i" leads the candidate list.
        assert_eq!(model.candidates("j", IdentifierRole::Variable)[0], "i");
        // Query for "i" itself: excluded.
        assert!(!model.candidates("i", IdentifierRole::Variable).contains(&"i".to_string()));
    }

    #[test]
    fn candidate_lists_are_capped_at_ten() {
        let corpus = progen_corpus(40, 7);
        let model = build_candidate_model(&corpus);
        for name in ["x", "definitely_absent"] {
            assert!(model.candidates(name, IdentifierRole::Variable).len() <= 10);
        }
    }

    #[test]
    fn single_identifier_role_has_no_candidates() {
        let inputs = alloc::vec![FileInput { path: "a.mini".into(), text: "i = 1\ni = 2\n".into() }];
        let corpus = build_corpus(inputs, Language::Mini, 8).unwrap().0;
        let model = build_candidate_model(&corpus);
        assert!(model.candidates("other", IdentifierRole::Variable).is_empty());
    }

    #[test]
    fn dead_code_inserts_one_template() {
        let tree = tree_of("x = 1\n");
        let templates = DeadCodeTemplates::new(alloc::vec!["fresh_a".into(), "fresh_b".into(), "fresh_c".into()]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, record) = insert_dead_code(&tree, &templates, &mut rng).unwrap();
        assert!(out.statement_count() > 1);
        match &record {
            TransformRecord::DeadCode { names, .. } => {
                assert!(!names.is_empty());
                for name in names {
                    assert!(!name.is_empty());
                    assert_ne!(name, "x");
                }
                let reverted = revert_dead_code(out.tokens(), &record);
                assert_eq!(reverted, tree.tokens());
            }
            _ => panic!("expected dead code record"),
        }
    }

    #[test]
    fn conditional_template_body_has_simple_statements() {
        let tree = tree_of("x = 1\n");
        let templates = DeadCodeTemplates {
            kinds: alloc::vec![TemplateKind::Conditional],
            name_pool: DeadCodeTemplates::new(Vec::new()).name_pool,
        };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, _) = insert_dead_code(&tree, &templates, &mut rng).unwrap();
            let conditional = out
                .nodes()
                .iter()
                .find(|n| n.kind() == crate::syntax::StatementKind::Conditional)
                .expect("conditional inserted");
            assert!(!conditional.children.is_empty());
            for &child in &conditional.children {
                assert!(matches!(
                    out.node(child).kind(),
                    crate::syntax::StatementKind::Declaration | crate::syntax::StatementKind::Expression
                ));
            }
        }
    }

    #[test]
    fn exhausted_pool_is_an_error() {
        let tree = tree_of("aux = 1\n");
        let templates = DeadCodeTemplates { kinds: ALL_TEMPLATE_KINDS.to_vec(), name_pool: alloc::vec!["aux".into()] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            insert_dead_code(&tree, &templates, &mut rng).unwrap_err(),
            AugmentError::FreshNamePoolExhausted
        );
    }

    #[test]
    fn reverse_delete_round_trip_over_many_programs() {
        let config = ProgenConfig::default();
        let mut gen_rng = ChaCha8Rng::seed_from_u64(44);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let templates = DeadCodeTemplates::new(Vec::new());
        for _ in 0..200 {
            let tree = tree_of(&generate_program(&mut gen_rng, &config));
            let (out, record) = insert_dead_code(&tree, &templates, &mut rng).unwrap();
            assert_eq!(revert_dead_code(out.tokens(), &record), tree.tokens());
            // No inserted name collides with any host identifier.
            let host = all_identifier_texts(&tree);
            if let TransformRecord::DeadCode { names, .. } = &record {
                for name in names {
                    assert!(!host.contains(name), "fresh name {name} collides");
                }
            }
        }
    }

    #[test]
    fn insertion_respects_nesting_level() {
        let tree = tree_of("def f(a):\n    b = a\n    return b\n");
        let templates = DeadCodeTemplates {
            kinds: alloc::vec![TemplateKind::Declaration],
            name_pool: DeadCodeTemplates::new(Vec::new()).name_pool,
        };
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, record) = insert_dead_code(&tree, &templates, &mut rng).unwrap();
            let TransformRecord::DeadCode { statement_index, .. } = &record else { panic!() };
            let host_depth = tree.node(*statement_index).depth;
            // The inserted declaration is the new statement; find it as
            // the node whose header starts at token_pos (plus indents).
            let TransformRecord::DeadCode { token_pos, .. } = &record else { panic!() };
            let inserted = out
                .nodes()
                .iter()
                .find(|n| n.header.start == *token_pos)
                .expect("inserted statement present");
            assert_eq!(inserted.depth, host_depth);
        }
    }

    #[test]
    fn truncate_range_and_prefix() {
        let tokens: Vec<Token> = (0..100).map(|i| Token::new(alloc::format!("t{i}"), TokenKind::Identifier)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let prefix = truncate_query(&tokens, &mut rng).unwrap();
            assert!((10..=90).contains(&prefix.len()));
            assert_eq!(prefix[..], tokens[..prefix.len()]);
        }
    }

    #[test]
    fn truncate_too_short_is_error() {
        let tokens: Vec<Token> = (0..9).map(|_| Token::new("x", TokenKind::Identifier)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(matches!(
            truncate_query(&tokens, &mut rng),
            Err(AugmentError::UntruncatableProgram { len: 9 })
        ));
    }

    #[test]
    fn truncate_lengths_are_uniform() {
        // Chi-square goodness of fit over the 81 possible prefix
        // lengths for L = 100, 10k draws, alpha = 0.01.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let tokens: Vec<Token> = (0..100).map(|_| Token::new("x", TokenKind::Identifier)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        let mut counts = [0u32; 81];
        let draws = 10_000;
        for _ in 0..draws {
            let len = truncate_query(&tokens, &mut rng).unwrap().len();
            counts[len - 10] += 1;
        }
        let expected = draws as f64 / 81.0;
        let stat: f64 = counts.iter().map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        }).sum();
        let critical = ChiSquared::new(80.0).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
    }

    #[test]
    fn degenerate_config_reproduces_original() {
        let corpus = progen_corpus(5, 10);
        let config = AugmentConfig {
            rename_prob: 0.0,
            dead_code_count: 0,
            pairs_per_program: 1,
            truncate_queries: true,
            seed: 4,
        };
        let (pairs, report) = build_training_pairs(&corpus, &config);
        assert_eq!(pairs.len(), 5);
        assert!(report.skipped.is_empty());
        for pair in &pairs {
            let original = corpus.file_tokens(pair.provenance.file).unwrap();
            assert_eq!(pair.positive_tokens, original);
            assert!(pair.query_tokens.len() < original.len());
            assert_eq!(pair.query_tokens[..], original[..pair.query_tokens.len()]);
        }
    }

    #[test]
    fn all_positives_parse_and_queries_are_prefixes() {
        let corpus = progen_corpus(30, 77);
        let config = AugmentConfig { pairs_per_program: 2, seed: 9, ..Default::default() };
        let (pairs, report) = build_training_pairs(&corpus, &config);
        assert_eq!(pairs.len(), 60, "skipped: {:?}", report.skipped);
        for pair in &pairs {
            parse(&pair.positive_tokens).expect("positive parses");
            let original = corpus.file_tokens(pair.provenance.file).unwrap();
            assert_eq!(pair.query_tokens[..], original[..pair.query_tokens.len()]);
        }
    }

    #[test]
    fn pair_stream_is_deterministic() {
        let corpus = progen_corpus(10, 5);
        let config = AugmentConfig { seed: 31, ..Default::default() };
        let (a, _) = build_training_pairs(&corpus, &config);
        let (b, _) = build_training_pairs(&corpus, &config);
        assert_eq!(a, b);
    }

    #[test]
    fn renaming_preserves_token_count_and_non_identifiers() {
        let corpus = progen_corpus(20, 13);
        let model = build_candidate_model(&corpus);
        let config = ProgenConfig::default();
        let mut gen_rng = ChaCha8Rng::seed_from_u64(66);
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..100 {
            let tree = tree_of(&generate_program(&mut gen_rng, &config));
            let (out, _) = rename_identifiers(&tree, &model, 0.7, &mut rng).unwrap();
            assert_eq!(out.tokens().len(), tree.tokens().len());
            for (before, after) in tree.tokens().iter().zip(out.tokens()) {
                assert_eq!(before.kind, after.kind);
                if before.kind != TokenKind::Identifier {
                    assert_eq!(before.text, after.text);
                }
            }
        }
    }
}
