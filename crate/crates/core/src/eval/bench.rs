//! Synthetic clone-detection and completion benchmark.
//!
//! Each problem is a generated seed program; its pool members are
//! transformed variants (rename + dead code) plus one verbatim template
//! copy of a held-out completion variant, so the retrieval database
//! contains near-duplicates of the completion examples without sharing
//! files with them. Clone queries are truncations of pool variants;
//! solutions of the same problem count as clones.
//!
//! Completion examples are cut at the first line boundary past one
//! fragment length, so the template's aligned successor fragment covers
//! the gold continuation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{
    build_candidate_model, insert_dead_code, rename_identifiers, DeadCodeTemplates,
    FrequencyCandidates,
};
use crate::corpus::{build_corpus, Corpus, FileId, FileInput, Language};
use crate::progen::{generate_program_tokens, ProgenConfig};
use crate::seeds;
use crate::syntax::{api_scan, parse, ApiSequence};
use crate::token::{render_tokens, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub num_problems: usize,
    pub variants_per_problem: usize,
    pub seed: u64,
    /// Fragment length of the pool corpus; completion split points sit
    /// just past one fragment.
    pub fragment_length: usize,
    pub rename_prob: f64,
    pub dead_code_count: usize,
    /// Clone query prefix length as a fraction of the variant, drawn
    /// uniformly from this closed range.
    pub query_prefix: (f64, f64),
    /// Fraction of queries assigned to the dev split (alpha tuning).
    pub dev_fraction: f64,
    /// Gold continuation length cap for token-level completion.
    pub gold_token_cap: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            num_problems: 100,
            variants_per_problem: 5,
            seed: 0,
            fragment_length: 32,
            rename_prob: 0.5,
            dead_code_count: 1,
            query_prefix: (0.1, 0.5),
            dev_fraction: 0.2,
            gold_token_cap: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchError {
    InvalidConfig { message: String },
    GenerationFailed { problem: usize, message: String },
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::InvalidConfig { message } => write!(f, "invalid benchmark config: {message}"),
            BenchError::GenerationFailed { problem, message } => {
                write!(f, "benchmark generation failed at problem {problem}: {message}")
            }
        }
    }
}

impl core::error::Error for BenchError {}

/// One partial-search query: a truncated pool variant whose gold set is
/// the other members of its problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneQuery {
    pub tokens: Vec<Token>,
    pub api: ApiSequence,
    pub problem: usize,
    /// Pool file the query was truncated from; excluded from candidates
    /// and relevance.
    pub source: FileId,
    /// Dev queries feed alpha tuning; test queries feed reported metrics.
    pub dev: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneBenchmark {
    pub pool: Corpus,
    /// problem id -> pool files whose programs solve it.
    pub problems: BTreeMap<usize, Vec<FileId>>,
    pub queries: Vec<CloneQuery>,
}

impl CloneBenchmark {
    /// Gold programs for a query: same-problem members minus the
    /// query's own source program.
    pub fn relevant(&self, query: &CloneQuery) -> alloc::collections::BTreeSet<FileId> {
        self.problems[&query.problem]
            .iter()
            .copied()
            .filter(|&f| f != query.source)
            .collect()
    }
}

/// One held-out completion example. The context ends at a line start;
/// the gold line is that full line and the gold tokens extend up to the
/// configured cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionItem {
    pub context: Vec<Token>,
    pub gold_line: Vec<Token>,
    pub gold_tokens: Vec<Token>,
    pub problem: usize,
    /// Held-out source path (not a pool member).
    pub source_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSet {
    pub items: Vec<CompletionItem>,
}

fn validate(config: &BenchmarkConfig) -> Result<(), BenchError> {
    let fail = |message: &str| Err(BenchError::InvalidConfig { message: message.to_string() });
    if config.num_problems < 2 {
        return fail("num_problems must be at least 2");
    }
    if config.variants_per_problem < 1 {
        return fail("variants_per_problem must be at least 1");
    }
    if !(0.0 < config.query_prefix.0
        && config.query_prefix.0 <= config.query_prefix.1
        && config.query_prefix.1 < 1.0)
    {
        return fail("query_prefix must satisfy 0 < lo <= hi < 1");
    }
    if !(0.0..=1.0).contains(&config.dev_fraction) {
        return fail("dev_fraction must be in [0,1]");
    }
    if !(0.0..=1.0).contains(&config.rename_prob) {
        return fail("rename_prob must be in [0,1]");
    }
    Ok(())
}

/// Seed programs must leave room for a completion split past one
/// fragment plus a full gold line.
fn has_line_break_after(tokens: &[Token], position: usize) -> bool {
    let Some(split) = split_point(tokens, position) else {
        return false;
    };
    tokens[split..].iter().any(|t| t.kind == TokenKind::Newline)
}

/// First token index at a line start strictly after `position`.
fn split_point(tokens: &[Token], position: usize) -> Option<usize> {
    for (i, token) in tokens.iter().enumerate() {
        if i >= position && token.kind == TokenKind::Newline && i + 1 < tokens.len() {
            return Some(i + 1);
        }
    }
    None
}

struct VariantOutcome {
    tokens: Vec<Token>,
}

fn make_variant(
    seed_tree: &crate::syntax::StatementTree,
    config: &BenchmarkConfig,
    model: &FrequencyCandidates,
    templates: &DeadCodeTemplates,
    rng: &mut impl Rng,
) -> Result<VariantOutcome, String> {
    let (mut tree, _) = rename_identifiers(seed_tree, model, config.rename_prob, rng)
        .map_err(|e| format!("{e}"))?;
    // Fresh names avoid the seed program's identifiers too, not just
    // the renamed host's.
    let seed_names: alloc::collections::BTreeSet<&str> = seed_tree
        .tokens()
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.as_str())
        .collect();
    let scoped = DeadCodeTemplates {
        kinds: templates.kinds.clone(),
        name_pool: templates
            .name_pool
            .iter()
            .filter(|name| !seed_names.contains(name.as_str()))
            .cloned()
            .collect(),
    };
    for _ in 0..config.dead_code_count {
        let (next, _) = insert_dead_code(&tree, &scoped, rng).map_err(|e| format!("{e}"))?;
        tree = next;
    }
    Ok(VariantOutcome { tokens: tree.into_tokens() })
}

/// Generates the benchmark: `num_problems` distinct seed programs, the
/// transformed pool variants and verbatim templates, partial-search
/// clone queries, and the held-out completion set. Deterministic given
/// the config seed.
pub fn build_synthetic_benchmark(
    config: &BenchmarkConfig,
) -> Result<(CloneBenchmark, CompletionSet), BenchError> {
    validate(config)?;
    let transforms_enabled = config.rename_prob > 0.0 || config.dead_code_count > 0;
    let progen_config = ProgenConfig {
        min_tokens: config.fragment_length + 24,
        max_tokens: config.fragment_length * 3 + 16,
        max_depth: 2,
    };

    // Distinct seed programs with room for the completion split.
    let mut seen: alloc::collections::BTreeSet<Vec<Token>> = Default::default();
    let mut seed_programs: Vec<Vec<Token>> = Vec::new();
    for problem in 0..config.num_problems {
        let mut rng = seeds::derive(config.seed, seeds::STAGE_BENCH_SEEDS, problem as u64);
        let mut found = false;
        for _ in 0..64 {
            let tokens = generate_program_tokens(&mut rng, &progen_config);
            if has_line_break_after(&tokens, config.fragment_length + 2)
                && !seen.contains(&tokens)
            {
                seen.insert(tokens.clone());
                seed_programs.push(tokens);
                found = true;
                break;
            }
        }
        if !found {
            return Err(BenchError::GenerationFailed {
                problem,
                message: "no distinct splittable seed program after 64 attempts".to_string(),
            });
        }
    }

    // A provisional corpus over the seeds drives the candidate model
    // and the dead-code name pool, mirroring the real pipeline where
    // both come from the ingested corpus.
    let seed_inputs: Vec<FileInput> = seed_programs
        .iter()
        .enumerate()
        .map(|(i, tokens)| FileInput {
            path: format!("s{i:04}.mini"),
            text: render_tokens(tokens),
        })
        .collect();
    let seed_corpus = build_corpus(seed_inputs, Language::Mini, config.fragment_length)
        .map_err(|e| BenchError::GenerationFailed { problem: 0, message: format!("{e}") })?
        .0;
    let model = build_candidate_model(&seed_corpus);
    let templates = DeadCodeTemplates::from_corpus(&seed_corpus);

    // Pool variants, verbatim templates, and held-out completion variants.
    let mut pool_inputs: Vec<FileInput> = Vec::new();
    let mut problem_paths: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut heldout: Vec<(usize, String, Vec<Token>)> = Vec::new();
    for (problem, seed_tokens) in seed_programs.iter().enumerate() {
        let seed_tree = parse(seed_tokens).map_err(|e| BenchError::GenerationFailed {
            problem,
            message: format!("{e}"),
        })?;
        let make = |index: usize, need_split: bool| -> Result<Vec<Token>, BenchError> {
            let mut rng = seeds::derive(
                config.seed,
                seeds::STAGE_BENCH_VARIANTS,
                (problem as u64) << 16 | index as u64,
            );
            for _ in 0..32 {
                let variant = make_variant(&seed_tree, config, &model, &templates, &mut rng)
                    .map_err(|message| BenchError::GenerationFailed { problem, message })?;
                if transforms_enabled && variant.tokens == *seed_tokens {
                    continue;
                }
                if need_split && !has_line_break_after(&variant.tokens, config.fragment_length + 2)
                {
                    continue;
                }
                return Ok(variant.tokens);
            }
            Err(BenchError::GenerationFailed {
                problem,
                message: "variant generation kept colliding".to_string(),
            })
        };

        for v in 0..config.variants_per_problem {
            let tokens = make(v, false)?;
            let path = format!("p{problem:04}_v{v}.mini");
            pool_inputs.push(FileInput { path: path.clone(), text: render_tokens(&tokens) });
            problem_paths.entry(problem).or_default().push(path);
        }

        let completion_tokens = make(config.variants_per_problem, true)?;
        let template_path = format!("p{problem:04}_tmpl.mini");
        pool_inputs.push(FileInput {
            path: template_path.clone(),
            text: render_tokens(&completion_tokens),
        });
        problem_paths.entry(problem).or_default().push(template_path);
        heldout.push((problem, format!("p{problem:04}_heldout.mini"), completion_tokens));
    }

    let pool = build_corpus(pool_inputs, Language::Mini, config.fragment_length)
        .map_err(|e| BenchError::GenerationFailed { problem: 0, message: format!("{e}") })?
        .0;
    let problems: BTreeMap<usize, Vec<FileId>> = problem_paths
        .into_iter()
        .map(|(problem, paths)| {
            let ids = paths
                .iter()
                .map(|p| pool.file_by_path(p).expect("pool path exists").id)
                .collect();
            (problem, ids)
        })
        .collect();

    // Clone queries: one truncation per pool variant (templates are
    // retrieval targets, not query sources).
    let mut queries = Vec::new();
    for (problem, files) in &problems {
        for (v, &file) in files.iter().enumerate().take(config.variants_per_problem) {
            let tokens = pool.file_tokens(file).expect("pool file tokens");
            let mut rng = seeds::derive(
                config.seed,
                seeds::STAGE_BENCH_QUERIES,
                (*problem as u64) << 16 | v as u64,
            );
            let frac = rng.gen_range(config.query_prefix.0..=config.query_prefix.1);
            let take = ((tokens.len() as f64 * frac) as usize).clamp(4, tokens.len() - 1);
            let prefix = tokens[..take].to_vec();
            let api = api_scan(&prefix);
            let dev = rng.gen_bool(config.dev_fraction);
            queries.push(CloneQuery { tokens: prefix, api, problem: *problem, source: file, dev });
        }
    }

    // Completion items from the held-out variants.
    let mut items = Vec::new();
    for (problem, path, tokens) in heldout {
        let split = split_point(&tokens, config.fragment_length + 2)
            .expect("held-out variant was validated splittable");
        let line_end = tokens[split..]
            .iter()
            .position(|t| t.kind == TokenKind::Newline)
            .map(|i| split + i + 1)
            .expect("gold line terminated");
        let gold_end = (split + config.gold_token_cap).min(tokens.len());
        items.push(CompletionItem {
            context: tokens[..split].to_vec(),
            gold_line: tokens[split..line_end].to_vec(),
            gold_tokens: tokens[split..gold_end].to_vec(),
            problem,
            source_path: path,
        });
    }

    let benchmark = CloneBenchmark { pool, problems, queries };
    debug_assert!(benchmark.queries.iter().all(|q| !benchmark.relevant(q).is_empty()));
    Ok((benchmark, CompletionSet { items }))
}
