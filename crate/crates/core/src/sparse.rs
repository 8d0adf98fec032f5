//! BM25 term-based retrieval over fragments.
//!
//! The analyzer splits identifiers into lowercased subtokens on
//! underscores and camelCase boundaries, keeps keywords (lowercased)
//! and literals whole, and drops operators, punctuation, newlines, and
//! indent markers. Document length normalization uses the fragment's
//! raw token count, not its term count.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, CorpusError, FragmentId};
use crate::math::ln;
use crate::token::{Token, TokenKind};
use crate::ScoredHit;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Splits an identifier into lowercased subtokens on `_` and camelCase
/// boundaries. Acronym runs split before their last capital when a
/// lowercase letter follows (`parseHTTPResponse` -> parse, http,
/// response). Digit runs stay attached to the preceding subtoken.
pub fn split_subtokens(identifier: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for chunk in identifier.split('_') {
        if chunk.is_empty() {
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let boundary = (chars[i].is_ascii_uppercase() && !chars[i - 1].is_ascii_uppercase())
                || (chars[i].is_ascii_uppercase()
                    && i + 1 < chars.len()
                    && chars[i + 1].is_ascii_lowercase());
            if boundary {
                parts.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        parts.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    parts
}

/// Analyzer: token stream to BM25 terms, in order, duplicates kept.
pub fn extract_terms(tokens: &[Token]) -> Vec<String> {
    let mut terms = Vec::new();
    for token in tokens {
        match token.kind {
            TokenKind::Identifier => terms.extend(split_subtokens(&token.text)),
            TokenKind::Keyword => terms.push(token.text.to_lowercase()),
            TokenKind::Literal => terms.push(token.text.clone()),
            _ => {}
        }
    }
    terms
}

/// Okapi BM25 inverted index over corpus fragments.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bm25Index {
    /// term -> (fragment id, term frequency), ascending by fragment id.
    pub postings: BTreeMap<String, Vec<(FragmentId, u32)>>,
    /// Raw token count per fragment, indexed by fragment id.
    pub doc_len: Vec<u32>,
    pub avg_len: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Index {
    pub fn doc_count(&self) -> usize {
        self.doc_len.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map(|p| p.len()).unwrap_or(0)
    }

    /// IDF with the +1 inside the log; clamped at zero.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.document_frequency(term) as f64;
        let value = ln(1.0 + (n - df + 0.5) / (df + 0.5));
        if value > 0.0 {
            value
        } else {
            0.0
        }
    }

    fn term_frequency(&self, term: &str, fragment: FragmentId) -> u32 {
        self.postings
            .get(term)
            .and_then(|postings| {
                postings
                    .binary_search_by_key(&fragment, |&(id, _)| id)
                    .ok()
                    .map(|i| postings[i].1)
            })
            .unwrap_or(0)
    }
}

pub fn build_bm25(corpus: &Corpus) -> Bm25Index {
    build_bm25_with(corpus, DEFAULT_K1, DEFAULT_B)
}

pub fn build_bm25_with(corpus: &Corpus, k1: f64, b: f64) -> Bm25Index {
    let mut postings: BTreeMap<String, Vec<(FragmentId, u32)>> = BTreeMap::new();
    let mut doc_len = Vec::with_capacity(corpus.fragments().len());
    for fragment in corpus.fragments() {
        doc_len.push(fragment.tokens.len() as u32);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for term in extract_terms(&fragment.tokens) {
            *counts.entry(term).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push((fragment.id, tf));
        }
    }
    let avg_len = if doc_len.is_empty() {
        0.0
    } else {
        doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
    };
    Bm25Index { postings, doc_len, avg_len, k1, b }
}

/// Okapi score of one fragment for the given query terms. Repeated
/// query terms contribute once per occurrence.
pub fn bm25_score(
    index: &Bm25Index,
    query_terms: &[String],
    fragment: FragmentId,
) -> Result<f64, CorpusError> {
    if fragment.index() >= index.doc_len.len() {
        return Err(CorpusError::UnknownFragment { id: fragment });
    }
    let len = index.doc_len[fragment.index()] as f64;
    let mut score = 0.0;
    for term in query_terms {
        let tf = index.term_frequency(term, fragment) as f64;
        if tf == 0.0 {
            continue;
        }
        let norm = tf * (index.k1 + 1.0)
            / (tf + index.k1 * (1.0 - index.b + index.b * len / index.avg_len));
        score += index.idf(term) * norm;
    }
    Ok(score)
}

/// The `k` highest-scoring fragments, descending, ties broken by
/// ascending fragment id. Fragments sharing no query term score zero
/// and fill the tail when `k` exceeds the number of matches.
pub fn bm25_topk(index: &Bm25Index, query_terms: &[String], k: usize) -> Vec<ScoredHit> {
    let mut scores: BTreeMap<FragmentId, f64> = BTreeMap::new();
    let mut seen: BTreeMap<&str, u32> = BTreeMap::new();
    for term in query_terms {
        *seen.entry(term.as_str()).or_insert(0) += 1;
    }
    for (term, qtf) in seen {
        let idf = index.idf(term);
        if let Some(postings) = index.postings.get(term) {
            for &(fragment, tf) in postings {
                let len = index.doc_len[fragment.index()] as f64;
                let tf = tf as f64;
                let norm = tf * (index.k1 + 1.0)
                    / (tf + index.k1 * (1.0 - index.b + index.b * len / index.avg_len));
                *scores.entry(fragment).or_insert(0.0) += qtf as f64 * idf * norm;
            }
        }
    }
    let mut hits: Vec<ScoredHit> =
        scores.into_iter().map(|(fragment, score)| ScoredHit { fragment, score }).collect();
    hits.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap().then(a.fragment.cmp(&b.fragment))
    });
    if hits.len() < k {
        // Zero-score fragments by ascending id fill the remainder.
        let mut matched = alloc::vec![false; index.doc_len.len()];
        for hit in &hits {
            matched[hit.fragment.index()] = true;
        }
        for i in 0..index.doc_len.len() {
            if hits.len() >= k {
                break;
            }
            if !matched[i] {
                hits.push(ScoredHit { fragment: FragmentId(i as u32), score: 0.0 });
            }
        }
    }
    hits.truncate(k);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, FileInput, Language};
    use crate::progen::{generate_program, ProgenConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent scalar Okapi oracle, written against the formula
    /// directly; recomputes df/tf/lengths by scanning fragments.
    fn oracle_score(corpus: &Corpus, query_terms: &[String], fragment: FragmentId, k1: f64, b: f64) -> f64 {
        let docs: Vec<Vec<String>> =
            corpus.fragments().iter().map(|f| extract_terms(&f.tokens)).collect();
        let n = docs.len() as f64;
        let lens: Vec<f64> = corpus.fragments().iter().map(|f| f.tokens.len() as f64).collect();
        let avg = lens.iter().sum::<f64>() / n;
        let doc = &docs[fragment.index()];
        let mut score = 0.0;
        for term in query_terms {
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln().max(0.0);
            score += idf * tf * (k1 + 1.0)
                / (tf + k1 * (1.0 - b + b * lens[fragment.index()] / avg));
        }
        score
    }

    fn corpus_from(texts: &[&str], fragment_length: usize) -> Corpus {
        let inputs: Vec<FileInput> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| FileInput { path: alloc::format!("f{i:03}.mini"), text: (*text).into() })
            .collect();
        build_corpus(inputs, Language::Mini, fragment_length).unwrap().0
    }

    #[test]
    fn subtoken_splitting() {
        assert_eq!(split_subtokens("foo_bar"), ["foo", "bar"]);
        assert_eq!(split_subtokens("fooBarBaz"), ["foo", "bar", "baz"]);
        assert_eq!(split_subtokens("parseHTTPResponse"), ["parse", "http", "response"]);
        assert_eq!(split_subtokens("x"), ["x"]);
        assert_eq!(split_subtokens("__init__"), ["init"]);
        assert_eq!(split_subtokens("v2"), ["v2"]);
    }

    #[test]
    fn document_frequency_counts_fragments() {
        let corpus = corpus_from(
            &["alpha = 1\nkeep = 2\n", "alpha = 3\nother = 4\n", "beta = 5\nmore = 6\n"],
            8,
        );
        assert_eq!(corpus.fragments().len(), 3);
        let index = build_bm25(&corpus);
        assert_eq!(index.document_frequency("alpha"), 2);
        assert_eq!(index.document_frequency("beta"), 1);
    }

    #[test]
    fn average_length_is_mean_of_doc_lengths() {
        let index = Bm25Index {
            postings: BTreeMap::new(),
            doc_len: alloc::vec![128, 128, 44],
            avg_len: (128.0 + 128.0 + 44.0) / 3.0,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        };
        assert!((index.avg_len - 100.0).abs() < 1e-12);
    }

    #[test]
    fn built_avg_len_matches_fragments() {
        let corpus = corpus_from(&["x = 1\ny = 2\nz = 3\n"], 8);
        let index = build_bm25(&corpus);
        let expected: f64 = corpus.fragments().iter().map(|f| f.tokens.len() as f64).sum::<f64>()
            / corpus.fragments().len() as f64;
        assert_eq!(index.avg_len, expected);
    }

    #[test]
    fn index_terms_equal_union_of_fragment_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let config = ProgenConfig::default();
        let texts: Vec<String> = (0..10).map(|_| generate_program(&mut rng, &config)).collect();
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let corpus = corpus_from(&refs, 16);
        let index = build_bm25(&corpus);
        let mut union: alloc::collections::BTreeSet<String> = Default::default();
        for fragment in corpus.fragments() {
            union.extend(extract_terms(&fragment.tokens));
        }
        let indexed: alloc::collections::BTreeSet<String> =
            index.postings.keys().cloned().collect();
        assert_eq!(indexed, union);
    }

    #[test]
    fn no_overlap_scores_zero() {
        let corpus = corpus_from(&["x = 1\ny = 2\n"], 8);
        let index = build_bm25(&corpus);
        let query = alloc::vec!["missing".to_string()];
        assert_eq!(bm25_score(&index, &query, FragmentId(0)).unwrap(), 0.0);
    }

    #[test]
    fn unknown_fragment_is_lookup_error() {
        let corpus = corpus_from(&["x = 1\n"], 8);
        let index = build_bm25(&corpus);
        assert!(bm25_score(&index, &[], FragmentId(9)).is_err());
    }

    #[test]
    fn single_doc_score_matches_oracle() {
        let corpus = corpus_from(&["total = count + 1\nprint(total)\n"], 16);
        let index = build_bm25(&corpus);
        let query = extract_terms(&corpus.fragments()[0].tokens);
        let got = bm25_score(&index, &query, FragmentId(0)).unwrap();
        let want = oracle_score(&corpus, &query, FragmentId(0), DEFAULT_K1, DEFAULT_B);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        assert!(got > 0.0);
    }

    #[test]
    fn score_is_monotone_in_tf() {
        // Three docs with increasing counts of the same term keep the
        // same df and length; score must be non-decreasing in tf.
        let corpus = corpus_from(&[
            "alpha = 1\nx = 2\nx = 3\nx = 4\n",
            "alpha = 1\nalpha = 2\nx = 3\nx = 4\n",
            "alpha = 1\nalpha = 2\nalpha = 3\nx = 4\n",
        ], 16);
        let index = build_bm25(&corpus);
        let query = alloc::vec!["alpha".to_string()];
        let s: Vec<f64> = (0..3)
            .map(|i| bm25_score(&index, &query, FragmentId(i)).unwrap())
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
    }

    #[test]
    fn topk_agrees_with_brute_force_on_random_corpora() {
        let config = ProgenConfig { min_tokens: 24, max_tokens: 80, max_depth: 2 };
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let texts: Vec<String> = (0..12).map(|_| generate_program(&mut rng, &config)).collect();
            let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
            let corpus = corpus_from(&refs, 16);
            let index = build_bm25(&corpus);
            let query = extract_terms(&corpus.fragments()[3].tokens);

            let mut brute: Vec<ScoredHit> = corpus
                .fragments()
                .iter()
                .map(|f| ScoredHit {
                    fragment: f.id,
                    score: oracle_score(&corpus, &query, f.id, DEFAULT_K1, DEFAULT_B),
                })
                .collect();
            brute.sort_by(|a, b| {
                b.score.partial_cmp(&a.score).unwrap().then(a.fragment.cmp(&b.fragment))
            });

            for k in [1, 5, corpus.fragments().len() + 10] {
                let hits = bm25_topk(&index, &query, k);
                assert_eq!(hits.len(), k.min(corpus.fragments().len()));
                for (hit, want) in hits.iter().zip(&brute) {
                    assert_eq!(hit.fragment, want.fragment);
                    assert!((hit.score - want.score).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn exact_duplicate_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let config = ProgenConfig::default();
        let mut texts: Vec<String> = (0..10).map(|_| generate_program(&mut rng, &config)).collect();
        let dup = texts[4].clone();
        texts.push(dup);
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let corpus = corpus_from(&refs, 128);
        let index = build_bm25(&corpus);
        // Query with the tokens of file 4's first fragment; both copies
        // tie, the lower fragment id wins.
        let frag = corpus.fragments_of_file(crate::FileId(4)).next().unwrap();
        let query = extract_terms(&frag.tokens);
        let hits = bm25_topk(&index, &query, 1);
        assert_eq!(hits[0].fragment, frag.id);
    }

    #[test]
    fn k_larger_than_corpus_returns_everything() {
        let corpus = corpus_from(&["x = 1\n", "y = 2\n"], 8);
        let index = build_bm25(&corpus);
        let hits = bm25_topk(&index, &["x".to_string()], 10);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].fragment, FragmentId(0));
        assert!(hits[0].score > 0.0);
        assert_eq!(hits[1].score, 0.0);
    }

    #[test]
    fn rebuild_preserves_existing_tf() {
        let corpus_small = corpus_from(&["alpha = 1\n"], 8);
        let corpus_big = corpus_from(&["alpha = 1\n", "alpha = 2\nalpha = 3\n"], 8);
        let small = build_bm25(&corpus_small);
        let big = build_bm25(&corpus_big);
        let tf_small = small.term_frequency("alpha", FragmentId(0));
        let tf_big = big.term_frequency("alpha", FragmentId(0));
        assert_eq!(tf_small, tf_big);
        assert_ne!(small.document_frequency("alpha"), big.document_frequency("alpha"));
    }
}
