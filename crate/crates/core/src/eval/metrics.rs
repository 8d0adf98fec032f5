//! Ranking and completion metrics.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{exp, ln};
use crate::token::Token;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    NoRelevantItems,
    NoQueries,
    EmptyLogProbs,
    NonFiniteLogProb { index: usize },
    InvalidK,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NoRelevantItems => write!(f, "query without relevant items"),
            EvalError::NoQueries => write!(f, "no queries to aggregate"),
            EvalError::EmptyLogProbs => write!(f, "perplexity needs at least one log-probability"),
            EvalError::NonFiniteLogProb { index } => {
                write!(f, "non-finite log-probability at index {index}")
            }
            EvalError::InvalidK => write!(f, "K must be at least 1"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Average precision truncated at rank K:
/// `sum over relevant hits at rank r <= K of precision@r, divided by
/// min(|relevant|, K)`. Zero when nothing relevant ranks in the top K.
pub fn average_precision_at_k<T: Ord>(
    ranked: &[T],
    relevant: &BTreeSet<T>,
    k: usize,
) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if relevant.is_empty() {
        return Err(EvalError::NoRelevantItems);
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (i, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            precision_sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(precision_sum / relevant.len().min(k) as f64)
}

/// Arithmetic mean of per-query average precisions.
pub fn map_at_k(average_precisions: &[f64]) -> Result<f64, EvalError> {
    if average_precisions.is_empty() {
        return Err(EvalError::NoQueries);
    }
    Ok(average_precisions.iter().sum::<f64>() / average_precisions.len() as f64)
}

/// Fraction of queries whose rank-1 result is relevant.
pub fn precision_at_1(rank_one_relevant: &[bool]) -> Result<f64, EvalError> {
    if rank_one_relevant.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let hits = rank_one_relevant.iter().filter(|&&h| h).count();
    Ok(hits as f64 / rank_one_relevant.len() as f64)
}

/// 1 iff the token sequences are identical after stripping trailing
/// whitespace tokens (newlines and indent markers).
pub fn exact_match(pred: &[Token], gold: &[Token]) -> u8 {
    let strip = |tokens: &[Token]| -> usize {
        let mut end = tokens.len();
        while end > 0 && tokens[end - 1].kind.is_whitespace() {
            end -= 1;
        }
        end
    };
    let (pe, ge) = (strip(pred), strip(gold));
    u8::from(pred[..pe] == gold[..ge])
}

/// Character-level Levenshtein distance, two-row dynamic program.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = alloc::vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            current[j + 1] = substitute.min(prev[j + 1] + 1).min(current[j] + 1);
        }
        core::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// `100 * (1 - levenshtein(pred, gold) / max(|pred|, |gold|))`; 100 for
/// two empty strings.
pub fn edit_similarity(pred: &str, gold: &str) -> f64 {
    let a: Vec<char> = pred.chars().collect();
    let b: Vec<char> = gold.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(&a, &b) as f64 / longest as f64)
}

/// `exp(-mean(log_probs))` with natural-log inputs. Smoothing upstream
/// must keep every log-probability finite.
pub fn perplexity(log_probs: &[f64]) -> Result<f64, EvalError> {
    if log_probs.is_empty() {
        return Err(EvalError::EmptyLogProbs);
    }
    for (index, lp) in log_probs.iter().enumerate() {
        if !lp.is_finite() {
            return Err(EvalError::NonFiniteLogProb { index });
        }
    }
    let mean = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
    Ok(exp(-mean))
}

/// Natural log helper shared by perplexity callers.
pub fn log_prob(p: f64) -> f64 {
    ln(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::TokenKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(items: &[u32]) -> BTreeSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn ap_hand_enumerated() {
        // Relevant at ranks 1 and 3, |relevant| = 2, K = 5:
        // (1/1 + 2/3) / 2 = 0.8333...
        let ranked = [10u32, 11, 12, 13, 14];
        let ap = average_precision_at_k(&ranked, &set(&[10, 12]), 5).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_single() {
        let ap = average_precision_at_k(&[7u32, 8, 9], &set(&[7]), 5).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_zero_when_no_relevant_in_top_k() {
        let ap = average_precision_at_k(&[1u32, 2, 3], &set(&[99]), 3).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn ap_empty_relevant_is_error() {
        assert_eq!(
            average_precision_at_k(&[1u32], &BTreeSet::new(), 3).unwrap_err(),
            EvalError::NoRelevantItems
        );
    }

    #[test]
    fn ap_truncates_at_k() {
        // Relevant item at rank 4 must not count for K = 3.
        let ranked = [1u32, 2, 3, 4];
        let ap = average_precision_at_k(&ranked, &set(&[4]), 3).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn map_means_aps() {
        assert_eq!(map_at_k(&[1.0, 0.0]).unwrap(), 0.5);
        assert!(map_at_k(&[]).is_err());
    }

    #[test]
    fn p1_counts_rank_one_hits() {
        assert_eq!(precision_at_1(&[true, true, true]).unwrap(), 1.0);
        assert_eq!(precision_at_1(&[true, false]).unwrap(), 0.5);
    }

    fn line(texts: &[&str]) -> Vec<Token> {
        texts
            .iter()
            .map(|t| {
                let kind = crate::lex::classify_text(t);
                Token::new(*t, kind)
            })
            .collect()
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match(&line(&["x", "=", "1"]), &line(&["x", "=", "1"])), 1);
        assert_eq!(exact_match(&line(&["x", "=", "1"]), &line(&["x", "=", "2"])), 0);
        assert_eq!(exact_match(&[], &[]), 1);
    }

    #[test]
    fn exact_match_ignores_trailing_whitespace_tokens() {
        let mut pred = line(&["x", "=", "1"]);
        pred.push(Token::newline());
        let gold = line(&["x", "=", "1"]);
        assert_eq!(exact_match(&pred, &gold), 1);
        // Leading indent markers are significant.
        let mut indented = alloc::vec![Token::indent()];
        indented.extend(line(&["x", "=", "1"]));
        assert_eq!(exact_match(&indented, &gold), 0);
        assert_eq!(pred.last().unwrap().kind, TokenKind::Newline);
    }

    #[test]
    fn edit_similarity_examples() {
        assert!((edit_similarity("abcd", "abcf") - 75.0).abs() < 1e-12);
        assert_eq!(edit_similarity("same", "same"), 100.0);
        assert_eq!(edit_similarity("", "abc"), 0.0);
        assert_eq!(edit_similarity("", ""), 100.0);
    }

    /// Full-matrix Levenshtein oracle, independent of the two-row
    /// implementation.
    fn oracle_levenshtein(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = alloc::vec![alloc::vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            dp[i][0] = i;
        }
        for j in 0..=b.len() {
            dp[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                dp[i][j] = (dp[i - 1][j - 1] + cost).min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
            }
        }
        dp[a.len()][b.len()]
    }

    #[test]
    fn edit_similarity_matches_full_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let len_a = rng.gen_range(0..12);
            let len_b = rng.gen_range(0..12);
            let a: alloc::string::String =
                (0..len_a).map(|_| (b'a' + rng.gen_range(0..4u8)) as char).collect();
            let b: alloc::string::String =
                (0..len_b).map(|_| (b'a' + rng.gen_range(0..4u8)) as char).collect();
            let longest = len_a.max(len_b).max(1) as f64;
            let want = 100.0 * (1.0 - oracle_levenshtein(&a, &b) as f64 / longest);
            let got = edit_similarity(&a, &b);
            if len_a == 0 && len_b == 0 {
                assert_eq!(got, 100.0);
            } else {
                assert!((got - want).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn perplexity_uniform_and_certain() {
        let uniform = alloc::vec![ln(1.0 / 100.0); 32];
        assert!((perplexity(&uniform).unwrap() - 100.0).abs() < 1e-9);
        let certain = alloc::vec![0.0; 8];
        assert_eq!(perplexity(&certain).unwrap(), 1.0);
    }

    #[test]
    fn perplexity_matches_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let n = rng.gen_range(1..20);
            let lps: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.0..5.0f64)).collect();
            let want = exp(-(lps.iter().sum::<f64>() / lps.len() as f64));
            assert!((perplexity(&lps).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn perplexity_rejects_bad_inputs() {
        assert_eq!(perplexity(&[]).unwrap_err(), EvalError::EmptyLogProbs);
        assert_eq!(
            perplexity(&[0.0, f64::NEG_INFINITY]).unwrap_err(),
            EvalError::NonFiniteLogProb { index: 1 }
        );
    }
}
