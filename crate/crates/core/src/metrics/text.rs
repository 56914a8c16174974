//! Character-level overlap and diversity metrics.

use std::collections::{HashMap, HashSet};

use crate::text::char_tokens;

fn counts(tokens: &[char]) -> HashMap<char, usize> {
    let mut m = HashMap::new();
    for &c in tokens {
        *m.entry(c).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset intersection of two token lists.
fn overlap(a: &[char], b: &[char]) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let large = counts(large);
    counts(small).into_iter().map(|(c, n)| n.min(large.get(&c).copied().unwrap_or(0))).sum()
}

/// Precision, recall and F1 of `pred` against `gold` over character
/// multisets. Both empty scores 1; exactly one empty scores 0.
pub fn unigram_prf(pred: &str, gold: &str) -> (f64, f64, f64) {
    let p = char_tokens(pred);
    let g = char_tokens(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let common = overlap(&p, &g) as f64;
    if common == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let precision = common / p.len() as f64;
    let recall = common / g.len() as f64;
    (precision, recall, 2.0 * common / (p.len() + g.len()) as f64)
}

pub fn unigram_f1(pred: &str, gold: &str) -> f64 {
    unigram_prf(pred, gold).2
}

/// Knowledge F1: how much of the response is drawn from the knowledge.
pub fn kf1(response: &str, knowledge: &str) -> f64 {
    unigram_f1(response, knowledge)
}

/// Sentence-level BLEU-1: clipped unigram precision times the brevity
/// penalty `min(1, exp(1 - |ref|/|pred|))`. Empty prediction scores 0.
pub fn bleu1(pred: &str, reference: &str) -> f64 {
    let p = char_tokens(pred);
    if p.is_empty() {
        return 0.0;
    }
    let r = char_tokens(reference);
    let clipped = overlap(&p, &r) as f64;
    let precision = clipped / p.len() as f64;
    let bp = if p.len() >= r.len() { 1.0 } else { (1.0 - r.len() as f64 / p.len() as f64).exp() };
    precision * bp
}

/// Distinct character bigrams over total bigrams, pooled across all
/// responses; 0 when there are no bigrams.
pub fn distinct2<S: AsRef<str>>(responses: &[S]) -> f64 {
    let mut total = 0usize;
    let mut seen: HashSet<(char, char)> = HashSet::new();
    for r in responses {
        let toks = char_tokens(r.as_ref());
        for w in toks.windows(2) {
            total += 1;
            seen.insert((w[0], w[1]));
        }
    }
    if total == 0 {
        0.0
    } else {
        seen.len() as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn f1_examples() {
        assert_eq!(unigram_f1("北京天气", "北京天气"), 1.0);
        assert_eq!(unigram_f1("abc", "xyz"), 0.0);
        assert!((unigram_f1("abc", "abd") - 2.0 / 3.0).abs() < EPS);
        assert!((unigram_f1("北京天气", "周末天气") - 0.5).abs() < EPS);
        assert_eq!(unigram_f1("", ""), 1.0);
        assert_eq!(unigram_f1("", "a"), 0.0);
        assert_eq!(unigram_f1("a", ""), 0.0);
    }

    #[test]
    fn kf1_examples() {
        assert_eq!(kf1("明天18度多云", "明天18度多云"), 1.0);
        assert_eq!(kf1("好", "明天多云"), 0.0);
        assert!((kf1("明天多云", "明天18度多云") - 8.0 / 11.0).abs() < EPS);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu1("abc", "abc"), 1.0);
        assert!((bleu1("aabb", "ab") - 0.5).abs() < EPS);
        assert!((bleu1("a", "ab") - (-1.0f64).exp()).abs() < EPS);
        assert_eq!(bleu1("", "ab"), 0.0);
    }

    #[test]
    fn distinct_examples() {
        assert!((distinct2(&["abab"]) - 2.0 / 3.0).abs() < EPS);
        assert_eq!(distinct2(&["ab"]), 1.0);
        assert_eq!(distinct2(&["aa", "aa"]), 0.5);
        assert_eq!(distinct2::<&str>(&[]), 0.0);
        assert_eq!(distinct2(&["a", "b"]), 0.0);
    }

    #[test]
    fn prf_components() {
        let (p, r, _) = unigram_prf("明天多云", "明天18度多云");
        assert_eq!(p, 1.0);
        assert!((r - 4.0 / 7.0).abs() < EPS);
    }
}
