//! Lexical top-k passage retrieval: BM25 over character bigrams.
//!
//! IDF uses the `ln(1 + (N - df + 0.5) / (df + 0.5))` form so every score is
//! non-negative. Each distinct query bigram contributes once. Results are
//! ordered by descending score, then ascending doc id.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::text::char_tokens;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPassage {
    pub doc_id: String,
    pub text: String,
    pub score: f64,
}

/// Character bigrams of `text` after whitespace removal. A one-character
/// text yields that character as its only term.
pub fn bigrams(text: &str) -> Vec<String> {
    let toks = char_tokens(text);
    match toks.len() {
        0 => Vec::new(),
        1 => vec![toks[0].to_string()],
        _ => toks.windows(2).map(|w| w.iter().collect()).collect(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bm25Index {
    passages: Vec<Passage>,
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<usize>,
    doc_freq: HashMap<String, u32>,
    avg_len: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn new(passages: Vec<Passage>) -> Self {
        Self::with_params(passages, Bm25Params::default())
    }

    pub fn with_params(passages: Vec<Passage>, params: Bm25Params) -> Self {
        let mut term_freqs = Vec::with_capacity(passages.len());
        let mut doc_lens = Vec::with_capacity(passages.len());
        let mut doc_freq: HashMap<String, u32> = HashMap::new();
        for p in &passages {
            let terms = bigrams(&p.text);
            doc_lens.push(terms.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            term_freqs.push(tf);
        }
        let avg_len =
            if passages.is_empty() { 0.0 } else { doc_lens.iter().sum::<usize>() as f64 / passages.len() as f64 };
        Bm25Index { passages, term_freqs, doc_lens, doc_freq, avg_len, params }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.passages.len() as f64;
        let df = f64::from(self.doc_freq.get(term).copied().unwrap_or(0));
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn score_doc(&self, doc: usize, query_terms: &[(String, f64)]) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let len_norm = if self.avg_len > 0.0 { self.doc_lens[doc] as f64 / self.avg_len } else { 0.0 };
        let tf = &self.term_freqs[doc];
        query_terms
            .iter()
            .map(|(t, idf)| {
                let f = f64::from(tf.get(t).copied().unwrap_or(0));
                if f == 0.0 {
                    0.0
                } else {
                    idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len_norm))
                }
            })
            .sum()
    }

    /// Top `k` passages for `query`; returns `min(k, len)` results.
    pub fn search(&self, query: &str, k: usize, exec: Execution) -> Vec<RankedPassage> {
        let mut terms = bigrams(query);
        terms.sort();
        terms.dedup();
        let weighted: Vec<(String, f64)> = terms
            .into_iter()
            .map(|t| {
                let idf = self.idf(&t);
                (t, idf)
            })
            .collect();
        let docs: Vec<usize> = (0..self.passages.len()).collect();
        let scores = exec::map(&docs, exec, |&d| self.score_doc(d, &weighted));
        let mut order: Vec<usize> = docs;
        let cmp = |a: &usize, b: &usize| {
            scores[*b]
                .partial_cmp(&scores[*a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.passages[*a].id.cmp(&self.passages[*b].id))
        };
        let k = k.min(order.len());
        if k < order.len() && k > 0 {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_by(cmp);
        order.truncate(k);
        order
            .into_iter()
            .map(|d| RankedPassage {
                doc_id: self.passages[d].id.clone(),
                text: self.passages[d].text.clone(),
                score: scores[d],
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(texts: &[&str]) -> Bm25Index {
        Bm25Index::new(
            texts.iter().enumerate().map(|(i, t)| Passage { id: format!("d{i:02}"), text: t.to_string() }).collect(),
        )
    }

    #[test]
    fn self_retrieval() {
        let idx = corpus(&["北京明天多云", "上海今天小雨", "广州后天晴朗"]);
        let top = idx.search("上海今天小雨", 1, Execution::Sequential);
        assert_eq!(top[0].doc_id, "d01");
    }

    #[test]
    fn k_larger_than_corpus() {
        let idx = corpus(&["abc", "bcd", "xyz"]);
        let all = idx.search("bc", 10, Execution::Sequential);
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].score >= w[1].score));
        // zero-score tail is ordered by id
        assert_eq!(all[2].doc_id, "d02");
    }

    #[test]
    fn ties_break_by_id() {
        let idx = Bm25Index::new(vec![
            Passage { id: "b".into(), text: "same text".into() },
            Passage { id: "a".into(), text: "same text".into() },
        ]);
        let r = idx.search("same", 2, Execution::Parallel);
        assert_eq!(r[0].doc_id, "a");
        assert_eq!(r[0].score, r[1].score);
    }

    #[test]
    fn bigram_edge_cases() {
        assert!(bigrams("").is_empty());
        assert_eq!(bigrams("北"), vec!["北"]);
        assert_eq!(bigrams("a b c"), vec!["ab", "bc"]);
    }
}
