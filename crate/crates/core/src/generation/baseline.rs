//! Rule-based generator used when no model adapter is configured.
//!
//! Query task: a trigger table decides whether the last USER turn seeks
//! knowledge; if so the query is the salient content of that turn (or the
//! skill keyword it hit), prefixed with the most recent temporal word in the
//! context. Response task: the knowledge sentence with the highest
//! character F1 against the query is narrowed to its most informative
//! clause and wrapped in a colloquial frame; with no knowledge a templated
//! chit-chat line is returned.

use super::{Completion, GenerationError, Generator, PromptSegments, Task};
use crate::gateway::calc::extract_expression;
use crate::gateway::calendar::temporal_word;
use crate::gateway::fixtures::tsv_rows;
use crate::gateway::IntentRules;
use crate::metrics::unigram_f1;
use crate::text::{char_count, contains_cjk, is_punct, split_sentences};
use crate::types::Role;
use crate::NO_REQUEST;

pub(crate) const BUILTIN_TRIGGERS: &str = include_str!("../../fixtures/triggers.tsv");

/// Queries longer than this fall back to `temporal + keyword`.
const MAX_QUERY_CHARS: usize = 10;

const ZH_STOP: &[&str] = &[
    "希望",
    "我们",
    "你们",
    "他们",
    "一下",
    "那个",
    "这个",
    "什么",
    "怎么样",
    "怎么",
    "请问",
    "可以",
    "能不能",
    "有没有",
    "帮我",
    "我",
    "你",
    "他",
    "她",
    "的",
    "了",
    "吗",
    "呢",
    "吧",
    "啊",
    "呀",
    "能",
    "有",
    "个",
    "是",
    "想",
    "要",
    "会",
    "就",
    "也",
    "都",
    "还",
    "和",
    "去",
    "在",
];

const EN_STOP: &[&str] = &[
    "i", "i'm", "im", "you", "we", "me", "my", "the", "a", "an", "for", "to", "of", "is", "are", "be", "it", "it's",
    "its", "what", "what's", "how", "about", "hope", "please", "can", "could", "would", "will", "do", "does", "there",
    "any", "some", "tell", "know", "want", "like", "let", "let's", "and", "so", "really", "good", "nice", "that",
    "this", "in", "on", "at", "be", "going", "go",
];

const ZH_CHITCHAT: &[&str] = &["是呀，我也这么觉得。", "听起来不错，跟我多说说吧。", "天气好，心情好。"];
const EN_CHITCHAT: &[&str] = &["Sounds good, tell me more.", "I feel the same way.", "That's nice to hear."];

#[derive(Debug, Clone)]
pub struct BaselineGenerator {
    farewell: Vec<String>,
    question: Vec<String>,
    rules: IntentRules,
}

impl Default for BaselineGenerator {
    fn default() -> Self {
        Self::new(BUILTIN_TRIGGERS, IntentRules::builtin())
    }
}

impl BaselineGenerator {
    /// `triggers` is a two-column table: class (`farewell` | `question`)
    /// and `|`-separated words.
    pub fn new(triggers: &str, rules: IntentRules) -> Self {
        let mut farewell = Vec::new();
        let mut question = Vec::new();
        for (_, cols) in tsv_rows(triggers) {
            let words = cols.get(1).map_or(Vec::new(), |w| {
                w.split('|').map(|s| s.to_lowercase()).filter(|s| !s.trim().is_empty()).collect()
            });
            match cols[0].trim() {
                "farewell" => farewell.extend(words),
                "question" => question.extend(words),
                _ => {}
            }
        }
        BaselineGenerator { farewell, question, rules }
    }

    /// The baseline's query for `segments`, or `None` for no request.
    pub fn build_query(&self, segments: &PromptSegments) -> Option<String> {
        let utterance = segments.last_user_text()?;
        let lower = utterance.to_lowercase();
        if let Some(expr) = extract_expression(utterance) {
            return Some(expr);
        }
        let mut hits: Vec<(usize, &str)> =
            self.rules.keywords().filter_map(|(_, w)| lower.find(w).map(|pos| (pos, w))).collect();
        hits.sort_by_key(|&(pos, w)| (pos, std::cmp::Reverse(w.len())));
        let asks = self.question.iter().any(|w| lower.contains(w.as_str()));
        if hits.is_empty() && !asks {
            return None;
        }
        if hits.is_empty() && self.farewell.iter().any(|w| lower.contains(w.as_str())) {
            return None;
        }
        let zh = contains_cjk(utterance);
        let temporal = if temporal_word(utterance).is_some() {
            None
        } else {
            segments.context.turns().iter().rev().find_map(|t| temporal_word(t.text()))
        };
        let salient = salient_content(utterance, zh);
        let body = if char_count(&salient) <= MAX_QUERY_CHARS || hits.is_empty() {
            truncate_chars(&salient, MAX_QUERY_CHARS)
        } else {
            hits[0].1.to_string()
        };
        let query = match temporal {
            Some(t) if zh => format!("{t}{body}"),
            Some(t) => format!("{t} {body}"),
            None => body,
        };
        let query = query.trim().to_string();
        (!query.is_empty() && query != NO_REQUEST).then_some(query)
    }

    pub fn build_response(&self, segments: &PromptSegments) -> String {
        let utterance = segments.last_user_text().unwrap_or("");
        let zh = contains_cjk(utterance) || segments.knowledge().is_some_and(contains_cjk) && utterance.is_empty();
        match segments.knowledge().filter(|k| !k.trim().is_empty()) {
            Some(k) => {
                let reference = self
                    .build_query(&PromptSegments::query(segments.state.clone(), segments.context.clone()))
                    .unwrap_or_else(|| utterance.to_string());
                let span = select_clause(select_span(k, &reference), &reference);
                if zh {
                    format!("帮你查了一下，{span}")
                } else {
                    format!("I looked it up: {span}")
                }
            }
            None => {
                let pool = if zh { ZH_CHITCHAT } else { EN_CHITCHAT };
                let bot_turns = segments.context.turns().iter().filter(|t| t.role() == Role::Bot).count();
                pool[bot_turns % pool.len()].to_string()
            }
        }
    }
}

/// Sentence of `knowledge` with maximum character F1 against `reference`;
/// ties go to the earliest sentence.
pub fn select_span<'a>(knowledge: &'a str, reference: &str) -> &'a str {
    let mut best: Option<(&str, f64)> = None;
    for s in split_sentences(knowledge) {
        let f = unigram_f1(s, reference);
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((s, f));
        }
    }
    best.map_or(knowledge, |(s, _)| s)
}

/// Clauses shorter than this take the following clause along.
const MIN_CLAUSE_CHARS: usize = 8;

/// Narrows `sentence` to one clause: the one with the most digits (figures
/// carry the facts), then the highest character F1 against `reference`,
/// then the earliest. A short clause keeps the next one for context.
pub fn select_clause<'a>(sentence: &'a str, reference: &str) -> &'a str {
    let mut bounds = Vec::new();
    let mut start = 0;
    for (i, c) in sentence.char_indices() {
        if matches!(c, '，' | ',' | '；' | ';') {
            bounds.push((start, i));
            start = i + c.len_utf8();
        }
    }
    bounds.push((start, sentence.len()));
    bounds.retain(|&(a, b)| !sentence[a..b].trim().is_empty());
    if bounds.len() <= 1 {
        return sentence.trim();
    }
    let key = |&(a, b): &(usize, usize)| {
        let clause = &sentence[a..b];
        (clause.chars().filter(char::is_ascii_digit).count(), unigram_f1(clause, reference))
    };
    let mut best = 0;
    for i in 1..bounds.len() {
        let (d, f) = key(&bounds[i]);
        let (bd, bf) = key(&bounds[best]);
        if d > bd || (d == bd && f > bf) {
            best = i;
        }
    }
    let (a, mut b) = bounds[best];
    if char_count(&sentence[a..b]) < MIN_CLAUSE_CHARS {
        if let Some(&(_, next_end)) = bounds.get(best + 1) {
            b = next_end;
        }
    }
    sentence[a..b].trim()
}

fn salient_content(utterance: &str, zh: bool) -> String {
    if zh {
        let mut s: String = utterance.chars().filter(|c| !is_punct(*c) && !c.is_whitespace()).collect();
        for w in ZH_STOP {
            s = s.replace(w, "");
        }
        s
    } else {
        utterance
            .split(|c: char| c.is_whitespace() || (is_punct(c) && c != '\''))
            .filter(|w| !w.is_empty() && !EN_STOP.contains(&w.to_lowercase().as_str()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn truncate_chars(s: &str, n: usize) -> String {
    let mut out = String::new();
    let mut count = 0;
    for c in s.chars() {
        if !c.is_whitespace() {
            count += 1;
        }
        if count > n {
            break;
        }
        out.push(c);
    }
    out.trim().to_string()
}

impl Generator for BaselineGenerator {
    fn complete(&self, segments: &PromptSegments, want_logprobs: bool) -> Result<Completion, GenerationError> {
        if want_logprobs {
            return Err(GenerationError::LogprobsUnsupported);
        }
        let text = match segments.task() {
            Task::Query => self.build_query(segments).unwrap_or_else(|| NO_REQUEST.to_string()),
            Task::Response => self.build_response(segments),
        };
        Ok(Completion { text, token_logprobs: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_time, DialogueContext, SpatiotemporalState, Turn};

    fn state() -> SpatiotemporalState {
        SpatiotemporalState::new(
            parse_time("2022-08-12T15:00+08:00").unwrap(),
            39.99,
            116.30,
            "Haidian district, Beijing",
        )
    }

    fn ctx(texts: &[&str]) -> DialogueContext {
        let mut c = DialogueContext::default();
        for (i, t) in texts.iter().enumerate() {
            let role = if i % 2 == 0 { Role::User } else { Role::Bot };
            c.push(Turn::new(role, *t, None).unwrap()).unwrap();
        }
        c
    }

    fn query(texts: &[&str]) -> Option<String> {
        BaselineGenerator::default().build_query(&PromptSegments::query(state(), ctx(texts)))
    }

    #[test]
    fn english_weekend_weather() {
        let q = query(&[
            "It's the weekend soon, I'm going to go on an outing with my friends.",
            "That's great, enjoy your vacation.",
            "Hope for good weather.",
        ]);
        assert_eq!(q.as_deref(), Some("weekend weather"));
    }

    #[test]
    fn chinese_weekend_weather() {
        let q =
            query(&["马上到周末了，我打算和朋友去郊游", "那很棒呀，好好享受假期时光。", "希望能有个好天气。"]).unwrap();
        assert!(q.contains("周末") && q.contains("天气"), "{q}");
        let n = char_count(&q);
        assert!((4..=10).contains(&n), "{q}");
    }

    #[test]
    fn farewell_is_no_request() {
        assert_eq!(query(&["thanks, bye"]), None);
        assert_eq!(query(&["好的谢谢，再见"]), None);
        assert_eq!(query(&["I love sunny days"]), None);
    }

    #[test]
    fn arithmetic_goes_straight_through() {
        assert_eq!(query(&["what is (2+3)*4?"]).as_deref(), Some("(2+3)*4"));
    }

    #[test]
    fn span_selection() {
        assert_eq!(select_span("只有一句话。", "x"), "只有一句话。");
        assert_eq!(select_span("北京多云。上海下雨。", "上海天气"), "上海下雨。");
        // tie goes to the first sentence
        assert_eq!(select_span("a. b.", "zz"), "a.");
    }

    #[test]
    fn clause_selection() {
        let k = "北京未来2天内，天气以多云为主，明天18度～26度，多云;后天16度～21度，小雨。";
        assert_eq!(select_clause(k, "weekend weather"), "明天18度～26度");
        assert_eq!(select_clause("颐和园很大，适合散步。", "散步"), "适合散步。");
        assert_eq!(select_clause("一句话", "x"), "一句话");
        assert_eq!(select_clause("短，再来一句长一点的话。", "x"), "短，再来一句长一点的话。");
    }

    #[test]
    fn response_with_and_without_knowledge() {
        let g = BaselineGenerator::default();
        let k = "北京未来2天内，天气以多云为主，明天18度～26度，多云;后天16度～21度，小雨。";
        let p = PromptSegments::response(state(), ctx(&["希望能有个好天气。"]), Some(k.into()));
        let r = g.build_response(&p);
        assert!(r.contains("18") && r.contains("26"), "{r}");
        let p = PromptSegments::response(state(), ctx(&["hello there"]), None);
        assert!(!g.build_response(&p).is_empty());
    }

    #[test]
    fn refuses_logprobs() {
        let p = PromptSegments::query(state(), ctx(&["x"]));
        assert!(matches!(BaselineGenerator::default().complete(&p, true), Err(GenerationError::LogprobsUnsupported)));
    }
}
