//! Quality-control rules for collected sessions.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::metrics::unigram_f1;
use crate::types::{Role, Session};

pub const DEFAULT_COPY_THRESHOLD: f64 = 0.8;

const BUILTIN_BANNED: &str = include_str!("../../fixtures/banned_openers.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    TooFewTurns { bot_turns: usize, required: usize },
    TooFewKnowledgeTurns { knowledge_turns: usize, required: usize },
    BannedOpener { phrase: String },
    KnowledgeCopy { turn: usize, f1: f64 },
    RoleViolation { turn: usize, reason: String },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::TooFewTurns { .. } => "too_few_turns",
            Violation::TooFewKnowledgeTurns { .. } => "too_few_knowledge_turns",
            Violation::BannedOpener { .. } => "banned_opener",
            Violation::KnowledgeCopy { .. } => "knowledge_copy",
            Violation::RoleViolation { .. } => "role_violation",
        }
    }
}

/// Greetings and farewells a session may not open with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BannedPhrases(Vec<String>);

impl Default for BannedPhrases {
    fn default() -> Self {
        Self::parse(BUILTIN_BANNED)
    }
}

impl BannedPhrases {
    /// One phrase per line; `#` comments and blank lines are ignored.
    pub fn parse(src: &str) -> Self {
        let mut v: Vec<String> = src
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        v.sort_by_key(|p| std::cmp::Reverse(p.chars().count()));
        BannedPhrases(v)
    }

    /// The banned phrase `text` opens with. ASCII phrases must end at a word
    /// boundary, so "hi" does not match "history".
    pub fn opener(&self, text: &str) -> Option<&str> {
        let t = text.trim_start().to_lowercase();
        self.0
            .iter()
            .find(|p| {
                t.strip_prefix(p.as_str()).is_some_and(|rest| {
                    !p.chars().last().is_some_and(|c| c.is_ascii_alphanumeric())
                        || !rest.chars().next().is_some_and(|c| c.is_ascii_alphanumeric())
                })
            })
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcConfig {
    pub copy_threshold: f64,
    pub min_bot_turns: usize,
    pub min_knowledge_turns: usize,
    pub banned: BannedPhrases,
}

impl Default for QcConfig {
    fn default() -> Self {
        QcConfig {
            copy_threshold: DEFAULT_COPY_THRESHOLD,
            min_bot_turns: 5,
            min_knowledge_turns: 2,
            banned: BannedPhrases::default(),
        }
    }
}

impl QcConfig {
    pub fn with_copy_threshold(mut self, t: f64) -> Self {
        self.copy_threshold = t;
        self
    }

    /// Character F1 of a reply against the knowledge it used, and whether
    /// that counts as copying.
    pub fn copy_check(&self, reply: &str, knowledge: &str) -> (f64, bool) {
        let f1 = unigram_f1(reply, knowledge);
        (f1, f1 >= self.copy_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub session_id: String,
    pub violations: Vec<Violation>,
}

impl QcReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn qc_check(session: &Session, cfg: &QcConfig) -> QcReport {
    let turns = session.context.turns();
    let mut violations = Vec::new();
    let bot_turns = turns.iter().filter(|t| t.role() == Role::Bot).count();
    if bot_turns < cfg.min_bot_turns {
        violations.push(Violation::TooFewTurns { bot_turns, required: cfg.min_bot_turns });
    }
    let knowledge_turns = turns.iter().filter(|t| t.used_knowledge().is_some()).count();
    if knowledge_turns < cfg.min_knowledge_turns {
        violations.push(Violation::TooFewKnowledgeTurns { knowledge_turns, required: cfg.min_knowledge_turns });
    }
    if let Some(first) = turns.first() {
        if first.role() != Role::User {
            violations.push(Violation::RoleViolation { turn: 0, reason: "session must open with a USER turn".into() });
        }
        if let Some(phrase) = cfg.banned.opener(first.text()) {
            violations.push(Violation::BannedOpener { phrase: phrase.to_string() });
        }
    }
    for (i, t) in turns.iter().enumerate() {
        if let Some(a) = t.used_knowledge() {
            let (f1, copied) = cfg.copy_check(t.text(), &a.knowledge.text);
            if copied {
                violations.push(Violation::KnowledgeCopy { turn: i, f1 });
            }
        }
    }
    if turns.last().is_some_and(|t| t.role() == Role::User) {
        violations.push(Violation::RoleViolation {
            turn: turns.len() - 1,
            reason: "USER turn left without a BOT reply".into(),
        });
    }
    QcReport { session_id: session.id.clone(), violations }
}

/// Reports for every session, in input order.
pub fn qc_all(sessions: &[Session], cfg: &QcConfig, exec: Execution) -> Vec<QcReport> {
    exec::map(sessions, exec, |s| qc_check(s, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banned_opener_matching() {
        let b = BannedPhrases::default();
        assert_eq!(b.opener("你好呀，最近怎么样"), Some("你好"));
        assert_eq!(b.opener("Hi, how are you"), Some("hi"));
        assert_eq!(b.opener("history is fun"), None);
        assert_eq!(b.opener("Good morning!"), Some("good morning"));
        assert_eq!(b.opener("马上到周末了"), None);
    }

    #[test]
    fn copy_check_threshold() {
        let cfg = QcConfig::default();
        assert_eq!(cfg.copy_check("明天多云", "明天多云"), (1.0, true));
        assert!(!cfg.copy_check("好的", "明天多云").1);
        assert!(!cfg.with_copy_threshold(1.01).copy_check("a", "a").1);
    }
}
