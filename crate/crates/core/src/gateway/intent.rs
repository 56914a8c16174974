//! Keyword-table intent routing.

use std::str::FromStr;

use super::calc::looks_like_expression;
use super::fixtures::{tsv_rows, FixtureError};
use crate::types::SkillId;

pub(crate) const BUILTIN_RULES: &str = include_str!("../../fixtures/intent_rules.tsv");

/// Ordered keyword table. The calculator is tried first (the query must parse
/// as an expression); then rows in file order; then search.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentRules {
    rows: Vec<(SkillId, Vec<String>)>,
}

impl IntentRules {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_RULES).expect("builtin intent rules are well-formed")
    }

    pub fn parse(src: &str) -> Result<Self, FixtureError> {
        let mut rows = Vec::new();
        for (line, cols) in tsv_rows(src) {
            let bad = |reason: String| FixtureError::Malformed { file: "intent_rules.tsv".into(), line, reason };
            if cols.len() != 2 {
                return Err(bad(format!("expected 2 columns, found {}", cols.len())));
            }
            let skill = SkillId::from_str(cols[0].trim()).map_err(bad)?;
            if matches!(skill, SkillId::Calculator | SkillId::Search) {
                return Err(bad(format!("{skill} is routed implicitly")));
            }
            let words: Vec<String> =
                cols[1].split('|').map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
            rows.push((skill, words));
        }
        Ok(IntentRules { rows })
    }

    pub fn classify(&self, query: &str) -> SkillId {
        if looks_like_expression(query) {
            return SkillId::Calculator;
        }
        let q = query.to_lowercase();
        self.rows
            .iter()
            .find(|(_, words)| words.iter().any(|w| q.contains(w.as_str())))
            .map_or(SkillId::Search, |(skill, _)| *skill)
    }

    /// Every keyword of every row, with its skill.
    pub fn keywords(&self) -> impl Iterator<Item = (SkillId, &str)> {
        self.rows.iter().flat_map(|(s, ws)| ws.iter().map(move |w| (*s, w.as_str())))
    }
}
