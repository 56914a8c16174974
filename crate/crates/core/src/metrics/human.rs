//! Aggregation of turn-level binary judgements and session-level scores.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Binary judgements for one BOT turn. `factually_incorrect` is lower-is-better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnScores {
    pub consistent: u8,
    pub knowledgeable: u8,
    pub factually_incorrect: u8,
    pub engaging: u8,
}

impl TurnScores {
    pub fn new(consistent: u8, knowledgeable: u8, factually_incorrect: u8, engaging: u8) -> Result<Self, MetricsError> {
        for v in [consistent, knowledgeable, factually_incorrect, engaging] {
            if v > 1 {
                return Err(MetricsError::OutOfRange(format!("turn score {v} is not binary")));
            }
        }
        Ok(TurnScores { consistent, knowledgeable, factually_incorrect, engaging })
    }
}

/// One judged session: per-turn scores plus an overall 0–5 score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanEvalRecord {
    pub turns: Vec<TurnScores>,
    pub overall: u8,
}

impl HumanEvalRecord {
    pub fn new(turns: Vec<TurnScores>, overall: u8) -> Result<Self, MetricsError> {
        if overall > 5 {
            return Err(MetricsError::OutOfRange(format!("overall score {overall} outside 0..=5")));
        }
        Ok(HumanEvalRecord { turns, overall })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicClass {
    Chitchat,
    InDepth,
    SpatiotemporalSkill,
}

impl fmt::Display for TopicClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopicClass::Chitchat => "chitchat",
            TopicClass::InDepth => "in-depth",
            TopicClass::SpatiotemporalSkill => "spatiotemporal & skill",
        })
    }
}

/// Percentages (0–100) and mean overall score, all rounded to 2 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalRow {
    pub group: String,
    pub consistent: f64,
    pub knowledgeable: f64,
    pub factually_incorrect: f64,
    pub engaging: f64,
    pub overall: f64,
    pub n_sessions: usize,
    pub n_turns: usize,
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn row(group: String, records: &[&HumanEvalRecord]) -> Result<HumanEvalRow, MetricsError> {
    let turns: Vec<&TurnScores> = records.iter().flat_map(|r| &r.turns).collect();
    if records.is_empty() || turns.is_empty() {
        return Err(MetricsError::EmptyGroup(group));
    }
    let n = turns.len() as f64;
    let rate = |f: fn(&TurnScores) -> u8| round2(turns.iter().map(|t| f64::from(f(t))).sum::<f64>() / n * 100.0);
    let overall = records.iter().map(|r| f64::from(r.overall)).sum::<f64>() / records.len() as f64;
    Ok(HumanEvalRow {
        group,
        consistent: rate(|t| t.consistent),
        knowledgeable: rate(|t| t.knowledgeable),
        factually_incorrect: rate(|t| t.factually_incorrect),
        engaging: rate(|t| t.engaging),
        overall: round2(overall),
        n_sessions: records.len(),
        n_turns: turns.len(),
    })
}

/// One row for all records, then one per requested class. A requested class
/// with no records is an error.
pub fn aggregate_human_eval(
    records: &[(TopicClass, HumanEvalRecord)],
    classes: &[TopicClass],
) -> Result<Vec<HumanEvalRow>, MetricsError> {
    let mut grouped: BTreeMap<TopicClass, Vec<&HumanEvalRecord>> = BTreeMap::new();
    for (c, r) in records {
        grouped.entry(*c).or_default().push(r);
    }
    let all: Vec<&HumanEvalRecord> = records.iter().map(|(_, r)| r).collect();
    let mut out = vec![row("all".into(), &all)?];
    for c in classes {
        let rs = grouped.get(c).map(Vec::as_slice).unwrap_or(&[]);
        out.push(row(c.to_string(), rs)?);
    }
    Ok(out)
}

pub fn render_human_table(rows: &[HumanEvalRow]) -> String {
    let mut out = format!(
        "{:<24}{:>12}{:>15}{:>22}{:>11}{:>9}\n",
        "topics", "Consistent", "Knowledgeable", "Factually Incorrect ↓", "Engaging", "Overall"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<24}{:>11.2}%{:>14.2}%{:>21.2}%{:>10.2}%{:>9.2}\n",
            r.group, r.consistent, r.knowledgeable, r.factually_incorrect, r.engaging, r.overall
        ));
    }
    out
}
