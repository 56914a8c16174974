use std::fmt;

use serde::{Deserialize, Serialize};

use super::text::{bleu1, distinct2, kf1, unigram_f1};
use super::MetricsError;
use crate::exec::{self, Execution};
use crate::generation::{
    generate_query, generate_response, nll_and_ppl, GenerationError, GenerationOptions, GeneratorBinding,
    GeneratorOutcome, TokenScores,
};
use crate::types::{DialogueContext, Session, SpatiotemporalState, Split, TopicPath};

/// One BOT turn to predict: everything before it plus the gold annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalExample {
    pub session_id: String,
    pub state: SpatiotemporalState,
    pub topic: TopicPath,
    pub context: DialogueContext,
    pub gold_query: Option<String>,
    pub gold_knowledge: Option<String>,
    pub gold_response: String,
}

/// Builds one example per BOT turn. A turn whose attempts were all left
/// unused counts as a no-request turn.
pub fn examples_from_sessions(sessions: &[Session]) -> Vec<EvalExample> {
    let mut out = Vec::new();
    for s in sessions {
        for (i, t) in s.context.turns().iter().enumerate() {
            if t.role() != crate::types::Role::Bot {
                continue;
            }
            let used = t.used_knowledge();
            out.push(EvalExample {
                session_id: s.id.clone(),
                state: s.state().clone(),
                topic: s.profile.topic.clone(),
                context: s.context.prefix(i),
                gold_query: used.map(|a| a.request.query().to_string()),
                gold_knowledge: used.map(|a| a.knowledge.text.clone()),
                gold_response: t.text().to_string(),
            });
        }
    }
    out
}

/// What a system produced for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub decision: GeneratorOutcome,
    pub response: String,
    pub query_scores: Option<TokenScores>,
    pub response_scores: Option<TokenScores>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportSplit {
    Seen,
    Unseen,
    Valid,
    Train,
    Live,
}

impl From<Split> for ReportSplit {
    fn from(s: Split) -> Self {
        match s {
            Split::SeenTest => ReportSplit::Seen,
            Split::UnseenTest => ReportSplit::Unseen,
            Split::Valid => ReportSplit::Valid,
            Split::Train => ReportSplit::Train,
            Split::Live => ReportSplit::Live,
        }
    }
}

impl fmt::Display for ReportSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportSplit::Seen => "seen",
            ReportSplit::Unseen => "unseen",
            ReportSplit::Valid => "valid",
            ReportSplit::Train => "train",
            ReportSplit::Live => "live",
        })
    }
}

/// Automatic metrics for one split. Rates are in `[0, 1]`; the text table
/// shows them ×100. `ppl` is response perplexity; `ppl_query` is reported
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub split: ReportSplit,
    pub query_acc: f64,
    pub query_f1: f64,
    pub response_f1: f64,
    pub kf1: f64,
    pub bleu1: f64,
    pub distinct2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl_query: Option<f64>,
    pub n_examples: usize,
}

/// Fraction of turns where the request decision matches the gold one.
pub fn decision_accuracy(preds: &[GeneratorOutcome], golds: &[Option<String>]) -> Result<f64, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p.is_query() == g.is_some()).count();
    Ok(hits as f64 / preds.len() as f64)
}

struct PerExample {
    decision_hit: bool,
    query_f1: Option<f64>,
    response_f1: f64,
    bleu: f64,
    kf1: Option<f64>,
    ppl: Option<f64>,
    ppl_query: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores aligned system outputs against their examples.
///
/// ACC covers every BOT turn; query F1 covers turns with a gold query (a
/// predicted no-request counts as an empty query); response F1 and BLEU-1
/// cover every turn; KF1 covers turns whose gold used knowledge; Distinct-2
/// pools all predicted responses; perplexities average per-example values.
pub fn evaluate_split(
    examples: &[EvalExample],
    outputs: &[SystemOutput],
    split: ReportSplit,
    exec: Execution,
) -> Result<MetricReport, MetricsError> {
    if examples.len() != outputs.len() {
        return Err(MetricsError::LengthMismatch { left: examples.len(), right: outputs.len() });
    }
    if examples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let idx: Vec<usize> = (0..examples.len()).collect();
    let rows = exec::map(&idx, exec, |&i| {
        let (ex, out) = (&examples[i], &outputs[i]);
        PerExample {
            decision_hit: out.decision.is_query() == ex.gold_query.is_some(),
            query_f1: ex.gold_query.as_ref().map(|g| unigram_f1(out.decision.query().unwrap_or(""), g)),
            response_f1: unigram_f1(&out.response, &ex.gold_response),
            bleu: bleu1(&out.response, &ex.gold_response),
            kf1: ex.gold_knowledge.as_ref().map(|k| kf1(&out.response, k)),
            ppl: out.response_scores.as_ref().map(|s| nll_and_ppl(s).1),
            ppl_query: out.query_scores.as_ref().map(|s| nll_and_ppl(s).1),
        }
    });
    let n = rows.len() as f64;
    let responses: Vec<&str> = outputs.iter().map(|o| o.response.as_str()).collect();
    Ok(MetricReport {
        split,
        query_acc: rows.iter().filter(|r| r.decision_hit).count() as f64 / n,
        query_f1: mean(rows.iter().filter_map(|r| r.query_f1)).unwrap_or(0.0),
        response_f1: mean(rows.iter().map(|r| r.response_f1)).unwrap_or(0.0),
        kf1: mean(rows.iter().filter_map(|r| r.kf1)).unwrap_or(0.0),
        bleu1: mean(rows.iter().map(|r| r.bleu)).unwrap_or(0.0),
        distinct2: distinct2(&responses),
        ppl: mean(rows.iter().filter_map(|r| r.ppl)),
        ppl_query: mean(rows.iter().filter_map(|r| r.ppl_query)),
        n_examples: rows.len(),
    })
}

/// Outputs of the gold-echo system: gold decisions, queries and responses.
pub fn echo_outputs(examples: &[EvalExample]) -> Vec<SystemOutput> {
    examples
        .iter()
        .map(|ex| SystemOutput {
            decision: match &ex.gold_query {
                Some(q) => GeneratorOutcome::Query(q.clone()),
                None => GeneratorOutcome::NoRequest,
            },
            response: ex.gold_response.clone(),
            query_scores: None,
            response_scores: None,
        })
        .collect()
}

/// Runs `g` over every example: the query stage on the context, then the
/// response stage grounded in the gold knowledge.
pub fn system_outputs(
    examples: &[EvalExample],
    g: &GeneratorBinding,
    opts: GenerationOptions,
    exec: Execution,
) -> Result<Vec<SystemOutput>, GenerationError> {
    exec::map(examples, exec, |ex| {
        let topic = Some(&ex.topic);
        let (decision, query_scores) = generate_query(&ex.state, topic, &ex.context, g, opts)?;
        let (response, response_scores) =
            generate_response(&ex.state, topic, &ex.context, ex.gold_knowledge.as_deref(), g, opts)?;
        Ok(SystemOutput { decision, response, query_scores, response_scores })
    })
    .into_iter()
    .collect()
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

impl MetricReport {
    pub const HEADER: [&'static str; 9] = ["split", "ACC", "F1(Q)", "F1(R)", "KF1", "BLEU-1", "DIS-2", "PPL", "n"];

    fn cells(&self) -> [String; 9] {
        [
            self.split.to_string(),
            pct(self.query_acc),
            pct(self.query_f1),
            pct(self.response_f1),
            pct(self.kf1),
            pct(self.bleu1),
            pct(self.distinct2),
            self.ppl.map_or_else(|| "-".into(), |p| format!("{p:.2}")),
            self.n_examples.to_string(),
        ]
    }

    /// Aligned plain-text table of several reports.
    pub fn render_table(reports: &[MetricReport]) -> String {
        let rows: Vec<[String; 9]> = reports.iter().map(MetricReport::cells).collect();
        let mut widths = Self::HEADER.map(|h| h.chars().count());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line =
            |cells: Vec<&str>| cells.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ");
        let mut out = line(Self::HEADER.to_vec());
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }
}
