//! Corpus statistics. Character counts exclude whitespace; every average
//! and percentage is rounded to two decimals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::metrics::human::round2;
use crate::text::char_count;
use crate::types::{Role, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicCounts {
    pub level1: usize,
    pub level2: usize,
    pub level3: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub n_dialogs: usize,
    pub n_utterances: usize,
    pub avg_chars_user_uttr: f64,
    pub avg_chars_bot_uttr: f64,
    /// Over the queries of used attempts.
    pub avg_chars_query: f64,
    /// Over the knowledge texts of used attempts.
    pub avg_chars_service_text: f64,
    /// BOT turns with used knowledge ÷ BOT turns × 100.
    pub service_turn_percent: f64,
    /// Unused attempts per knowledge-using BOT turn.
    pub avg_other_service: f64,
    pub topic_counts: TopicCounts,
    pub n_locations: usize,
}

fn avg(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        round2(sum as f64 / n as f64)
    }
}

pub fn stats(sessions: &[Session]) -> Result<StatsTable, DatasetError> {
    if sessions.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let (mut user_n, mut user_chars, mut bot_n, mut bot_chars) = (0, 0, 0, 0);
    let (mut know_n, mut query_chars, mut service_chars, mut unused) = (0, 0, 0, 0);
    let (mut l1, mut l2, mut l3, mut locations) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for s in sessions {
        l1.insert(s.profile.topic.level1);
        l2.insert(s.profile.topic.level2.as_str());
        if let Some(t) = &s.profile.topic.level3 {
            l3.insert(t.as_str());
        }
        locations.insert(s.state().location_name.as_str());
        for t in s.context.turns() {
            match t.role() {
                Role::User => {
                    user_n += 1;
                    user_chars += char_count(t.text());
                }
                Role::Bot => {
                    bot_n += 1;
                    bot_chars += char_count(t.text());
                }
            }
            if let Some((svc, used)) = t.service().and_then(|s| s.used().map(|u| (s, u))) {
                know_n += 1;
                query_chars += char_count(used.request.query());
                service_chars += char_count(&used.knowledge.text);
                unused += svc.unused_count();
            }
        }
    }
    Ok(StatsTable {
        n_dialogs: sessions.len(),
        n_utterances: user_n + bot_n,
        avg_chars_user_uttr: avg(user_chars, user_n),
        avg_chars_bot_uttr: avg(bot_chars, bot_n),
        avg_chars_query: avg(query_chars, know_n),
        avg_chars_service_text: avg(service_chars, know_n),
        service_turn_percent: avg(know_n * 100, bot_n),
        avg_other_service: avg(unused, know_n),
        topic_counts: TopicCounts { level1: l1.len(), level2: l2.len(), level3: l3.len() },
        n_locations: locations.len(),
    })
}

impl StatsTable {
    pub fn render(&self) -> String {
        let rows: [(&str, String); 10] = [
            ("# dialogs", self.n_dialogs.to_string()),
            ("# utterances", self.n_utterances.to_string()),
            ("Avg. # chars per USER uttr", format!("{:.2}", self.avg_chars_user_uttr)),
            ("Avg. # chars per BOT uttr", format!("{:.2}", self.avg_chars_bot_uttr)),
            ("Avg. # chars per query", format!("{:.2}", self.avg_chars_query)),
            ("Avg. # chars per service text", format!("{:.2}", self.avg_chars_service_text)),
            ("Avg. # service turn percent", format!("{:.2}%", self.service_turn_percent)),
            ("Avg. # other service", format!("{:.2}", self.avg_other_service)),
            (
                "# topics (level 1/2/3)",
                format!("{}/{}/{}", self.topic_counts.level1, self.topic_counts.level2, self.topic_counts.level3),
            ),
            ("# locations", self.n_locations.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in &rows {
            out.push_str(&format!("{k:<32}{v:>12}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{
        parse_time, Attempt, KnowledgeSource, ServiceInteraction, ServiceKnowledge, ServiceRequest, SkillId,
        SpatiotemporalState, Split, TopicCategory, TopicPath, Turn, UserProfile,
    };

    fn knowledge_turn(state: &SpatiotemporalState, query: &str, unused: usize) -> Turn {
        let attempt = |q: &str| Attempt {
            request: ServiceRequest::new(q, state.clone()).unwrap(),
            knowledge: ServiceKnowledge {
                text: "知识 文本".into(),
                skill: SkillId::Search,
                source: KnowledgeSource::Corpus,
            },
        };
        let mut attempts: Vec<Attempt> = (0..unused).map(|_| attempt("其他")).collect();
        attempts.push(attempt(query));
        let used = attempts.len() - 1;
        Turn::bot("好的 好的", Some(ServiceInteraction::new(attempts, Some(used)).unwrap())).unwrap()
    }

    fn hand_built() -> Session {
        let state = SpatiotemporalState::new(parse_time("2022-08-12T15:00+08:00").unwrap(), 39.99, 116.3, "Haidian");
        let topic = TopicPath::new(TopicCategory::Travel, "outing", Some("suburbs".into())).unwrap();
        let mut s = Session::new("h", UserProfile { topic, assigned_state: state.clone() }, Split::Train);
        for i in 0..5 {
            s.context.push(Turn::user("一二三").unwrap()).unwrap();
            let bot = match i {
                1 => knowledge_turn(&state, "周末天气怎么样", 1),
                3 => knowledge_turn(&state, "北京 周末 天气", 0),
                _ => Turn::bot("好的", None).unwrap(),
            };
            s.context.push(bot).unwrap();
        }
        s
    }

    #[test]
    fn hand_built_session() {
        let t = stats(&[hand_built()]).unwrap();
        // 2 of 5 BOT turns used knowledge; queries of 7 and 6 non-space chars
        assert_eq!(t.service_turn_percent, 40.0);
        assert_eq!(t.avg_chars_query, 6.5);
        assert_eq!(t.avg_other_service, 0.5);
        assert_eq!(t.avg_chars_service_text, 4.0);
        assert_eq!(t.avg_chars_user_uttr, 3.0);
        // three plain "好的" (2) and two "好的 好的" (4)
        assert_eq!(t.avg_chars_bot_uttr, 2.8);
        assert_eq!(t.n_utterances, 10);
        assert_eq!(t.topic_counts, TopicCounts { level1: 1, level2: 1, level3: 1 });
        assert!(t.render().contains("40.00%"));
    }

    #[test]
    fn mean_invariance_and_empty() {
        let one = stats(&[hand_built()]).unwrap();
        let ten = stats(&vec![hand_built(); 10]).unwrap();
        assert_eq!(ten.n_dialogs, 10);
        assert_eq!(
            (ten.avg_chars_query, ten.service_turn_percent, ten.avg_chars_bot_uttr),
            (one.avg_chars_query, one.service_turn_percent, one.avg_chars_bot_uttr)
        );
        assert!(matches!(stats(&[]), Err(DatasetError::EmptyDataset)));
    }
}
