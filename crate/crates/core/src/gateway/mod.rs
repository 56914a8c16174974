//! Aggregated service gateway.
//!
//! A [`ServiceRequest`] (query plus spatiotemporal state) is routed to exactly
//! one skill by [`IntentRules`], answered from the [`FixtureStore`] or from a
//! registered [`SkillProvider`], and condensed to at most `cap` characters.
//! Dispatch is a pure function of the request and the current fixture
//! snapshot. Reloading swaps the whole store at once; in-flight dispatches
//! keep the snapshot they started with.

pub mod calc;
pub mod calendar;
pub mod condense;
pub mod fixtures;
pub mod intent;
pub mod poi;
pub mod retrieval;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

pub use calc::{eval_expression, CalcError, ExactValue};
pub use calendar::{calendar_answer, CalendarError};
pub use condense::{condense, DEFAULT_CAP};
pub use fixtures::{FixtureError, FixtureStore};
pub use intent::IntentRules;
pub use poi::{haversine_km, recommend_poi, Poi};
pub use retrieval::{Bm25Index, Passage, RankedPassage};

use crate::exec::Execution;
use crate::types::{KnowledgeSource, ServiceKnowledge, ServiceRequest, SkillId};

/// How many POIs a recommendation lists.
pub const RECOMMEND_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("skill {skill} unavailable: {reason}")]
    SkillUnavailable { skill: SkillId, reason: String },
    #[error("no corpus loaded for search")]
    EmptyCorpus,
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error("k must be at least 1")]
    ZeroK,
}

impl GatewayError {
    fn unavailable(skill: SkillId, reason: impl Into<String>) -> Self {
        GatewayError::SkillUnavailable { skill, reason: reason.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::SkillUnavailable { .. } => "skill_unavailable",
            GatewayError::EmptyCorpus => "empty_corpus",
            GatewayError::Calc(CalcError::DivisionByZero) => "division_by_zero",
            GatewayError::Calc(CalcError::Parse { .. }) => "parse_error",
            GatewayError::Calendar(_) => "unresolvable_date",
            GatewayError::ZeroK => "invalid_k",
        }
    }
}

/// Replacement backend for one skill, e.g. an HTTP client for a live API.
/// Knowledge produced through a provider is tagged [`KnowledgeSource::External`].
pub trait SkillProvider: Send + Sync {
    fn answer(&self, skill: SkillId, request: &ServiceRequest) -> Result<String, GatewayError>;
}

pub struct Gateway {
    store: RwLock<Arc<FixtureStore>>,
    rules: IntentRules,
    providers: HashMap<SkillId, Arc<dyn SkillProvider>>,
    cap: usize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("cap", &self.cap)
            .field("providers", &self.providers.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(store: FixtureStore, rules: IntentRules) -> Self {
        Gateway { store: RwLock::new(Arc::new(store)), rules, providers: HashMap::new(), cap: DEFAULT_CAP }
    }

    /// Shipped fixtures and intent rules.
    pub fn builtin() -> Self {
        Self::new(FixtureStore::builtin(), IntentRules::builtin())
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        assert!(cap > 0, "condensation cap must be positive");
        self.cap = cap;
        self
    }

    pub fn with_provider(mut self, skill: SkillId, provider: Arc<dyn SkillProvider>) -> Self {
        self.providers.insert(skill, provider);
        self
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn rules(&self) -> &IntentRules {
        &self.rules
    }

    pub fn snapshot(&self) -> Arc<FixtureStore> {
        Arc::clone(&self.store.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Atomically replaces the fixture store.
    pub fn reload(&self, store: FixtureStore) {
        *self.store.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(store);
    }

    pub fn classify(&self, query: &str) -> SkillId {
        self.rules.classify(query)
    }

    pub fn dispatch(&self, req: &ServiceRequest) -> Result<ServiceKnowledge, GatewayError> {
        let skill = self.classify(req.query());
        let (text, source) = match self.providers.get(&skill) {
            Some(p) => (p.answer(skill, req)?, KnowledgeSource::External),
            None => {
                let store = self.snapshot();
                let text = answer_from_fixtures(&store, skill, req)?;
                let source = if skill == SkillId::Search { KnowledgeSource::Corpus } else { KnowledgeSource::Fixture };
                (text, source)
            }
        };
        Ok(ServiceKnowledge { text: condense(&text, self.cap), skill, source })
    }

    pub fn retrieve_passages(
        &self,
        query: &str,
        k: usize,
        exec: Execution,
    ) -> Result<Vec<RankedPassage>, GatewayError> {
        if k == 0 {
            return Err(GatewayError::ZeroK);
        }
        let store = self.snapshot();
        if store.corpus.is_empty() {
            return Err(GatewayError::EmptyCorpus);
        }
        Ok(store.corpus.search(query, k, exec))
    }
}

fn answer_from_fixtures(store: &FixtureStore, skill: SkillId, req: &ServiceRequest) -> Result<String, GatewayError> {
    let q = req.query();
    let st = &req.state;
    match skill {
        SkillId::Calculator => {
            let value = eval_expression(q)?;
            Ok(format!("{} = {}", q.trim(), value))
        }
        SkillId::Calendar => Ok(calendar_answer(q, st)?),
        SkillId::Weather => {
            let city = store
                .resolve_city(&st.location_name, st.latitude, st.longitude)
                .ok_or_else(|| GatewayError::unavailable(skill, "no city for location"))?;
            let date = st.local_date();
            store
                .weather
                .get(&(city.clone(), date))
                .cloned()
                .ok_or_else(|| GatewayError::unavailable(skill, format!("no forecast for {city} on {date}")))
        }
        SkillId::Stock => {
            let lower = q.to_lowercase();
            store
                .stocks
                .values()
                .filter(|s| lower.contains(&s.symbol.to_lowercase()) || (!s.name.is_empty() && q.contains(&s.name)))
                .max_by_key(|s| s.name.chars().count().max(s.symbol.len()))
                .map(|s| format!("{} ({}): {} {} as of {}.", s.name, s.symbol, s.price, s.currency, s.as_of))
                .ok_or_else(|| GatewayError::unavailable(skill, "no matching symbol"))
        }
        SkillId::Translation => translate(store, q),
        SkillId::Recommend => {
            let category = poi::category_in_query(&store.poi, q)
                .ok_or_else(|| GatewayError::unavailable(skill, "no known category in query"))?;
            recommend_poi(&store.poi, st, category, RECOMMEND_K)
                .ok_or_else(|| GatewayError::unavailable(skill, format!("no POI in {category}")))
        }
        SkillId::Search => {
            if store.corpus.is_empty() {
                return Err(GatewayError::EmptyCorpus);
            }
            let top = store.corpus.search(q, 1, Execution::Sequential);
            Ok(top.into_iter().next().map(|p| p.text).unwrap_or_default())
        }
    }
}

const LANGUAGES: &[(&str, &[&str])] = &[
    ("en", &["english", "英语", "英文"]),
    ("zh", &["chinese", "中文", "汉语"]),
    ("fr", &["french", "法语"]),
    ("ja", &["japanese", "日语"]),
];

fn translate(store: &FixtureStore, query: &str) -> Result<String, GatewayError> {
    let q = query.to_lowercase();
    let unavailable = |r: &str| GatewayError::unavailable(SkillId::Translation, r);
    let lang = LANGUAGES
        .iter()
        .find(|(_, names)| names.iter().any(|n| q.contains(n)))
        .map(|(code, _)| *code)
        .ok_or_else(|| unavailable("no target language"))?;
    store
        .translations
        .iter()
        .filter(|((phrase, l), _)| l == lang && q.contains(phrase.as_str()))
        .max_by_key(|((phrase, _), _)| phrase.chars().count())
        .map(|((phrase, l), text)| format!("\"{phrase}\" ({l}): {text}"))
        .ok_or_else(|| unavailable("phrase not in dictionary"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_time, SpatiotemporalState};

    fn haidian() -> SpatiotemporalState {
        SpatiotemporalState::new(
            parse_time("2022-08-12T15:00+08:00").unwrap(),
            39.99,
            116.30,
            "Haidian district, Beijing",
        )
    }

    fn ask(g: &Gateway, q: &str) -> Result<ServiceKnowledge, GatewayError> {
        g.dispatch(&ServiceRequest::new(q, haidian()).unwrap())
    }

    #[test]
    fn weather_from_seeded_fixture() {
        let k = ask(&Gateway::builtin(), "weekend weather").unwrap();
        assert_eq!(k.skill, SkillId::Weather);
        assert_eq!(k.source, KnowledgeSource::Fixture);
        assert!(k.text.contains("18度～26度"));
    }

    #[test]
    fn calculator_and_errors() {
        let g = Gateway::builtin();
        let k = ask(&g, "(2+3)*4").unwrap();
        assert_eq!(k.skill, SkillId::Calculator);
        assert!(k.text.ends_with("= 20"));
        assert_eq!(ask(&g, "1/0"), Err(GatewayError::Calc(CalcError::DivisionByZero)));
    }

    #[test]
    fn recommend_orders_by_distance() {
        let k = ask(&Gateway::builtin(), "nearby western restaurants").unwrap();
        assert_eq!(k.skill, SkillId::Recommend);
        let a = k.text.find("Trattoria").unwrap();
        let b = k.text.find("Blue Frog").unwrap();
        assert!(a < b, "{}", k.text);
    }

    #[test]
    fn stock_translation_calendar_search() {
        let g = Gateway::builtin();
        assert!(ask(&g, "百度股价").unwrap().text.contains("BIDU"));
        assert!(ask(&g, "谢谢用英语怎么说").unwrap().text.contains("thank you"));
        assert!(ask(&g, "what day is 2022-08-12").unwrap().text.contains("Friday"));
        let s = ask(&g, "林丹 羽毛球 冠军").unwrap();
        assert_eq!(s.skill, SkillId::Search);
        assert_eq!(s.source, KnowledgeSource::Corpus);
        assert!(s.text.contains("林丹"));
    }

    #[test]
    fn unavailable_and_empty_corpus() {
        let g = Gateway::builtin();
        assert!(matches!(ask(&g, "stock price of nothing"), Err(GatewayError::SkillUnavailable { .. })));
        let empty = Gateway::new(FixtureStore::default(), IntentRules::builtin());
        assert_eq!(ask(&empty, "林丹"), Err(GatewayError::EmptyCorpus));
        assert!(matches!(ask(&empty, "weather"), Err(GatewayError::SkillUnavailable { .. })));
        assert_eq!(empty.retrieve_passages("x", 1, Execution::Sequential), Err(GatewayError::EmptyCorpus));
        assert_eq!(g.retrieve_passages("x", 0, Execution::Sequential), Err(GatewayError::ZeroK));
    }

    #[test]
    fn cap_applies_to_all_output() {
        let g = Gateway::builtin().with_cap(10);
        let k = ask(&g, "weekend weather").unwrap();
        assert!(k.text.chars().count() <= 10);
    }

    #[test]
    fn dispatch_is_pure() {
        let g = Gateway::builtin();
        for q in ["weekend weather", "nearby western restaurants", "林丹", "(2+3)*4"] {
            assert_eq!(ask(&g, q), ask(&g, q));
        }
    }

    struct Echo;
    impl SkillProvider for Echo {
        fn answer(&self, skill: SkillId, r: &ServiceRequest) -> Result<String, GatewayError> {
            Ok(format!("{skill}:{}:{}", r.query(), r.state.latitude))
        }
    }

    #[test]
    fn external_provider_replaces_fixture() {
        let g = Gateway::builtin().with_provider(SkillId::Weather, Arc::new(Echo));
        let k = ask(&g, "weekend weather").unwrap();
        assert_eq!(k.source, KnowledgeSource::External);
        assert_eq!(k.text, "weather:weekend weather:39.99");
    }

    #[test]
    fn reload_swaps_store() {
        let g = Gateway::builtin();
        assert!(ask(&g, "weekend weather").is_ok());
        g.reload(FixtureStore::default());
        assert!(ask(&g, "weekend weather").is_err());
    }
}
