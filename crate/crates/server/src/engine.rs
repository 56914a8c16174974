//! Session engine: every per-session operation of live chat and data
//! collection, with persistence through the [`SessionStore`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, TryLockError};

use chrono::{DateTime, FixedOffset, Timelike, Utc};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use servdial_core::dataset::{qc_check, QcConfig, QcReport};
use servdial_core::gateway::fixtures::NamedLocation;
use servdial_core::generation::{bot_turn, generate_response, GenerationOptions, GeneratorBinding, GeneratorOutcome};
use servdial_core::types::{
    Role, ServiceKnowledge, ServiceRequest, Session, SpatiotemporalState, Split, TopicPath, Turn, UserProfile,
};
use servdial_core::Gateway;

use crate::error::EngineError;
use crate::matching::{MatchQueue, MatchState};
use crate::store::{AttemptRecord, Event, Mode, SessionEntry, SessionStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Body of a session-creation request. Without a location the server draws
/// one from its pool; without a time it uses the current time in UTC+8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub id: Option<String>,
    pub topic: TopicPath,
    #[serde(default)]
    pub location: Option<LocationSpec>,
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Live
}

/// Who is looking at a session. The USER view hides service interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Viewer {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub mode: Mode,
    pub closed: bool,
    pub next_role: Role,
    pub session: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<Vec<AttemptRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qc: Option<QcReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BotTurnOutcome {
    pub decision: GeneratorOutcome,
    pub turn: Turn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchTicket {
    pub participant: String,
    #[serde(flatten)]
    pub state: MatchState,
    /// The USER's topic and location, shown to the BOT once matched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_profile: Option<serde_json::Value>,
}

pub struct EngineConfig {
    pub gateway: Arc<Gateway>,
    pub binding: GeneratorBinding,
    pub qc: QcConfig,
    pub generation: GenerationOptions,
    pub locations: Vec<NamedLocation>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let gateway = Arc::new(Gateway::builtin());
        let locations = gateway.snapshot().locations.clone();
        EngineConfig {
            gateway,
            binding: GeneratorBinding::baseline(),
            qc: QcConfig::default(),
            generation: GenerationOptions::default(),
            locations,
            seed: 0,
        }
    }
}

pub struct Engine {
    store: Mutex<SessionStore>,
    guards: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    matches: Mutex<MatchQueue<CreateSession>>,
    rng: Mutex<ChaCha8Rng>,
    cfg: EngineConfig,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // a panicked handler leaves the data consistent: writes are validated before they touch it
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn invalid(e: impl ToString) -> EngineError {
    EngineError::InvalidRequest(e.to_string())
}

fn china_now() -> DateTime<FixedOffset> {
    let t = Utc::now().with_timezone(&FixedOffset::east_opt(8 * 3600).expect("valid offset"));
    t.with_second(0).and_then(|t| t.with_nanosecond(0)).expect("zero seconds is valid")
}

impl Engine {
    pub fn new(store: SessionStore, cfg: EngineConfig) -> Self {
        Engine {
            store: Mutex::new(store),
            guards: Mutex::new(HashMap::new()),
            matches: Mutex::new(MatchQueue::default()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed)),
            cfg,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    fn guard(&self, id: &str) -> Arc<Mutex<()>> {
        lock(&self.guards).entry(id.to_string()).or_default().clone()
    }

    fn entry(&self, id: &str) -> Result<SessionEntry, EngineError> {
        lock(&self.store).get(id).cloned().ok_or_else(|| EngineError::NotFound(id.to_string()))
    }

    fn append(&self, id: &str, event: Event) -> Result<SessionEntry, EngineError> {
        lock(&self.store).append(id, event).cloned()
    }

    /// Copy of the store index, for inspection and tests.
    pub fn with_store<R>(&self, f: impl FnOnce(&SessionStore) -> R) -> R {
        f(&lock(&self.store))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, EngineError> {
        let id = match req.id {
            Some(id) if id.trim().is_empty() => return Err(invalid("session id is empty")),
            Some(id) => id,
            None => {
                let store = lock(&self.store);
                (store.len() + 1..).map(|n| format!("s{n:06}")).find(|c| !store.contains(c)).expect("unbounded")
            }
        };
        let time = match &req.time {
            Some(t) => servdial_core::types::parse_time(t).map_err(invalid)?,
            None => china_now(),
        };
        let state = match req.location {
            Some(l) => SpatiotemporalState::try_new(time, l.lat, l.lon, l.name).map_err(invalid)?,
            None => {
                let loc = self
                    .cfg
                    .locations
                    .choose(&mut *lock(&self.rng))
                    .ok_or_else(|| EngineError::Storage("location pool is empty".into()))?;
                SpatiotemporalState::new(time, loc.latitude, loc.longitude, loc.name.clone())
            }
        };
        let session = Session::new(id.clone(), UserProfile { topic: req.topic, assigned_state: state }, Split::Live);
        let entry = self.append(&id, Event::Created { mode: req.mode, record: session })?;
        Ok(view(&entry, Viewer::Bot))
    }

    pub fn get(&self, id: &str, viewer: Viewer) -> Result<SessionView, EngineError> {
        Ok(view(&self.entry(id)?, viewer))
    }

    pub fn post_user_message(&self, id: &str, text: &str) -> Result<SessionView, EngineError> {
        let g = self.guard(id);
        let _held = lock(&g);
        let entry = self.append(id, Event::Message { text: text.to_string() })?;
        Ok(view(&entry, Viewer::User))
    }

    /// Live mode: the machine BOT answers the last USER turn. A second call
    /// for the same session while one is running fails with `Busy`.
    pub fn run_bot_turn(&self, id: &str) -> Result<BotTurnOutcome, EngineError> {
        let g = self.guard(id);
        let _held = match g.try_lock() {
            Ok(h) => h,
            Err(TryLockError::WouldBlock) => return Err(EngineError::Busy),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        let entry = self.entry(id)?;
        if entry.mode != Mode::Live {
            return Err(EngineError::WrongMode { expected: Mode::Live });
        }
        if entry.closed() {
            return Err(EngineError::SessionClosed);
        }
        if entry.expected_role() != Role::Bot {
            return Err(EngineError::NotYourTurn { expected: entry.expected_role() });
        }
        let out = bot_turn(&entry.session, &self.cfg.binding, &self.cfg.gateway, self.cfg.generation)?;
        let (attempts, used_index) = match out.turn.service() {
            Some(svc) => (
                svc.attempts()
                    .iter()
                    .map(|a| AttemptRecord { query: a.request.query().to_string(), knowledge: a.knowledge.clone() })
                    .collect(),
                svc.used_index(),
            ),
            None => (Vec::new(), None),
        };
        self.append(id, Event::BotTurn { text: out.turn.text().to_string(), attempts, used_index })?;
        Ok(BotTurnOutcome { decision: out.decision, turn: out.turn })
    }

    /// Collection mode: the BOT seat asks the gateway. The attempt is kept
    /// whether or not the reply ends up using it.
    pub fn wizard_query(&self, id: &str, query: &str) -> Result<(usize, ServiceKnowledge), EngineError> {
        let g = self.guard(id);
        let _held = lock(&g);
        let entry = self.entry(id)?;
        if entry.mode != Mode::Collection {
            return Err(EngineError::WrongMode { expected: Mode::Collection });
        }
        if entry.closed() {
            return Err(EngineError::SessionClosed);
        }
        if entry.expected_role() != Role::Bot {
            return Err(EngineError::NotYourTurn { expected: entry.expected_role() });
        }
        let request = ServiceRequest::new(query.trim(), entry.session.state().clone()).map_err(invalid)?;
        let knowledge = self.cfg.gateway.dispatch(&request)?;
        let entry =
            self.append(id, Event::Query { query: request.query().to_string(), knowledge: knowledge.clone() })?;
        Ok((entry.pending.len() - 1, knowledge))
    }

    /// Collection mode: the BOT seat replies, optionally marking which
    /// pending attempt it used. Replies that copy that knowledge are refused.
    pub fn wizard_reply(&self, id: &str, text: &str, used_index: Option<usize>) -> Result<SessionView, EngineError> {
        let g = self.guard(id);
        let _held = lock(&g);
        let entry = self.entry(id)?;
        if let Some(k) = used_index.and_then(|i| entry.pending.get(i)) {
            let (f1, copied) = self.cfg.qc.copy_check(text, &k.knowledge.text);
            if copied {
                return Err(EngineError::CopyRejected { f1 });
            }
        }
        let entry = self.append(id, Event::Reply { text: text.to_string(), used_index })?;
        Ok(view(&entry, Viewer::Bot))
    }

    /// A non-binding draft reply for the BOT seat, grounded in the latest
    /// pending knowledge. Generator failures yield an empty suggestion.
    pub fn suggest(&self, id: &str) -> Result<String, EngineError> {
        let entry = self.entry(id)?;
        if entry.closed() {
            return Err(EngineError::SessionClosed);
        }
        if entry.expected_role() != Role::Bot {
            return Err(EngineError::NotYourTurn { expected: entry.expected_role() });
        }
        let knowledge = entry.pending.last().map(|a| a.knowledge.text.as_str());
        let s = &entry.session;
        let opts = GenerationOptions { want_logprobs: false, ..self.cfg.generation };
        Ok(generate_response(s.state(), Some(&s.profile.topic), &s.context, knowledge, &self.cfg.binding, opts)
            .map(|(text, _)| text)
            .unwrap_or_default())
    }

    /// Stores the USER's rating, closes the session and attaches its QC report.
    pub fn rate_session(&self, id: &str, rating: u8) -> Result<SessionView, EngineError> {
        let g = self.guard(id);
        let _held = lock(&g);
        let entry = self.entry(id)?;
        if rating > 5 {
            return Err(EngineError::InvalidRating(rating));
        }
        let qc = qc_check(&entry.session, &self.cfg.qc);
        let entry = self.append(id, Event::Rating { rating, qc })?;
        Ok(view(&entry, Viewer::User))
    }

    /// Joins the match queue. When a USER and a BOT pair up, a collection
    /// session is created from the USER's request.
    pub fn join_match(
        &self,
        participant: &str,
        role: Role,
        request: Option<CreateSession>,
    ) -> Result<MatchTicket, EngineError> {
        if participant.trim().is_empty() {
            return Err(invalid("participant id is empty"));
        }
        let mut q = lock(&self.matches);
        let request = request.map(|r| CreateSession { mode: Mode::Collection, ..r });
        if let Some(p) = q.join(participant, role, request)? {
            match self.create_session(p.request.clone()) {
                Ok(v) => {
                    let id = v.session["id"].as_str().expect("sessions have ids").to_string();
                    q.record_match(&p.user, &p.bot, &id);
                }
                Err(e) => {
                    q.requeue(p);
                    return Err(e);
                }
            }
        }
        let state = q.status(participant);
        drop(q);
        self.ticket(participant, role, state)
    }

    pub fn match_status(&self, participant: &str, role: Role) -> Result<MatchTicket, EngineError> {
        let state = lock(&self.matches).status(participant);
        self.ticket(participant, role, state)
    }

    fn ticket(&self, participant: &str, role: Role, state: MatchState) -> Result<MatchTicket, EngineError> {
        let partner_profile = match (&state, role) {
            (MatchState::Matched { session_id }, Role::Bot) => {
                let v = self.get(session_id, Viewer::Bot)?;
                Some(serde_json::json!({
                    "topic": v.session["topic"],
                    "location": v.session["location"],
                    "time": v.session["time"],
                }))
            }
            _ => None,
        };
        Ok(MatchTicket { participant: participant.to_string(), state, partner_profile })
    }
}

fn view(entry: &SessionEntry, viewer: Viewer) -> SessionView {
    let mut session = serde_json::to_value(&entry.session).expect("session serializes");
    if viewer == Viewer::User {
        if let Some(turns) = session.get_mut("turns").and_then(|t| t.as_array_mut()) {
            for t in turns {
                if let Some(obj) = t.as_object_mut() {
                    obj.remove("service");
                }
            }
        }
    }
    let pending = (viewer == Viewer::Bot).then(|| {
        entry
            .pending
            .iter()
            .map(|a| AttemptRecord { query: a.request.query().to_string(), knowledge: a.knowledge.clone() })
            .collect()
    });
    SessionView {
        mode: entry.mode,
        closed: entry.closed(),
        next_role: entry.expected_role(),
        session,
        pending,
        qc: entry.qc.clone(),
    }
}
