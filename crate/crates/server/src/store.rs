//! Append-only event log plus the in-memory session index it rebuilds.
//!
//! The log is JSONL. Every line is one [`EventRecord`]:
//!
//! | field     | meaning                                                     |
//! |-----------|-------------------------------------------------------------|
//! | `seq`     | global sequence number, starting at 1, strictly increasing  |
//! | `at`      | RFC 3339 UTC timestamp, non-decreasing per session          |
//! | `session` | session id the event belongs to                             |
//! | `event`   | `created`, `message`, `query`, `reply`, `bot_turn`, `rating` |
//!
//! plus the event's own fields:
//!
//! * `created`: `mode` (`live` or `collection`) and `record`, the session in
//!   dataset JSONL form with no turns.
//! * `message`: `text` of a USER turn.
//! * `query`: `query` and `knowledge` (`text`, `skill`, `source`) of one
//!   service attempt made by the BOT seat; kept pending until the reply.
//! * `reply`: `text` of the BOT turn and optional `used_index` into the
//!   pending attempts, which all become the turn's service interaction.
//! * `bot_turn`: a machine BOT turn in one event: `text`, `attempts` (list of
//!   `query` + `knowledge`) and optional `used_index`.
//! * `rating`: `rating` (0 to 5) and `qc`, the quality-control report
//!   computed when the session closed.
//!
//! Writes validate the event against the current state first, append the
//! line and flush it, and only then update memory, so the index always
//! equals a replay of the log. A torn final line (a crash mid-write) is
//! dropped on open; a corrupt line anywhere else is an error.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use servdial_core::dataset::QcReport;
use servdial_core::types::{Attempt, Role, ServiceInteraction, ServiceKnowledge, ServiceRequest, Session, Turn};

use crate::error::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Human USER, machine BOT.
    Live,
    /// Two humans; the BOT seat queries the gateway itself.
    Collection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub query: String,
    pub knowledge: ServiceKnowledge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        mode: Mode,
        record: Session,
    },
    Message {
        text: String,
    },
    Query {
        query: String,
        knowledge: ServiceKnowledge,
    },
    Reply {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        used_index: Option<usize>,
    },
    BotTurn {
        text: String,
        attempts: Vec<AttemptRecord>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        used_index: Option<usize>,
    },
    Rating {
        rating: u8,
        qc: QcReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub session: String,
    #[serde(flatten)]
    pub event: Event,
}

/// One session as the store tracks it.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionEntry {
    pub session: Session,
    pub mode: Mode,
    /// Attempts made by the BOT seat since the last USER turn.
    pub pending: Vec<Attempt>,
    pub qc: Option<QcReport>,
    pub last_at: DateTime<Utc>,
}

impl SessionEntry {
    pub fn closed(&self) -> bool {
        self.session.rating().is_some()
    }

    pub fn expected_role(&self) -> Role {
        self.session.context.expected_role()
    }
}

fn attempt(entry: &SessionEntry, query: String, knowledge: ServiceKnowledge) -> Result<Attempt, EngineError> {
    let request = ServiceRequest::new(query, entry.session.state().clone())
        .map_err(|e| EngineError::InvalidRequest(e.to_string()))?;
    Ok(Attempt { request, knowledge })
}

fn open_turn(entry: &SessionEntry, role: Role) -> Result<(), EngineError> {
    if entry.closed() {
        return Err(EngineError::SessionClosed);
    }
    if entry.expected_role() != role {
        return Err(EngineError::NotYourTurn { expected: entry.expected_role() });
    }
    Ok(())
}

/// The state transition of one event. Shared by live writes and replay.
fn transition(entry: Option<&SessionEntry>, rec: &EventRecord) -> Result<SessionEntry, EngineError> {
    let entry = match (&rec.event, entry) {
        (Event::Created { mode, record }, None) => {
            if record.id != rec.session {
                return Err(EngineError::InvalidRequest("record id differs from event session".into()));
            }
            if !record.context.is_empty() {
                return Err(EngineError::InvalidRequest("a new session has no turns".into()));
            }
            return Ok(SessionEntry {
                session: record.clone(),
                mode: *mode,
                pending: Vec::new(),
                qc: None,
                last_at: rec.at,
            });
        }
        (Event::Created { .. }, Some(_)) => return Err(EngineError::DuplicateSession(rec.session.clone())),
        (_, None) => return Err(EngineError::NotFound(rec.session.clone())),
        (_, Some(e)) => e,
    };
    if rec.at < entry.last_at {
        return Err(EngineError::InvalidRequest("event timestamp goes backwards".into()));
    }
    let mut next = entry.clone();
    next.last_at = rec.at;
    match &rec.event {
        Event::Created { .. } => unreachable!("handled above"),
        Event::Message { text } => {
            open_turn(entry, Role::User)?;
            let turn = Turn::user(text.clone()).map_err(|e| EngineError::InvalidRequest(e.to_string()))?;
            next.session.context.push(turn).map_err(|e| EngineError::InvalidRequest(e.to_string()))?;
            next.pending.clear();
        }
        Event::Query { query, knowledge } => {
            open_turn(entry, Role::Bot)?;
            require_mode(entry, Mode::Collection)?;
            next.pending.push(attempt(entry, query.clone(), knowledge.clone())?);
        }
        Event::Reply { text, used_index } => {
            open_turn(entry, Role::Bot)?;
            require_mode(entry, Mode::Collection)?;
            let attempts = std::mem::take(&mut next.pending);
            push_bot(&mut next, text, attempts, *used_index)?;
        }
        Event::BotTurn { text, attempts, used_index } => {
            open_turn(entry, Role::Bot)?;
            require_mode(entry, Mode::Live)?;
            let attempts = attempts
                .iter()
                .map(|a| attempt(entry, a.query.clone(), a.knowledge.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            push_bot(&mut next, text, attempts, *used_index)?;
        }
        Event::Rating { rating, qc } => {
            if entry.closed() {
                return Err(EngineError::AlreadyRated);
            }
            if entry.session.context.bot_turns().next().is_none() {
                return Err(EngineError::NoBotTurn);
            }
            next.session.set_rating(*rating).map_err(|_| EngineError::InvalidRating(*rating))?;
            next.qc = Some(qc.clone());
        }
    }
    Ok(next)
}

fn require_mode(entry: &SessionEntry, mode: Mode) -> Result<(), EngineError> {
    if entry.mode != mode {
        return Err(EngineError::WrongMode { expected: mode });
    }
    Ok(())
}

fn push_bot(
    next: &mut SessionEntry,
    text: &str,
    attempts: Vec<Attempt>,
    used_index: Option<usize>,
) -> Result<(), EngineError> {
    let service = if attempts.is_empty() {
        if used_index.is_some() {
            return Err(EngineError::InvalidRequest("used_index given without attempts".into()));
        }
        None
    } else {
        Some(ServiceInteraction::new(attempts, used_index).map_err(|e| EngineError::InvalidRequest(e.to_string()))?)
    };
    let turn = Turn::bot(text, service).map_err(|e| EngineError::InvalidRequest(e.to_string()))?;
    next.session.context.push(turn).map_err(|e| EngineError::InvalidRequest(e.to_string()))
}

#[derive(Debug)]
pub struct SessionStore {
    path: Option<PathBuf>,
    file: Option<File>,
    sessions: BTreeMap<String, SessionEntry>,
    seq: u64,
}

impl SessionStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        SessionStore { path: None, file: None, sessions: BTreeMap::new(), seq: 0 }
    }

    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self, EngineError> {
        let storage = |e: std::io::Error| EngineError::Storage(format!("{}: {e}", path.display()));
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(path).map_err(storage)?;
        let mut store = SessionStore { path: Some(path.to_path_buf()), file: None, sessions: BTreeMap::new(), seq: 0 };
        let mut reader = BufReader::new(&file);
        let mut good_len: u64 = 0;
        let mut line = Vec::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let n = reader.read_until(b'\n', &mut line).map_err(storage)?;
            if n == 0 {
                break;
            }
            lineno += 1;
            // a line without its newline is a torn tail from a crash mid-write
            if line.last() != Some(&b'\n') {
                break;
            }
            let rec: EventRecord =
                serde_json::from_slice(&line).map_err(|e| EngineError::Storage(format!("line {lineno}: {e}")))?;
            store.replay_one(rec).map_err(|e| EngineError::Storage(format!("line {lineno}: {e}")))?;
            good_len += n as u64;
        }
        drop(reader);
        if file.metadata().map_err(storage)?.len() != good_len {
            file.set_len(good_len).map_err(storage)?;
            file.seek(SeekFrom::End(0)).map_err(storage)?;
        }
        store.file = Some(file);
        Ok(store)
    }

    fn replay_one(&mut self, rec: EventRecord) -> Result<(), EngineError> {
        if rec.seq != self.seq + 1 {
            return Err(EngineError::Storage(format!("sequence gap: expected {}, found {}", self.seq + 1, rec.seq)));
        }
        let next = transition(self.sessions.get(&rec.session), &rec)?;
        self.seq = rec.seq;
        self.sessions.insert(rec.session, next);
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Validates, persists and applies one event.
    pub fn append(&mut self, session: &str, event: Event) -> Result<&SessionEntry, EngineError> {
        let now = Utc::now();
        let at = self.sessions.get(session).map_or(now, |e| now.max(e.last_at));
        let rec = EventRecord { seq: self.seq + 1, at, session: session.to_string(), event };
        let next = transition(self.sessions.get(session), &rec)?;
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(&rec).map_err(|e| EngineError::Storage(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| EngineError::Storage(e.to_string()))?;
        }
        self.seq = rec.seq;
        self.sessions.insert(rec.session.clone(), next);
        Ok(&self.sessions[session])
    }

    pub fn get(&self, id: &str) -> Option<&SessionEntry> {
        self.sessions.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sessions.contains_key(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionEntry> {
        self.sessions.values()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    /// Comparable copy of the whole index.
    pub fn snapshot(&self) -> BTreeMap<String, SessionEntry> {
        self.sessions.clone()
    }
}
