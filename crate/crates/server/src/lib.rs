//! Session engine and HTTP service for live chat (human USER, machine BOT)
//! and data collection (two humans, the BOT seat querying services), backed
//! by an append-only event log.

pub mod engine;
pub mod error;
pub mod http;
pub mod matching;
pub mod store;

pub use engine::{CreateSession, Engine, EngineConfig, LocationSpec, SessionView, Viewer};
pub use error::EngineError;
pub use http::{router, serve};
pub use matching::{MatchQueue, MatchState};
pub use store::{Event, EventRecord, Mode, SessionEntry, SessionStore};
