//! Service-grounded dialogue engine.
//!
//! A BOT turn runs in two stages. First a request is built from the dialogue
//! context and the speaker's spatiotemporal state (or the generator declines
//! with the `no request` sentinel). The request goes through the [`gateway`],
//! which routes it to a skill and returns a condensed knowledge paragraph.
//! Second, the response is generated from state, context and knowledge.
//!
//! Around that pipeline the crate carries the session record format and its
//! quality-control rules ([`dataset`]), the automatic metric suite
//! ([`metrics`]), and a small data-parallel executor ([`exec`]) used by the
//! batch paths.

pub mod dataset;
pub mod exec;
pub mod gateway;
pub mod generation;
pub mod metrics;
pub mod text;
pub mod types;

pub use exec::Execution;
pub use gateway::{Gateway, GatewayError};
pub use generation::{GenerationError, GeneratorBinding, GeneratorOutcome};

pub use types::{
    Attempt, DialogueContext, KnowledgeSource, Role, ServiceInteraction, ServiceKnowledge, ServiceRequest, Session,
    SkillId, SpatiotemporalState, Split, TopicCategory, TopicPath, Turn, UserProfile,
};

/// Generator output meaning "answer from context alone".
pub const NO_REQUEST: &str = "no request";
