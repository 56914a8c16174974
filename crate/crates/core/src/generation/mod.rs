//! Two-stage generation: query (or the `no request` sentinel), then response.
//!
//! A [`GeneratorBinding`] wraps any [`Generator`]; the same binding serves
//! both tasks, which differ only in the task label of the prompt. Token
//! log-probabilities, when a generator supplies them, become perplexities
//! through [`nll_and_ppl`].

pub mod adapter;
pub mod baseline;
pub mod prompt;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::types::{
    Attempt, DialogueContext, ModelError, Role, ServiceInteraction, ServiceRequest, Session, SpatiotemporalState,
    TopicPath, Turn,
};
use crate::NO_REQUEST;

pub use adapter::AdapterGenerator;
pub use baseline::BaselineGenerator;
pub use prompt::{assemble_prompt, decode_prompt, PromptDecodeError, PromptSegments, Task};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("model adapter unreachable: {0}")]
    AdapterUnreachable(String),
    #[error("model adapter reply malformed: {0}")]
    AdapterMalformedReply(String),
    #[error("token scores are empty")]
    EmptyScores,
    #[error("invalid token score: {0}")]
    InvalidScore(String),
    #[error("generator does not return log-probabilities")]
    LogprobsUnsupported,
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl GenerationError {
    pub fn code(&self) -> &'static str {
        match self {
            GenerationError::AdapterUnreachable(_) => "adapter_unreachable",
            GenerationError::AdapterMalformedReply(_) => "adapter_malformed_reply",
            GenerationError::EmptyScores => "empty_scores",
            GenerationError::InvalidScore(_) => "invalid_score",
            GenerationError::LogprobsUnsupported => "logprobs_unsupported",
            GenerationError::InvalidContext(_) => "invalid_context",
            GenerationError::Gateway(e) => e.code(),
            GenerationError::Model(_) => "invalid_record",
        }
    }
}

/// Result of the query stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "decision", content = "query", rename_all = "snake_case")]
pub enum GeneratorOutcome {
    NoRequest,
    Query(String),
}

impl GeneratorOutcome {
    /// Maps raw generator text: the sentinel means no request, anything else
    /// is trimmed into a query. Empty text is not a valid reply.
    pub fn from_text(text: &str) -> Result<Self, GenerationError> {
        let t = text.trim();
        if t == NO_REQUEST {
            Ok(GeneratorOutcome::NoRequest)
        } else if t.is_empty() {
            Err(GenerationError::AdapterMalformedReply("empty query text".into()))
        } else {
            Ok(GeneratorOutcome::Query(t.to_string()))
        }
    }

    pub fn is_query(&self) -> bool {
        matches!(self, GeneratorOutcome::Query(_))
    }

    pub fn query(&self) -> Option<&str> {
        match self {
            GeneratorOutcome::Query(q) => Some(q),
            GeneratorOutcome::NoRequest => None,
        }
    }
}

impl fmt::Display for GeneratorOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.query().unwrap_or(NO_REQUEST))
    }
}

/// Ordered `(token, log-probability)` pairs; non-empty, finite, each ≤ 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenScores(Vec<(String, f64)>);

impl TokenScores {
    pub fn new(scores: Vec<(String, f64)>) -> Result<Self, GenerationError> {
        if scores.is_empty() {
            return Err(GenerationError::EmptyScores);
        }
        for (tok, lp) in &scores {
            if !lp.is_finite() || *lp > 0.0 {
                return Err(GenerationError::InvalidScore(format!("{tok:?} has log-probability {lp}")));
            }
        }
        Ok(TokenScores(scores))
    }

    pub fn logprobs(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|(_, lp)| *lp)
    }

    pub fn tokens(&self) -> &[(String, f64)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'de> Deserialize<'de> for TokenScores {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<(String, f64)>::deserialize(d)?;
        TokenScores::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Mean negative log-likelihood and its exponential, the perplexity.
pub fn nll_and_ppl(scores: &TokenScores) -> (f64, f64) {
    let nll = -scores.logprobs().sum::<f64>() / scores.len() as f64;
    // -0.0 from an all-zero sum
    let nll = nll.max(0.0);
    (nll, nll.exp())
}

/// Raw reply of one generator call.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub token_logprobs: Option<TokenScores>,
}

/// Anything that maps prompt segments to text. Implementations must be
/// shareable across threads; the orchestrator calls them concurrently for
/// different sessions.
pub trait Generator: Send + Sync {
    fn complete(&self, segments: &PromptSegments, want_logprobs: bool) -> Result<Completion, GenerationError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorKind {
    Baseline,
    Adapter { endpoint: String },
    Custom { name: String },
}

/// A generator plus what it can do.
#[derive(Clone)]
pub struct GeneratorBinding {
    kind: GeneratorKind,
    generator: Arc<dyn Generator>,
    returns_logprobs: bool,
}

impl fmt::Debug for GeneratorBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorBinding")
            .field("kind", &self.kind)
            .field("returns_logprobs", &self.returns_logprobs)
            .finish()
    }
}

impl GeneratorBinding {
    pub fn baseline() -> Self {
        Self::baseline_with(BaselineGenerator::default())
    }

    pub fn baseline_with(g: BaselineGenerator) -> Self {
        GeneratorBinding { kind: GeneratorKind::Baseline, generator: Arc::new(g), returns_logprobs: false }
    }

    pub fn adapter(g: AdapterGenerator) -> Self {
        GeneratorBinding {
            kind: GeneratorKind::Adapter { endpoint: g.endpoint().to_string() },
            generator: Arc::new(g),
            returns_logprobs: true,
        }
    }

    pub fn custom(name: impl Into<String>, g: Arc<dyn Generator>, returns_logprobs: bool) -> Self {
        GeneratorBinding { kind: GeneratorKind::Custom { name: name.into() }, generator: g, returns_logprobs }
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn returns_logprobs(&self) -> bool {
        self.returns_logprobs
    }

    fn call(&self, segments: &PromptSegments, opts: GenerationOptions) -> Result<Completion, GenerationError> {
        if opts.want_logprobs && !self.returns_logprobs {
            return Err(GenerationError::LogprobsUnsupported);
        }
        let c = self.generator.complete(segments, opts.want_logprobs)?;
        if opts.want_logprobs && c.token_logprobs.is_none() {
            return Err(GenerationError::AdapterMalformedReply("log-probabilities requested but missing".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOptions {
    /// Serialize the USER's topic path into the prompt.
    pub include_topic: bool,
    /// Ask the generator for token log-probabilities.
    pub want_logprobs: bool,
}

fn check_context(context: &DialogueContext) -> Result<(), GenerationError> {
    match context.last() {
        Some(t) if t.role() == Role::User => Ok(()),
        Some(_) => Err(GenerationError::InvalidContext("last turn is not a USER turn".into())),
        None => Err(GenerationError::InvalidContext("context is empty".into())),
    }
}

/// Query stage. The sentinel maps to [`GeneratorOutcome::NoRequest`].
pub fn generate_query(
    state: &SpatiotemporalState,
    topic: Option<&TopicPath>,
    context: &DialogueContext,
    g: &GeneratorBinding,
    opts: GenerationOptions,
) -> Result<(GeneratorOutcome, Option<TokenScores>), GenerationError> {
    check_context(context)?;
    let seg =
        PromptSegments::query(state.clone(), context.clone()).with_topic(topic.filter(|_| opts.include_topic).cloned());
    let c = g.call(&seg, opts)?;
    Ok((GeneratorOutcome::from_text(&c.text)?, c.token_logprobs))
}

/// Response stage, optionally grounded in `knowledge`.
pub fn generate_response(
    state: &SpatiotemporalState,
    topic: Option<&TopicPath>,
    context: &DialogueContext,
    knowledge: Option<&str>,
    g: &GeneratorBinding,
    opts: GenerationOptions,
) -> Result<(String, Option<TokenScores>), GenerationError> {
    check_context(context)?;
    let seg = PromptSegments::response(state.clone(), context.clone(), knowledge.map(str::to_string))
        .with_topic(topic.filter(|_| opts.include_topic).cloned());
    let c = g.call(&seg, opts)?;
    let text = c.text.trim();
    if text.is_empty() {
        return Err(GenerationError::AdapterMalformedReply("empty response text".into()));
    }
    Ok((text.to_string(), c.token_logprobs))
}

/// A generated BOT turn with whatever scores the generator supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct BotTurn {
    pub turn: Turn,
    pub decision: GeneratorOutcome,
    pub query_scores: Option<TokenScores>,
    pub response_scores: Option<TokenScores>,
}

/// Runs both stages for the next BOT turn of `session`. The session is only
/// read; the caller appends `turn` once every stage has succeeded.
pub fn bot_turn(
    session: &Session,
    g: &GeneratorBinding,
    gateway: &Gateway,
    opts: GenerationOptions,
) -> Result<BotTurn, GenerationError> {
    let state = session.state();
    let topic = Some(&session.profile.topic);
    let context = &session.context;
    let (decision, query_scores) = generate_query(state, topic, context, g, opts)?;
    let (service, knowledge) = match &decision {
        GeneratorOutcome::Query(q) => {
            let request = ServiceRequest::new(q.clone(), state.clone())?;
            let knowledge = gateway.dispatch(&request)?;
            let text = knowledge.text.clone();
            (Some(ServiceInteraction::new(vec![Attempt { request, knowledge }], Some(0))?), Some(text))
        }
        GeneratorOutcome::NoRequest => (None, None),
    };
    let (response, response_scores) = generate_response(state, topic, context, knowledge.as_deref(), g, opts)?;
    Ok(BotTurn { turn: Turn::bot(response, service)?, decision, query_scores, response_scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_time, Split, TopicCategory, UserProfile};
    use crate::SkillId;

    struct Fixed(&'static str, Option<Vec<f64>>);

    impl Generator for Fixed {
        fn complete(&self, _: &PromptSegments, _: bool) -> Result<Completion, GenerationError> {
            let scores = self
                .1
                .as_ref()
                .map(|v| TokenScores::new(v.iter().map(|&l| ("t".to_string(), l)).collect()))
                .transpose()?;
            Ok(Completion { text: self.0.into(), token_logprobs: scores })
        }
    }

    fn session(texts: &[&str]) -> Session {
        let state = SpatiotemporalState::new(
            parse_time("2022-08-12T15:00+08:00").unwrap(),
            39.99,
            116.30,
            "Haidian district, Beijing",
        );
        let topic = TopicPath::new(TopicCategory::Travel, "outing", None).unwrap();
        let mut s = Session::new("s1", UserProfile { topic, assigned_state: state }, Split::Live);
        for (i, t) in texts.iter().enumerate() {
            let role = if i % 2 == 0 { Role::User } else { Role::Bot };
            s.context.push(Turn::new(role, *t, None).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn ppl_examples() {
        let sc = |v: &[f64]| TokenScores::new(v.iter().map(|&l| ("x".to_string(), l)).collect()).unwrap();
        let (nll, ppl) = nll_and_ppl(&sc(&[(0.01f64).ln(); 7]));
        assert!((ppl - 100.0).abs() < 1e-9 && (nll - 100f64.ln()).abs() < 1e-12);
        assert_eq!(nll_and_ppl(&sc(&[0.0, 0.0])), (0.0, 1.0));
        let (nll, ppl) = nll_and_ppl(&sc(&[0.5f64.ln(), 0.25f64.ln()]));
        assert!((nll - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!((ppl - 2f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(TokenScores::new(vec![]), Err(GenerationError::EmptyScores));
        assert!(TokenScores::new(vec![("a".into(), 0.1)]).is_err());
        assert!(TokenScores::new(vec![("a".into(), f64::NEG_INFINITY)]).is_err());
    }

    #[test]
    fn sentinel_mapping() {
        assert_eq!(GeneratorOutcome::from_text("  no request\n").unwrap(), GeneratorOutcome::NoRequest);
        assert_eq!(GeneratorOutcome::from_text(" q ").unwrap(), GeneratorOutcome::Query("q".into()));
        assert!(GeneratorOutcome::from_text("  ").is_err());
        assert_eq!(GeneratorOutcome::from_text("no request please").unwrap().query(), Some("no request please"));
    }

    #[test]
    fn table6_bot_turn() {
        let s = session(&[
            "It's the weekend soon, I'm going to go on an outing with my friends.",
            "That's great, enjoy your vacation.",
            "Hope for good weather.",
        ]);
        let out =
            bot_turn(&s, &GeneratorBinding::baseline(), &Gateway::builtin(), GenerationOptions::default()).unwrap();
        let svc = out.turn.service().unwrap();
        assert_eq!(svc.attempts().len(), 1);
        assert_eq!(svc.used_index(), Some(0));
        assert_eq!(svc.attempts()[0].knowledge.skill, SkillId::Weather);
        assert!(out.turn.text().contains("18") && out.turn.text().contains("26"), "{}", out.turn.text());
    }

    #[test]
    fn no_request_turn_has_no_service() {
        let s = session(&["thanks, bye"]);
        let out =
            bot_turn(&s, &GeneratorBinding::baseline(), &Gateway::builtin(), GenerationOptions::default()).unwrap();
        assert!(out.turn.service().is_none());
        assert_eq!(out.decision, GeneratorOutcome::NoRequest);
    }

    #[test]
    fn context_preconditions() {
        let g = GeneratorBinding::baseline();
        let s = session(&["a", "b"]);
        let err = bot_turn(&s, &g, &Gateway::builtin(), GenerationOptions::default()).unwrap_err();
        assert_eq!(err.code(), "invalid_context");
        let s = session(&[]);
        assert!(bot_turn(&s, &g, &Gateway::builtin(), GenerationOptions::default()).is_err());
    }

    #[test]
    fn logprobs_only_from_capable_bindings() {
        let s = session(&["hi"]);
        let opts = GenerationOptions { want_logprobs: true, ..Default::default() };
        let err = generate_query(s.state(), None, &s.context, &GeneratorBinding::baseline(), opts).unwrap_err();
        assert_eq!(err, GenerationError::LogprobsUnsupported);
        let g = GeneratorBinding::custom("fixed", Arc::new(Fixed("no request", Some(vec![-1.0]))), true);
        let (o, sc) = generate_query(s.state(), None, &s.context, &g, opts).unwrap();
        assert_eq!(o, GeneratorOutcome::NoRequest);
        assert_eq!(sc.unwrap().len(), 1);
        let g = GeneratorBinding::custom("fixed", Arc::new(Fixed("q", None)), true);
        assert!(generate_query(s.state(), None, &s.context, &g, opts).is_err());
    }
}
