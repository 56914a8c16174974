//! HTTP client for an external model adapter.
//!
//! Request body:
//! `{"task", "state": {time, lat, lon, name}, "context": [{role, text}], "knowledge"?, "want_logprobs"}`
//! plus the canonical `prompt` text. Reply: `{"text", "token_logprobs"?: [[token, logprob]]}`;
//! unknown reply fields are ignored.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{assemble_prompt, Completion, GenerationError, Generator, PromptSegments, Task, TokenScores};
use crate::types::format_time;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize)]
struct WireState<'a> {
    time: String,
    lat: f64,
    lon: f64,
    name: &'a str,
}

#[derive(Debug, Serialize)]
struct WireTurn<'a> {
    role: &'a str,
    text: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    task: Task,
    state: WireState<'a>,
    context: Vec<WireTurn<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    knowledge: Option<&'a str>,
    want_logprobs: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    topic: Option<&'a crate::types::TopicPath>,
    prompt: String,
}

#[derive(Debug, Deserialize)]
struct WireReply {
    text: String,
    #[serde(default)]
    token_logprobs: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Clone)]
pub struct AdapterGenerator {
    endpoint: String,
    agent: ureq::Agent,
}

impl AdapterGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        AdapterGenerator { endpoint: endpoint.into(), agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn wire_request(seg: &PromptSegments, want_logprobs: bool) -> WireRequest<'_> {
    WireRequest {
        task: seg.task(),
        state: WireState {
            time: format_time(&seg.state.time),
            lat: seg.state.latitude,
            lon: seg.state.longitude,
            name: &seg.state.location_name,
        },
        context: seg.context.turns().iter().map(|t| WireTurn { role: t.role().as_str(), text: t.text() }).collect(),
        knowledge: seg.knowledge(),
        want_logprobs,
        topic: seg.topic.as_ref(),
        prompt: assemble_prompt(seg),
    }
}

fn parse_reply(body: &str) -> Result<Completion, GenerationError> {
    let reply: WireReply =
        serde_json::from_str(body).map_err(|e| GenerationError::AdapterMalformedReply(e.to_string()))?;
    let token_logprobs = reply
        .token_logprobs
        .map(TokenScores::new)
        .transpose()
        .map_err(|e| GenerationError::AdapterMalformedReply(e.to_string()))?;
    Ok(Completion { text: reply.text, token_logprobs })
}

impl Generator for AdapterGenerator {
    fn complete(&self, seg: &PromptSegments, want_logprobs: bool) -> Result<Completion, GenerationError> {
        let body = wire_request(seg, want_logprobs);
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| GenerationError::AdapterUnreachable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GenerationError::AdapterMalformedReply(format!("HTTP status {status}")));
        }
        let text =
            resp.body_mut().read_to_string().map_err(|e| GenerationError::AdapterMalformedReply(e.to_string()))?;
        parse_reply(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_time, DialogueContext, Role, SpatiotemporalState, Turn};

    fn seg() -> PromptSegments {
        let state = SpatiotemporalState::new(parse_time("2022-08-12T15:00+08:00").unwrap(), 39.99, 116.3, "Haidian");
        let mut c = DialogueContext::default();
        c.push(Turn::new(Role::User, "hi", None).unwrap()).unwrap();
        PromptSegments::response(state, c, Some("k".into()))
    }

    #[test]
    fn request_field_names() {
        let v = serde_json::to_value(wire_request(&seg(), true)).unwrap();
        assert_eq!(v["task"], "response");
        assert_eq!(v["state"]["time"], "2022-08-12T15:00+08:00");
        assert_eq!(v["state"]["lat"], 39.99);
        assert_eq!(v["state"]["name"], "Haidian");
        assert_eq!(v["context"][0]["role"], "user");
        assert_eq!(v["knowledge"], "k");
        assert_eq!(v["want_logprobs"], true);
        assert!(v["prompt"].as_str().unwrap().starts_with("[TASK=Response]"));
    }

    #[test]
    fn reply_parsing() {
        let c = parse_reply(r#"{"text":"x","token_logprobs":[["a",-0.5]],"extra":1}"#).unwrap();
        assert_eq!(c.text, "x");
        assert_eq!(c.token_logprobs.unwrap().len(), 1);
        assert!(parse_reply(r#"{"text":"x"}"#).unwrap().token_logprobs.is_none());
        assert!(matches!(parse_reply("{}"), Err(GenerationError::AdapterMalformedReply(_))));
        assert!(parse_reply(r#"{"text":"x","token_logprobs":[]}"#).is_err());
        assert!(parse_reply(r#"{"text":"x","token_logprobs":[["a",0.5]]}"#).is_err());
    }

    #[test]
    fn unreachable_endpoint() {
        // bind then drop to get a port nobody listens on
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let g = AdapterGenerator::with_timeout(format!("http://127.0.0.1:{port}/"), Duration::from_secs(2));
        assert!(matches!(g.complete(&seg(), false), Err(GenerationError::AdapterUnreachable(_))));
    }
}
