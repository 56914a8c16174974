//! Segment-tagged prompt serialization.
//!
//! ```text
//! [TASK=Response] [STATE] 2022-08-12T15:00+08:00|39.99|116.3|Haidian district, Beijing [CTX] user:…|bot:…|user:… [KG] …
//! ```
//!
//! Sections are `[TAG] payload` joined by one space. Inside payloads the
//! characters `\ [ ] |` are backslash-escaped, so an unescaped `[` always
//! opens a section and an unescaped `|` always separates fields. That makes
//! the encoding injective; [`decode_prompt`] inverts it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{format_time, parse_time, DialogueContext, ModelError, Role, SpatiotemporalState, TopicPath, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Query,
    Response,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Query => "Query",
            Task::Response => "Response",
        })
    }
}

/// Everything a generator sees for one call. Knowledge only accompanies the
/// response task; the topic is included only when the caller opts in.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSegments {
    task: Task,
    pub state: SpatiotemporalState,
    pub topic: Option<TopicPath>,
    pub context: DialogueContext,
    knowledge: Option<String>,
}

impl PromptSegments {
    pub fn query(state: SpatiotemporalState, context: DialogueContext) -> Self {
        PromptSegments { task: Task::Query, state, topic: None, context, knowledge: None }
    }

    pub fn response(state: SpatiotemporalState, context: DialogueContext, knowledge: Option<String>) -> Self {
        PromptSegments { task: Task::Response, state, topic: None, context, knowledge }
    }

    pub fn with_topic(mut self, topic: Option<TopicPath>) -> Self {
        self.topic = topic;
        self
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn knowledge(&self) -> Option<&str> {
        self.knowledge.as_deref()
    }

    pub fn last_user_text(&self) -> Option<&str> {
        self.context.turns().iter().rev().find(|t| t.role() == Role::User).map(Turn::text)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '[' | ']' | '|') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Splits on unescaped `sep`, leaving escapes intact in the pieces.
fn split_unescaped(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            out.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    out.push(&s[start..]);
    out
}

pub fn assemble_prompt(p: &PromptSegments) -> String {
    let st = &p.state;
    let mut out = format!(
        "[TASK={}] [STATE] {}|{}|{}|{}",
        p.task,
        format_time(&st.time),
        st.latitude,
        st.longitude,
        escape(&st.location_name)
    );
    if let Some(t) = &p.topic {
        out.push_str(" [TOPIC] ");
        out.push_str(t.level1.as_str());
        out.push('|');
        out.push_str(&escape(&t.level2));
        if let Some(l3) = &t.level3 {
            out.push('|');
            out.push_str(&escape(l3));
        }
    }
    out.push_str(" [CTX] ");
    let turns: Vec<String> =
        p.context.turns().iter().map(|t| format!("{}:{}", t.role().as_str(), escape(t.text()))).collect();
    out.push_str(&turns.join("|"));
    if let Some(k) = &p.knowledge {
        out.push_str(" [KG] ");
        out.push_str(&escape(k));
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptDecodeError {
    #[error("malformed prompt: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn bad(msg: impl Into<String>) -> PromptDecodeError {
    PromptDecodeError::Malformed(msg.into())
}

/// Inverse of [`assemble_prompt`].
pub fn decode_prompt(s: &str) -> Result<PromptSegments, PromptDecodeError> {
    // section starts: unescaped '['
    let mut starts = Vec::new();
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '[' {
            starts.push(i);
        }
    }
    let mut sections = Vec::new();
    for (n, &st) in starts.iter().enumerate() {
        let end = starts.get(n + 1).map_or(s.len(), |&e| e);
        let raw = &s[st..end];
        let close = raw.find(']').ok_or_else(|| bad("unterminated tag"))?;
        let tag = &raw[1..close];
        let mut payload = &raw[close + 1..];
        // one joining space before the next section, one after the tag
        if n + 1 < starts.len() {
            payload = payload.strip_suffix(' ').ok_or_else(|| bad("missing separator"))?;
        }
        payload = payload.strip_prefix(' ').unwrap_or(payload);
        sections.push((tag, payload));
    }
    let mut iter = sections.into_iter();
    let task = match iter.next() {
        Some(("TASK=Query", "")) => Task::Query,
        Some(("TASK=Response", "")) => Task::Response,
        other => return Err(bad(format!("bad task section {other:?}"))),
    };
    let state = match iter.next() {
        Some(("STATE", payload)) => {
            let f = split_unescaped(payload, '|');
            if f.len() != 4 {
                return Err(bad("state needs 4 fields"));
            }
            let time = parse_time(f[0])?;
            let lat = f[1].parse().map_err(|_| bad("bad latitude"))?;
            let lon = f[2].parse().map_err(|_| bad("bad longitude"))?;
            SpatiotemporalState::new(time, lat, lon, unescape(f[3]))
        }
        other => return Err(bad(format!("bad state section {other:?}"))),
    };
    let mut next = iter.next();
    let mut topic = None;
    if let Some(("TOPIC", payload)) = next {
        let parts: Vec<String> = split_unescaped(payload, '|').into_iter().map(unescape).collect();
        let l1 = parts.first().ok_or_else(|| bad("empty topic"))?.parse()?;
        topic = Some(match parts.len() {
            2 => TopicPath::new(l1, parts[1].clone(), None)?,
            3 => TopicPath::new(l1, parts[1].clone(), Some(parts[2].clone()))?,
            _ => return Err(bad("topic needs 2 or 3 levels")),
        });
        next = iter.next();
    }
    let context = match next {
        Some(("CTX", "")) => DialogueContext::default(),
        Some(("CTX", payload)) => {
            let mut turns = Vec::new();
            for piece in split_unescaped(payload, '|') {
                let (role, text) = piece.split_once(':').ok_or_else(|| bad("turn without role"))?;
                let role = match role {
                    "user" => Role::User,
                    "bot" => Role::Bot,
                    r => return Err(bad(format!("unknown role {r:?}"))),
                };
                turns.push(Turn::new(role, unescape(text), None)?);
            }
            DialogueContext::new(turns)?
        }
        other => return Err(bad(format!("bad context section {other:?}"))),
    };
    let knowledge = match iter.next() {
        None => None,
        Some(("KG", payload)) if task == Task::Response => Some(unescape(payload)),
        other => return Err(bad(format!("unexpected section {other:?}"))),
    };
    if iter.next().is_some() {
        return Err(bad("trailing sections"));
    }
    Ok(PromptSegments { task, state, topic, context, knowledge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TopicCategory;

    fn state() -> SpatiotemporalState {
        SpatiotemporalState::new(
            parse_time("2022-08-12T15:00+08:00").unwrap(),
            39.99,
            116.30,
            "Haidian district, Beijing",
        )
    }

    fn ctx(texts: &[&str]) -> DialogueContext {
        let mut c = DialogueContext::default();
        for (i, t) in texts.iter().enumerate() {
            let role = if i % 2 == 0 { Role::User } else { Role::Bot };
            c.push(Turn::new(role, *t, None).unwrap()).unwrap();
        }
        c
    }

    #[test]
    fn query_prompt_prefix() {
        let p = PromptSegments::query(state(), ctx(&["马上到周末了", "那很棒呀", "希望能有个好天气。"]));
        let s = assemble_prompt(&p);
        assert!(s.starts_with("[TASK=Query] [STATE] 2022-08-12T15:00+08:00|39.99|116.3|Haidian district, Beijing [CTX] user:马上到周末了|bot:"), "{s}");
        assert!(!s.contains("[KG]"));
    }

    #[test]
    fn knowledge_section_optional() {
        let none = assemble_prompt(&PromptSegments::response(state(), ctx(&["hi"]), None));
        assert!(!none.contains("[KG]"));
        let some = assemble_prompt(&PromptSegments::response(state(), ctx(&["hi"]), Some("k".into())));
        assert!(some.ends_with(" [KG] k"));
    }

    #[test]
    fn hostile_payloads_round_trip() {
        let p = PromptSegments::response(state(), ctx(&["a|b [CTX] c\\", " bot:x ", "]["]), Some(" [KG] |\\ ".into()))
            .with_topic(Some(TopicPath::new(TopicCategory::Sports, "bad|min", Some("Lin [Dan]".into())).unwrap()));
        let s = assemble_prompt(&p);
        assert_eq!(decode_prompt(&s).unwrap(), p);
    }

    #[test]
    fn empty_context_round_trips() {
        let p = PromptSegments::query(state(), DialogueContext::default());
        assert_eq!(decode_prompt(&assemble_prompt(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_prompt("nonsense").is_err());
        assert!(decode_prompt("[TASK=Query] [STATE] x").is_err());
        assert!(decode_prompt("[TASK=Query] [STATE] 2022-08-12T15:00+08:00|1|2|n [CTX] user:a [KG] k").is_err());
    }
}
