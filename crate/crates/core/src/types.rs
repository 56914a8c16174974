//! Domain types shared by every module: spatiotemporal state, topics, service
//! requests and knowledge, turns, dialogue contexts and sessions.
//!
//! All types are plain immutable values (`Send + Sync`). Constructors that
//! can violate an invariant return [`ModelError`].

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::NO_REQUEST;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid spatiotemporal state: {}", join_violations(.0))]
    InvalidState(Vec<StateViolation>),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("query must not be the no-request sentinel")]
    SentinelQuery,
    #[error("turn text must not be empty")]
    EmptyText,
    #[error("service interaction attached to a USER turn")]
    ServiceOnUserTurn,
    #[error("turn {index} should be {expected}")]
    RoleOrder { index: usize, expected: Role },
    #[error("used_index {index} out of range for {len} attempts")]
    UsedIndexOutOfRange { index: usize, len: usize },
    #[error("rating {0} outside 0..=5")]
    RatingOutOfRange(u8),
    #[error("invalid topic: {0}")]
    InvalidTopic(String),
    #[error("invalid time {0:?}")]
    InvalidTime(String),
}

fn join_violations(v: &[StateViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

// ---------------------------------------------------------------------------
// time

/// Formats a civil time as `YYYY-MM-DDTHH:MM±hh:mm`, adding `:SS` only when
/// the seconds are non-zero.
pub fn format_time(t: &DateTime<FixedOffset>) -> String {
    if t.second() == 0 {
        t.format("%Y-%m-%dT%H:%M%:z").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%:z").to_string()
    }
}

/// Parses the forms produced by [`format_time`] plus full RFC 3339.
/// Sub-second precision is discarded.
pub fn parse_time(s: &str) -> Result<DateTime<FixedOffset>, ModelError> {
    let s = s.trim();
    let parsed = DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M%:z")
        .or_else(|_| DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%:z"))
        .or_else(|_| DateTime::parse_from_rfc3339(s))
        .map_err(|_| ModelError::InvalidTime(s.to_string()))?;
    Ok(parsed.with_nanosecond(0).unwrap_or(parsed))
}

mod time_serde {
    use super::*;

    pub fn serialize<S: Serializer>(t: &DateTime<FixedOffset>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_time(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<FixedOffset>, D::Error> {
        let raw = String::deserialize(d)?;
        parse_time(&raw).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// spatiotemporal state

/// Wall-clock time plus geographic position, attached to every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatiotemporalState {
    #[serde(with = "time_serde")]
    pub time: DateTime<FixedOffset>,
    #[serde(rename = "lat")]
    pub latitude: f64,
    #[serde(rename = "lon")]
    pub longitude: f64,
    #[serde(rename = "name")]
    pub location_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateViolation {
    LatitudeOutOfRange,
    LongitudeOutOfRange,
    MissingLocationName,
    SubsecondTime,
}

impl fmt::Display for StateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateViolation::LatitudeOutOfRange => "latitude out of range",
            StateViolation::LongitudeOutOfRange => "longitude out of range",
            StateViolation::MissingLocationName => "location name missing",
            StateViolation::SubsecondTime => "time carries sub-second precision",
        })
    }
}

impl SpatiotemporalState {
    pub fn new(time: DateTime<FixedOffset>, latitude: f64, longitude: f64, location_name: impl Into<String>) -> Self {
        SpatiotemporalState { time, latitude, longitude, location_name: location_name.into() }
    }

    /// Builds a state and rejects it unless [`validate_state`] passes.
    pub fn try_new(
        time: DateTime<FixedOffset>,
        latitude: f64,
        longitude: f64,
        location_name: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let s = Self::new(time, latitude, longitude, location_name);
        validate_state(&s).map_err(ModelError::InvalidState)?;
        Ok(s)
    }

    /// Civil date in the state's own offset.
    pub fn local_date(&self) -> chrono::NaiveDate {
        self.time.date_naive()
    }
}

/// Returns every violated invariant of `s`; `Ok` iff there are none.
pub fn validate_state(s: &SpatiotemporalState) -> Result<(), Vec<StateViolation>> {
    let mut v = Vec::new();
    // NaN fails both range checks
    if !(-90.0..=90.0).contains(&s.latitude) {
        v.push(StateViolation::LatitudeOutOfRange);
    }
    if !(-180.0..=180.0).contains(&s.longitude) {
        v.push(StateViolation::LongitudeOutOfRange);
    }
    if s.location_name.trim().is_empty() {
        v.push(StateViolation::MissingLocationName);
    }
    if s.time.nanosecond() != 0 {
        v.push(StateViolation::SubsecondTime);
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

// ---------------------------------------------------------------------------
// topics

/// The fixed first-level topic categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicCategory {
    Life,
    Sports,
    Technology,
    Entertainment,
    LocalServices,
    Food,
    Travel,
    Education,
    Finance,
    Health,
    Culture,
    Games,
}

impl TopicCategory {
    pub const ALL: [TopicCategory; 12] = [
        TopicCategory::Life,
        TopicCategory::Sports,
        TopicCategory::Technology,
        TopicCategory::Entertainment,
        TopicCategory::LocalServices,
        TopicCategory::Food,
        TopicCategory::Travel,
        TopicCategory::Education,
        TopicCategory::Finance,
        TopicCategory::Health,
        TopicCategory::Culture,
        TopicCategory::Games,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopicCategory::Life => "life",
            TopicCategory::Sports => "sports",
            TopicCategory::Technology => "technology",
            TopicCategory::Entertainment => "entertainment",
            TopicCategory::LocalServices => "local_services",
            TopicCategory::Food => "food",
            TopicCategory::Travel => "travel",
            TopicCategory::Education => "education",
            TopicCategory::Finance => "finance",
            TopicCategory::Health => "health",
            TopicCategory::Culture => "culture",
            TopicCategory::Games => "games",
        }
    }

    pub fn label_zh(self) -> &'static str {
        match self {
            TopicCategory::Life => "生活",
            TopicCategory::Sports => "体育",
            TopicCategory::Technology => "科技",
            TopicCategory::Entertainment => "娱乐",
            TopicCategory::LocalServices => "本地服务",
            TopicCategory::Food => "美食",
            TopicCategory::Travel => "旅游",
            TopicCategory::Education => "教育",
            TopicCategory::Finance => "财经",
            TopicCategory::Health => "健康",
            TopicCategory::Culture => "文化",
            TopicCategory::Games => "游戏",
        }
    }
}

impl fmt::Display for TopicCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopicCategory {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.label_zh() == s)
            .ok_or_else(|| ModelError::InvalidTopic(format!("unknown first-level category {s:?}")))
    }
}

/// Three-tier topic: fixed category, preset subtopic, optional free-text
/// refinement. Serialized as a 2- or 3-element string array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicPath {
    pub level1: TopicCategory,
    pub level2: String,
    pub level3: Option<String>,
}

impl TopicPath {
    pub fn new(level1: TopicCategory, level2: impl Into<String>, level3: Option<String>) -> Result<Self, ModelError> {
        let level2 = level2.into();
        if level2.trim().is_empty() {
            return Err(ModelError::InvalidTopic("level-2 topic is empty".into()));
        }
        if matches!(&level3, Some(l3) if l3.trim().is_empty()) {
            return Err(ModelError::InvalidTopic("level-3 topic is empty".into()));
        }
        Ok(TopicPath { level1, level2, level3 })
    }

    fn to_parts(&self) -> Vec<String> {
        let mut v = vec![self.level1.as_str().to_string(), self.level2.clone()];
        v.extend(self.level3.clone());
        v
    }

    fn from_parts(parts: &[String]) -> Result<Self, ModelError> {
        match parts {
            [l1, l2] => TopicPath::new(l1.parse()?, l2.clone(), None),
            [l1, l2, l3] => TopicPath::new(l1.parse()?, l2.clone(), Some(l3.clone())),
            _ => Err(ModelError::InvalidTopic(format!("expected 2 or 3 levels, got {}", parts.len()))),
        }
    }
}

impl fmt::Display for TopicPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.level1, self.level2)?;
        if let Some(l3) = &self.level3 {
            write!(f, "/{l3}")?;
        }
        Ok(())
    }
}

impl Serialize for TopicPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_parts().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TopicPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = Vec::<String>::deserialize(d)?;
        TopicPath::from_parts(&parts).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub topic: TopicPath,
    pub assigned_state: SpatiotemporalState,
}

// ---------------------------------------------------------------------------
// service request / knowledge

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillId {
    Calculator,
    Calendar,
    Weather,
    Stock,
    Translation,
    Recommend,
    Search,
}

impl SkillId {
    pub const ALL: [SkillId; 7] = [
        SkillId::Calculator,
        SkillId::Calendar,
        SkillId::Weather,
        SkillId::Stock,
        SkillId::Translation,
        SkillId::Recommend,
        SkillId::Search,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillId::Calculator => "calculator",
            SkillId::Calendar => "calendar",
            SkillId::Weather => "weather",
            SkillId::Stock => "stock",
            SkillId::Translation => "translation",
            SkillId::Recommend => "recommend",
            SkillId::Search => "search",
        }
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SkillId::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown skill {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeSource {
    Fixture,
    Corpus,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRequest {
    query: String,
    pub state: SpatiotemporalState,
}

impl ServiceRequest {
    pub fn new(query: impl Into<String>, state: SpatiotemporalState) -> Result<Self, ModelError> {
        let query = query.into();
        if query.trim().is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        if query == NO_REQUEST {
            return Err(ModelError::SentinelQuery);
        }
        Ok(ServiceRequest { query, state })
    }

    pub fn query(&self) -> &str {
        &self.query
    }
}

/// Condensed knowledge paragraph returned by the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceKnowledge {
    pub text: String,
    pub skill: SkillId,
    pub source: KnowledgeSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub request: ServiceRequest,
    pub knowledge: ServiceKnowledge,
}

/// Every service attempt a BOT made for one turn, used or not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceInteraction {
    attempts: Vec<Attempt>,
    used_index: Option<usize>,
}

impl ServiceInteraction {
    pub fn new(attempts: Vec<Attempt>, used_index: Option<usize>) -> Result<Self, ModelError> {
        if let Some(index) = used_index {
            if index >= attempts.len() {
                return Err(ModelError::UsedIndexOutOfRange { index, len: attempts.len() });
            }
        }
        Ok(ServiceInteraction { attempts, used_index })
    }

    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    pub fn used_index(&self) -> Option<usize> {
        self.used_index
    }

    pub fn used(&self) -> Option<&Attempt> {
        self.used_index.map(|i| &self.attempts[i])
    }

    pub fn unused_count(&self) -> usize {
        self.attempts.len() - usize::from(self.used_index.is_some())
    }

    pub fn push(&mut self, attempt: Attempt) {
        self.attempts.push(attempt);
    }
}

// ---------------------------------------------------------------------------
// turns and sessions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Bot,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::User => Role::Bot,
            Role::Bot => Role::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Bot => "bot",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "USER",
            Role::Bot => "BOT",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    role: Role,
    text: String,
    service: Option<ServiceInteraction>,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Result<Self, ModelError> {
        Turn::new(Role::User, text, None)
    }

    pub fn bot(text: impl Into<String>, service: Option<ServiceInteraction>) -> Result<Self, ModelError> {
        Turn::new(Role::Bot, text, service)
    }

    pub fn new(role: Role, text: impl Into<String>, service: Option<ServiceInteraction>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyText);
        }
        if service.is_some() && role != Role::Bot {
            return Err(ModelError::ServiceOnUserTurn);
        }
        Ok(Turn { role, text, service })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn service(&self) -> Option<&ServiceInteraction> {
        self.service.as_ref()
    }

    /// Knowledge this turn was grounded on, if any.
    pub fn used_knowledge(&self) -> Option<&Attempt> {
        self.service.as_ref().and_then(ServiceInteraction::used)
    }
}

/// Ordered turns; USER opens and roles strictly alternate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DialogueContext {
    turns: Vec<Turn>,
}

impl DialogueContext {
    pub fn new(turns: Vec<Turn>) -> Result<Self, ModelError> {
        let mut ctx = DialogueContext::default();
        for t in turns {
            ctx.push(t)?;
        }
        Ok(ctx)
    }

    pub fn expected_role(&self) -> Role {
        self.turns.last().map_or(Role::User, |t| t.role.other())
    }

    pub fn push(&mut self, turn: Turn) -> Result<(), ModelError> {
        let expected = self.expected_role();
        if turn.role != expected {
            return Err(ModelError::RoleOrder { index: self.turns.len(), expected });
        }
        self.turns.push(turn);
        Ok(())
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn last(&self) -> Option<&Turn> {
        self.turns.last()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn bot_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.role == Role::Bot)
    }

    /// The context up to (excluding) turn `index`.
    pub fn prefix(&self, index: usize) -> DialogueContext {
        DialogueContext { turns: self.turns[..index.min(self.turns.len())].to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    SeenTest,
    UnseenTest,
    Live,
}

impl Split {
    pub const ALL: [Split; 5] = [Split::Train, Split::Valid, Split::SeenTest, Split::UnseenTest, Split::Live];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::SeenTest => "seen_test",
            Split::UnseenTest => "unseen_test",
            Split::Live => "live",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// One dialogue: the unit of storage, validation and statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub profile: UserProfile,
    pub context: DialogueContext,
    rating: Option<u8>,
    pub split: Split,
}

impl Session {
    pub fn new(id: impl Into<String>, profile: UserProfile, split: Split) -> Self {
        Session { id: id.into(), profile, context: DialogueContext::default(), rating: None, split }
    }

    pub fn rating(&self) -> Option<u8> {
        self.rating
    }

    pub fn set_rating(&mut self, rating: u8) -> Result<(), ModelError> {
        if rating > 5 {
            return Err(ModelError::RatingOutOfRange(rating));
        }
        self.rating = Some(rating);
        Ok(())
    }

    pub fn state(&self) -> &SpatiotemporalState {
        &self.profile.assigned_state
    }
}

// ---------------------------------------------------------------------------
// session wire record

#[derive(Serialize, Deserialize)]
struct SessionRecord {
    id: String,
    topic: TopicPath,
    location: LocationRecord,
    #[serde(with = "time_serde")]
    time: DateTime<FixedOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rating: Option<u8>,
    split: Split,
    turns: Vec<TurnRecord>,
}

#[derive(Serialize, Deserialize)]
struct LocationRecord {
    name: String,
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    role: Role,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service: Option<ServiceRecord>,
}

#[derive(Serialize, Deserialize)]
struct ServiceRecord {
    attempts: Vec<AttemptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    used_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct AttemptRecord {
    query: String,
    knowledge: ServiceKnowledge,
    /// Present only when the request state differs from the session state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<SpatiotemporalState>,
}

impl From<&Session> for SessionRecord {
    fn from(s: &Session) -> Self {
        let st = s.state();
        let turns = s
            .context
            .turns()
            .iter()
            .map(|t| TurnRecord {
                role: t.role,
                text: t.text.clone(),
                service: t.service.as_ref().map(|svc| ServiceRecord {
                    attempts: svc
                        .attempts
                        .iter()
                        .map(|a| AttemptRecord {
                            query: a.request.query.clone(),
                            knowledge: a.knowledge.clone(),
                            state: (a.request.state != *st).then(|| a.request.state.clone()),
                        })
                        .collect(),
                    used_index: svc.used_index,
                }),
            })
            .collect();
        SessionRecord {
            id: s.id.clone(),
            topic: s.profile.topic.clone(),
            location: LocationRecord { name: st.location_name.clone(), lat: st.latitude, lon: st.longitude },
            time: st.time,
            rating: s.rating,
            split: s.split,
            turns,
        }
    }
}

impl TryFrom<SessionRecord> for Session {
    type Error = ModelError;

    fn try_from(r: SessionRecord) -> Result<Self, Self::Error> {
        let state = SpatiotemporalState::try_new(r.time, r.location.lat, r.location.lon, r.location.name)?;
        let mut turns = Vec::with_capacity(r.turns.len());
        for t in r.turns {
            let service = match t.service {
                None => None,
                Some(svc) => {
                    let mut attempts = Vec::with_capacity(svc.attempts.len());
                    for a in svc.attempts {
                        let st = match a.state {
                            Some(s) => {
                                crate::types::validate_state(&s).map_err(ModelError::InvalidState)?;
                                s
                            }
                            None => state.clone(),
                        };
                        attempts.push(Attempt { request: ServiceRequest::new(a.query, st)?, knowledge: a.knowledge });
                    }
                    Some(ServiceInteraction::new(attempts, svc.used_index)?)
                }
            };
            turns.push(Turn::new(t.role, t.text, service)?);
        }
        let mut session = Session {
            id: r.id,
            profile: UserProfile { topic: r.topic, assigned_state: state },
            context: DialogueContext::new(turns)?,
            rating: None,
            split: r.split,
        };
        if let Some(rating) = r.rating {
            session.set_rating(rating)?;
        }
        Ok(session)
    }
}

impl Serialize for Session {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SessionRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Session {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let record = SessionRecord::deserialize(d)?;
        Session::try_from(record).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Turn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            role: Role,
            text: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            service: Option<WireService<'a>>,
        }
        #[derive(Serialize)]
        struct WireService<'a> {
            attempts: Vec<WireAttempt<'a>>,
            #[serde(skip_serializing_if = "Option::is_none")]
            used_index: Option<usize>,
        }
        #[derive(Serialize)]
        struct WireAttempt<'a> {
            query: &'a str,
            state: &'a SpatiotemporalState,
            knowledge: &'a ServiceKnowledge,
        }
        Wire {
            role: self.role,
            text: &self.text,
            service: self.service.as_ref().map(|svc| WireService {
                attempts: svc
                    .attempts
                    .iter()
                    .map(|a| WireAttempt { query: a.request.query(), state: &a.request.state, knowledge: &a.knowledge })
                    .collect(),
                used_index: svc.used_index,
            }),
        }
        .serialize(s)
    }
}
