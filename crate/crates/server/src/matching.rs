//! FIFO pairing of waiting USER and BOT participants.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use servdial_core::types::Role;

use crate::error::EngineError;

/// What a waiting USER brings to the match: the session request to create.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingUser<T> {
    pub participant: String,
    pub request: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MatchState {
    Waiting { position: usize },
    Matched { session_id: String },
    Unknown,
}

/// A pairing produced by [`MatchQueue::join`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing<T> {
    pub user: String,
    pub bot: String,
    pub request: T,
}

#[derive(Debug)]
pub struct MatchQueue<T> {
    users: VecDeque<WaitingUser<T>>,
    bots: VecDeque<String>,
    matched: HashMap<String, String>,
}

impl<T> Default for MatchQueue<T> {
    fn default() -> Self {
        MatchQueue { users: VecDeque::new(), bots: VecDeque::new(), matched: HashMap::new() }
    }
}

impl<T> MatchQueue<T> {
    fn is_waiting(&self, participant: &str) -> bool {
        self.users.iter().any(|u| u.participant == participant) || self.bots.iter().any(|b| b == participant)
    }

    /// Queues a participant, or pairs it with the longest-waiting partner of
    /// the other role. A USER must bring its session request.
    pub fn join(
        &mut self,
        participant: &str,
        role: Role,
        request: Option<T>,
    ) -> Result<Option<Pairing<T>>, EngineError> {
        if self.is_waiting(participant) {
            return Err(EngineError::AlreadyQueued(participant.to_string()));
        }
        self.matched.remove(participant);
        match role {
            Role::User => {
                let request =
                    request.ok_or_else(|| EngineError::InvalidRequest("a USER must choose a topic".into()))?;
                match self.bots.pop_front() {
                    Some(bot) => Ok(Some(Pairing { user: participant.to_string(), bot, request })),
                    None => {
                        self.users.push_back(WaitingUser { participant: participant.to_string(), request });
                        Ok(None)
                    }
                }
            }
            Role::Bot => match self.users.pop_front() {
                Some(u) => Ok(Some(Pairing { user: u.participant, bot: participant.to_string(), request: u.request })),
                None => {
                    self.bots.push_back(participant.to_string());
                    Ok(None)
                }
            },
        }
    }

    /// Puts a pairing back at the head of the queues, e.g. when creating
    /// its session failed.
    pub fn requeue(&mut self, p: Pairing<T>) {
        self.users.push_front(WaitingUser { participant: p.user, request: p.request });
        self.bots.push_front(p.bot);
    }

    pub fn record_match(&mut self, user: &str, bot: &str, session_id: &str) {
        self.matched.insert(user.to_string(), session_id.to_string());
        self.matched.insert(bot.to_string(), session_id.to_string());
    }

    pub fn status(&self, participant: &str) -> MatchState {
        if let Some(id) = self.matched.get(participant) {
            return MatchState::Matched { session_id: id.clone() };
        }
        let pos = self
            .users
            .iter()
            .position(|u| u.participant == participant)
            .or_else(|| self.bots.iter().position(|b| b == participant));
        match pos {
            Some(position) => MatchState::Waiting { position },
            None => MatchState::Unknown,
        }
    }

    pub fn waiting(&self) -> (usize, usize) {
        (self.users.len(), self.bots.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_pairing() {
        let mut q: MatchQueue<u32> = MatchQueue::default();
        assert_eq!(q.join("u1", Role::User, Some(1)).unwrap(), None);
        assert_eq!(q.join("u2", Role::User, Some(2)).unwrap(), None);
        assert_eq!(q.waiting(), (2, 0));
        let p = q.join("b1", Role::Bot, None).unwrap().unwrap();
        assert_eq!((p.user.as_str(), p.request), ("u1", 1));
        assert_eq!(q.status("u2"), MatchState::Waiting { position: 0 });
    }

    #[test]
    fn at_most_once() {
        let mut q: MatchQueue<u32> = MatchQueue::default();
        q.join("u1", Role::User, Some(1)).unwrap();
        assert!(matches!(q.join("u1", Role::User, Some(1)), Err(EngineError::AlreadyQueued(_))));
        q.join("b1", Role::Bot, None).unwrap();
        assert!(q.join("b1", Role::Bot, None).unwrap().is_none());
        assert!(matches!(q.join("b1", Role::Bot, None), Err(EngineError::AlreadyQueued(_))));
    }

    #[test]
    fn user_needs_topic() {
        let mut q: MatchQueue<u32> = MatchQueue::default();
        assert!(q.join("u", Role::User, None).is_err());
        assert_eq!(q.status("u"), MatchState::Unknown);
    }
}
