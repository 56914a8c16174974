//! Topic-based partitioning. Sessions whose level-2 topic is held out form
//! the unseen test set; the rest are shuffled per level-2 topic into train,
//! valid and seen test, with the first session of every topic kept in train
//! so each seen-test topic also occurs in training.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::types::{Session, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub holdout: Vec<String>,
    pub valid_fraction: f64,
    pub seen_test_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(holdout: Vec<String>) -> Self {
        SplitConfig { holdout, valid_fraction: 0.1, seen_test_fraction: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", content = "split", rename_all = "snake_case")]
pub enum SplitWarning {
    EmptyPartition(Split),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitOutcome {
    pub train: Vec<Session>,
    pub valid: Vec<Session>,
    pub seen_test: Vec<Session>,
    pub unseen_test: Vec<Session>,
    pub warnings: Vec<SplitWarning>,
}

impl SplitOutcome {
    pub fn partitions(&self) -> [(Split, &[Session]); 4] {
        [
            (Split::Train, &self.train),
            (Split::Valid, &self.valid),
            (Split::SeenTest, &self.seen_test),
            (Split::UnseenTest, &self.unseen_test),
        ]
    }
}

/// Partitions `sessions`, retagging each with its split. Every holdout topic
/// must occur in the corpus; empty partitions are reported as warnings.
pub fn split(sessions: Vec<Session>, cfg: &SplitConfig) -> Result<SplitOutcome, DatasetError> {
    let present: BTreeSet<&str> = sessions.iter().map(|s| s.profile.topic.level2.as_str()).collect();
    if let Some(missing) = cfg.holdout.iter().find(|h| !present.contains(h.as_str())) {
        return Err(DatasetError::UnknownHoldout(missing.clone()));
    }
    let holdout: BTreeSet<&str> = cfg.holdout.iter().map(String::as_str).collect();
    let mut out = SplitOutcome::default();
    let mut groups: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    for mut s in sessions {
        if holdout.contains(s.profile.topic.level2.as_str()) {
            s.split = Split::UnseenTest;
            out.unseen_test.push(s);
        } else {
            groups.entry(s.profile.topic.level2.clone()).or_default().push(s);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (_, mut group) in groups {
        group.shuffle(&mut rng);
        let n = group.len();
        let n_valid = (cfg.valid_fraction * n as f64).floor() as usize;
        let n_seen = (cfg.seen_test_fraction * n as f64).floor() as usize;
        let n_train = n.saturating_sub(n_valid + n_seen).max(1);
        for (i, mut s) in group.into_iter().enumerate() {
            let (tag, dest) = if i < n_train {
                (Split::Train, &mut out.train)
            } else if i < n_train + n_seen.min(n - n_train) {
                (Split::SeenTest, &mut out.seen_test)
            } else {
                (Split::Valid, &mut out.valid)
            };
            s.split = tag;
            dest.push(s);
        }
    }
    out.warnings =
        out.partitions().iter().filter(|(_, p)| p.is_empty()).map(|(s, _)| SplitWarning::EmptyPartition(*s)).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synth_generate, SynthKnobs};

    fn corpus() -> Vec<Session> {
        synth_generate(11, 120, &SynthKnobs { topic_pool: [4, 8, 0], ..Default::default() }).unwrap()
    }

    fn level2(s: &[Session]) -> BTreeSet<String> {
        s.iter().map(|s| s.profile.topic.level2.clone()).collect()
    }

    #[test]
    fn holdout_everything() {
        let c = corpus();
        let all: Vec<String> = level2(&c).into_iter().collect();
        let out = split(c, &SplitConfig::new(all)).unwrap();
        assert!(out.train.is_empty());
        assert!(out.warnings.contains(&SplitWarning::EmptyPartition(Split::Train)));
    }

    #[test]
    fn holdout_nothing() {
        let out = split(corpus(), &SplitConfig::new(vec![])).unwrap();
        assert!(out.unseen_test.is_empty());
        assert_eq!(out.warnings, vec![SplitWarning::EmptyPartition(Split::UnseenTest)]);
    }

    #[test]
    fn disjoint_and_tagged() {
        let c = corpus();
        let topics: Vec<String> = level2(&c).into_iter().take(2).collect();
        let n = c.len();
        let out = split(c, &SplitConfig::new(topics.clone())).unwrap();
        assert!(level2(&out.train).is_disjoint(&level2(&out.unseen_test)));
        assert_eq!(level2(&out.unseen_test), topics.into_iter().collect());
        assert!(level2(&out.seen_test).is_subset(&level2(&out.train)));
        let total: usize = out.partitions().iter().map(|(_, p)| p.len()).sum();
        assert_eq!(total, n);
        for (tag, part) in out.partitions() {
            assert!(part.iter().all(|s| s.split == tag));
        }
    }

    #[test]
    fn unknown_holdout() {
        assert!(matches!(
            split(corpus(), &SplitConfig::new(vec!["nope".into()])),
            Err(DatasetError::UnknownHoldout(_))
        ));
    }
}
