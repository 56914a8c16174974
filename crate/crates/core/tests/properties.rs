use std::collections::BTreeSet;

use chrono::{FixedOffset, TimeZone};
use proptest::prelude::*;
use servdial_core::dataset::{self, qc_all, split, synth_generate, QcConfig, SplitConfig, SynthKnobs};
use servdial_core::generation::{assemble_prompt, decode_prompt, PromptSegments};
use servdial_core::metrics::{bleu1, unigram_f1};
use servdial_core::types::{DialogueContext, Split, TopicCategory, TopicPath, Turn};
use servdial_core::{Execution, GeneratorOutcome, SpatiotemporalState, NO_REQUEST};

fn text() -> impl Strategy<Value = String> {
    // brackets, pipes, backslashes and newlines stress the prompt escaping
    proptest::string::string_regex("[a-z北京天气 \\[\\]|\\\\=\\n]{0,12}").unwrap()
}

fn utterance() -> impl Strategy<Value = String> {
    text().prop_filter("turn text is non-blank", |s| !s.trim().is_empty())
}

fn state() -> impl Strategy<Value = SpatiotemporalState> {
    (0i64..600_000, -90.0f64..=90.0, -180.0f64..=180.0, utterance(), -12i32..=14).prop_map(
        |(minutes, lat, lon, name, tz)| {
            let offset = FixedOffset::east_opt(tz * 3600).unwrap();
            let time = offset.timestamp_opt(1_600_000_000 + minutes * 60, 0).unwrap();
            SpatiotemporalState::new(time, lat, lon, name)
        },
    )
}

fn context() -> impl Strategy<Value = DialogueContext> {
    proptest::collection::vec(utterance(), 1..6).prop_map(|texts| {
        let mut c = DialogueContext::default();
        for t in texts {
            let role = c.expected_role();
            c.push(Turn::new(role, t, None).unwrap()).unwrap();
        }
        c
    })
}

fn topic() -> impl Strategy<Value = Option<TopicPath>> {
    proptest::option::of(
        (0usize..12, utterance(), proptest::option::of(utterance()))
            .prop_map(|(c, l2, l3)| TopicPath::new(TopicCategory::ALL[c], l2, l3).unwrap()),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prompts_decode_to_their_segments(
        st in state(),
        ctx in context(),
        tp in topic(),
        knowledge in proptest::option::of(text()),
        response in any::<bool>(),
    ) {
        let seg = if response {
            PromptSegments::response(st, ctx, knowledge)
        } else {
            PromptSegments::query(st, ctx)
        }
        .with_topic(tp);
        let prompt = assemble_prompt(&seg);
        prop_assert_eq!(decode_prompt(&prompt).unwrap(), seg);
    }

    #[test]
    fn f1_is_symmetric_and_bounded(a in text(), b in text()) {
        let f = unigram_f1(&a, &b);
        prop_assert_eq!(f, unigram_f1(&b, &a));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((0.0..=1.0).contains(&bleu1(&a, &b)));
    }

    #[test]
    fn identical_non_empty_texts_score_one(a in utterance()) {
        prop_assert_eq!(unigram_f1(&a, &a), 1.0);
        prop_assert_eq!(bleu1(&a, &a), 1.0);
    }

    #[test]
    fn sentinel_law(pre in "[ \t\n]{0,3}", post in "[ \t\n]{0,3}", other in utterance()) {
        let padded = format!("{pre}{NO_REQUEST}{post}");
        prop_assert_eq!(GeneratorOutcome::from_text(&padded).unwrap(), GeneratorOutcome::NoRequest);
        let outcome = GeneratorOutcome::from_text(&other).unwrap();
        if other.trim() == NO_REQUEST {
            prop_assert_eq!(outcome, GeneratorOutcome::NoRequest);
        } else {
            prop_assert_eq!(outcome, GeneratorOutcome::Query(other.trim().to_string()));
        }
    }
}

#[test]
fn sessions_survive_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let sessions = synth_generate(21, 100, &SynthKnobs::default()).unwrap();
    dataset::save(&sessions, &path).unwrap();
    assert_eq!(dataset::load(&path).unwrap(), sessions);
    assert_eq!(dataset::parse_jsonl(&dataset::to_jsonl(&sessions)).unwrap(), sessions);
}

#[test]
fn split_partitions_are_disjoint_and_hold_out_topics() {
    let sessions = synth_generate(5, 200, &SynthKnobs::default()).unwrap();
    let topics: BTreeSet<String> = sessions.iter().map(|s| s.profile.topic.level2.clone()).collect();
    let holdout: Vec<String> = topics.iter().take(3).cloned().collect();
    let out = split(sessions.clone(), &SplitConfig::new(holdout.clone())).unwrap();

    let mut seen = BTreeSet::new();
    for (tag, part) in out.partitions() {
        for s in part {
            assert_eq!(s.split, tag);
            assert!(seen.insert(s.id.clone()), "{} appears twice", s.id);
        }
    }
    assert_eq!(seen, sessions.iter().map(|s| s.id.clone()).collect());

    let level2 = |part: &[servdial_core::Session]| -> BTreeSet<String> {
        part.iter().map(|s| s.profile.topic.level2.clone()).collect()
    };
    let train = level2(&out.train);
    assert!(level2(&out.unseen_test).iter().all(|t| holdout.contains(t) && !train.contains(t)));
    assert!(level2(&out.seen_test).is_subset(&train));
    assert!(level2(&out.valid).is_subset(&train));
    assert!(out.unseen_test.iter().all(|s| s.split == Split::UnseenTest));
}

#[test]
fn parallel_and_sequential_qc_agree() {
    let sessions = synth_generate(8, 50, &SynthKnobs::default()).unwrap();
    let cfg = QcConfig::default();
    assert_eq!(qc_all(&sessions, &cfg, Execution::Sequential), qc_all(&sessions, &cfg, Execution::Parallel));
}
