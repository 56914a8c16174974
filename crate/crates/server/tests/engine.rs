use servdial_core::types::{Role, SkillId, TopicCategory, TopicPath};
use servdial_server::{
    CreateSession, Engine, EngineConfig, EngineError, LocationSpec, MatchState, Mode, SessionStore, Viewer,
};

fn outing() -> TopicPath {
    TopicPath::new(TopicCategory::Travel, "outing", None).unwrap()
}

fn haidian() -> LocationSpec {
    LocationSpec { name: "Haidian district, Beijing".into(), lat: 39.99, lon: 116.30 }
}

fn create(engine: &Engine, id: &str, mode: Mode) {
    engine
        .create_session(CreateSession {
            id: Some(id.into()),
            topic: outing(),
            location: Some(haidian()),
            time: Some("2022-08-12T15:00+08:00".into()),
            mode,
        })
        .unwrap();
}

fn engine() -> Engine {
    Engine::new(SessionStore::in_memory(), EngineConfig::default())
}

#[test]
fn turn_order_is_enforced() {
    let e = engine();
    create(&e, "a", Mode::Live);
    assert_eq!(e.run_bot_turn("a").unwrap_err(), EngineError::NotYourTurn { expected: Role::User });
    e.post_user_message("a", "Hope for good weather.").unwrap();
    assert_eq!(e.post_user_message("a", "again").unwrap_err(), EngineError::NotYourTurn { expected: Role::Bot });
    assert_eq!(e.post_user_message("zzz", "hi").unwrap_err(), EngineError::NotFound("zzz".into()));
}

#[test]
fn live_bot_turn_uses_weather_and_closed_sessions_refuse_writes() {
    let e = engine();
    create(&e, "a", Mode::Live);
    e.post_user_message("a", "It's the weekend soon, I'm going to go on an outing with my friends.").unwrap();
    e.run_bot_turn("a").unwrap();
    e.post_user_message("a", "Hope for good weather.").unwrap();
    let out = e.run_bot_turn("a").unwrap();
    let svc = out.turn.service().expect("weather needs the service");
    assert_eq!(svc.attempts()[0].knowledge.skill, SkillId::Weather);

    assert_eq!(e.rate_session("a", 7).unwrap_err(), EngineError::InvalidRating(7));
    let v = e.rate_session("a", 4).unwrap();
    assert!(v.closed);
    assert!(v.qc.is_some());
    assert_eq!(e.rate_session("a", 4).unwrap_err(), EngineError::AlreadyRated);
    assert_eq!(e.post_user_message("a", "more").unwrap_err(), EngineError::SessionClosed);
}

#[test]
fn user_view_hides_service_interactions() {
    let e = engine();
    create(&e, "a", Mode::Live);
    e.post_user_message("a", "Hope for good weather.").unwrap();
    e.run_bot_turn("a").unwrap();
    let bot = e.get("a", Viewer::Bot).unwrap();
    let user = e.get("a", Viewer::User).unwrap();
    assert!(bot.session["turns"][1].get("service").is_some());
    assert!(user.session["turns"][1].get("service").is_none());
}

#[test]
fn rating_needs_a_bot_turn() {
    let e = engine();
    create(&e, "a", Mode::Live);
    assert_eq!(e.rate_session("a", 3).unwrap_err(), EngineError::NoBotTurn);
}

#[test]
fn wizard_attempts_and_copy_rejection() {
    let e = engine();
    create(&e, "c", Mode::Collection);
    assert_eq!(e.wizard_query("c", "天气").unwrap_err(), EngineError::NotYourTurn { expected: Role::User });
    e.post_user_message("c", "周末想出去玩").unwrap();
    assert_eq!(e.run_bot_turn("c").unwrap_err(), EngineError::WrongMode { expected: Mode::Live });

    let (i0, _) = e.wizard_query("c", "1+2*3").unwrap();
    let (i1, weather) = e.wizard_query("c", "明天北京天气").unwrap();
    let (i2, _) = e.wizard_query("c", "今天星期几").unwrap();
    assert_eq!((i0, i1, i2), (0, 1, 2));
    assert_eq!(e.get("c", Viewer::Bot).unwrap().pending.unwrap().len(), 3);

    let err = e.wizard_reply("c", &weather.text, Some(1)).unwrap_err();
    assert_eq!(err, EngineError::CopyRejected { f1: 1.0 });

    let suggestion = e.suggest("c").unwrap();
    assert!(!suggestion.is_empty());

    let v = e.wizard_reply("c", "明天多云，18到26度，挺适合出门。", Some(1)).unwrap();
    let svc = &v.session["turns"][1]["service"];
    assert_eq!(svc["attempts"].as_array().unwrap().len(), 3);
    assert_eq!(svc["used_index"], 1);
    assert!(v.pending.is_none() || v.pending.as_deref() == Some(&[][..]));
}

#[test]
fn duplicate_ids_are_refused() {
    let e = engine();
    create(&e, "a", Mode::Live);
    let err = e
        .create_session(CreateSession {
            id: Some("a".into()),
            topic: outing(),
            location: None,
            time: None,
            mode: Mode::Live,
        })
        .unwrap_err();
    assert_eq!(err, EngineError::DuplicateSession("a".into()));
}

#[test]
fn generated_sessions_draw_a_pool_location() {
    let e = engine();
    let v = e
        .create_session(CreateSession { id: None, topic: outing(), location: None, time: None, mode: Mode::Live })
        .unwrap();
    let name = v.session["location"]["name"].as_str().unwrap();
    assert!(e.config().locations.iter().any(|l| l.name == name));
}

#[test]
fn match_queue_pairs_user_and_bot() {
    let e = engine();
    let req = CreateSession { id: None, topic: outing(), location: Some(haidian()), time: None, mode: Mode::Live };
    let t = e.join_match("u1", Role::User, Some(req.clone())).unwrap();
    assert_eq!(t.state, MatchState::Waiting { position: 0 });
    assert!(matches!(e.join_match("u1", Role::User, Some(req)), Err(EngineError::AlreadyQueued(_))));

    let t = e.join_match("b1", Role::Bot, None).unwrap();
    let MatchState::Matched { session_id } = &t.state else { panic!("bot should be matched: {t:?}") };
    assert_eq!(t.partner_profile.as_ref().unwrap()["location"]["name"], "Haidian district, Beijing");
    let user = e.match_status("u1", Role::User).unwrap();
    assert_eq!(user.state, MatchState::Matched { session_id: session_id.clone() });
    assert!(user.partner_profile.is_none());
    assert_eq!(e.get(session_id, Viewer::Bot).unwrap().mode, Mode::Collection);
}

#[test]
fn concurrent_bot_turns_never_double_write() {
    let e = std::sync::Arc::new(engine());
    create(&e, "a", Mode::Live);
    e.post_user_message("a", "Hope for good weather.").unwrap();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let e = e.clone();
            std::thread::spawn(move || e.run_bot_turn("a"))
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    for r in results.iter().filter_map(|r| r.as_ref().err()) {
        assert!(matches!(r, EngineError::Busy | EngineError::NotYourTurn { expected: Role::User }), "{r:?}");
    }
    assert_eq!(e.get("a", Viewer::Bot).unwrap().session["turns"].as_array().unwrap().len(), 2);
}
