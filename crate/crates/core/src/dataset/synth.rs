//! Seeded synthetic corpus generator.
//!
//! Counts are planted rather than sampled: the number of knowledge turns is
//! `round(ratio × BOT turns)` spread over sessions, and query lengths are
//! chosen so their total is `round(mean × queries)`. Corpus statistics
//! therefore hit the knob targets exactly whenever the counts allow it.

use chrono::{Duration, TimeZone};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qc::{qc_check, QcConfig, DEFAULT_COPY_THRESHOLD};
use super::DatasetError;
use crate::gateway::FixtureStore;
use crate::types::{
    Attempt, KnowledgeSource, ServiceInteraction, ServiceKnowledge, ServiceRequest, Session, SkillId,
    SpatiotemporalState, Split, TopicCategory, TopicPath, Turn, UserProfile,
};

/// Longest query the generator will plant.
pub const MAX_QUERY_CHARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthKnobs {
    pub bot_turns_per_session: usize,
    /// Fraction of BOT turns that use knowledge.
    pub knowledge_ratio: f64,
    /// Mean non-whitespace characters per used query.
    pub query_chars_mean: f64,
    /// Mean unused attempts per knowledge turn.
    pub other_service_mean: f64,
    /// Number of distinct level-1, level-2 and level-3 topics to draw from.
    pub topic_pool: [usize; 3],
    /// Number of fixture locations to draw from.
    pub location_pool: usize,
    pub copy_threshold: f64,
    pub split: Split,
}

impl Default for SynthKnobs {
    fn default() -> Self {
        SynthKnobs {
            bot_turns_per_session: 10,
            knowledge_ratio: 0.523,
            query_chars_mean: 6.35,
            other_service_mean: 0.5,
            topic_pool: [12, 20, 40],
            location_pool: 16,
            copy_threshold: DEFAULT_COPY_THRESHOLD,
            split: Split::Train,
        }
    }
}

const QUERY_HEADS: &[&str] = &["天气", "股价", "推荐", "翻译", "日期", "介绍", "攻略", "评分", "门票", "赛程"];
const QUERY_FILL: &str = "北京上海周末明天附近餐厅电影比赛球队景点价格新闻历史音乐活动博物馆公园咖啡火锅";

const KNOWLEDGE_SENTENCES: &[&str] = &[
    "该地区未来三天以晴到多云为主，最高气温二十八度左右。",
    "景区开放时间为上午八点至下午五点，周一闭馆维护。",
    "这家餐厅人均消费约一百二十元，招牌菜是烤鸭和糖醋里脊。",
    "比赛将于本周六晚七点半开始，两队近五次交手各胜两场。",
    "该股今日收盘上涨百分之一点二，成交量较昨日有所放大。",
    "这部电影由知名导演执导，上映首周票房突破三亿元。",
    "博物馆收藏文物超过十万件，其中青铜器展厅最受欢迎。",
    "公园内有一条环湖步道，全长约四公里，适合傍晚散步。",
    "该课程共十二讲，每周更新一次，适合零基础学习者。",
    "这款游戏新版本增加了联机模式，玩家评价整体较好。",
    "当地特色小吃包括炸酱面、豆汁和驴打滚，价格实惠。",
    "专家建议每天保持三十分钟以上的中等强度运动。",
];

const USER_LINES: &[&str] = &[
    "这个听起来挺有意思的。",
    "那我还想多了解一点。",
    "我之前也听朋友提起过。",
    "这样的话我得提前准备一下。",
    "有道理，我再考虑考虑。",
    "最近一直在琢磨这件事。",
];

const BOT_CHAT: &[&str] = &[
    "是呀，这个确实值得聊聊。",
    "我也觉得不错，你打算什么时候去？",
    "听你这么说我也挺感兴趣的。",
    "可以先列个计划，慢慢来。",
    "这个想法挺好的，祝你顺利。",
];

const BOT_FRAMES: &[&str] = &["我帮你查了一下，", "我看了看，", "据我了解，", "刚查到，"];

fn infeasible(msg: impl Into<String>) -> DatasetError {
    DatasetError::InfeasibleKnobs(msg.into())
}

fn topic_pool(pool: [usize; 3]) -> Result<Vec<TopicPath>, DatasetError> {
    let [n1, n2, n3] = pool;
    if !(1..=TopicCategory::ALL.len()).contains(&n1) {
        return Err(infeasible(format!("level-1 pool must be 1..={}", TopicCategory::ALL.len())));
    }
    if n2 == 0 {
        return Err(infeasible("level-2 pool is empty"));
    }
    // level-2 topics cycle through the level-1 categories, level-3 through its pool
    Ok((0..n2)
        .map(|j| {
            let l1 = TopicCategory::ALL[j % n1];
            let l2 = format!("{}话题{:02}", l1.label_zh(), j + 1);
            let l3 = (n3 > 0).then(|| format!("细分{:02}", j % n3 + 1));
            TopicPath::new(l1, l2, l3).expect("generated topic names are non-empty")
        })
        .collect())
}

/// Spreads `total` units over `n` buckets of `base` plus at most `cap` extra each.
fn plant(rng: &mut ChaCha8Rng, n: usize, base: usize, cap: usize, total: usize) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, cap)).collect();
    slots.shuffle(rng);
    let mut out = vec![base; n];
    for &i in slots.iter().take(total - base * n) {
        out[i] += 1;
    }
    out
}

fn random_query(rng: &mut ChaCha8Rng, len: usize) -> String {
    let fill: Vec<char> = QUERY_FILL.chars().collect();
    let mut q: Vec<char> = QUERY_HEADS.choose(rng).expect("non-empty").chars().take(len).collect();
    while q.len() < len {
        q.push(*fill.choose(rng).expect("non-empty"));
    }
    q.into_iter().collect()
}

fn random_knowledge(rng: &mut ChaCha8Rng) -> ServiceKnowledge {
    let n = rng.random_range(2..=4);
    let text: String = KNOWLEDGE_SENTENCES.choose_multiple(rng, n).copied().collect();
    let skill =
        *[SkillId::Weather, SkillId::Search, SkillId::Recommend, SkillId::Stock].choose(rng).expect("non-empty");
    ServiceKnowledge { text, skill, source: KnowledgeSource::Fixture }
}

fn grounded_reply(rng: &mut ChaCha8Rng, knowledge: &str, qc: &QcConfig) -> Result<String, DatasetError> {
    let frame = BOT_FRAMES.choose(rng).expect("non-empty");
    let gist: String = knowledge.chars().take_while(|c| *c != '，' && *c != '。').take(8).collect();
    let candidates = [format!("{frame}{gist}，你可以参考一下。"), format!("{frame}情况还不错，你可以参考一下。")];
    candidates
        .into_iter()
        .find(|r| !qc.copy_check(r, knowledge).1)
        .ok_or_else(|| infeasible(format!("copy threshold {} rejects every reply", qc.copy_threshold)))
}

/// Generates `n_sessions` sessions. Output depends only on `seed` and knobs,
/// and every session passes quality control at the knobs' copy threshold.
pub fn synth_generate(seed: u64, n_sessions: usize, knobs: &SynthKnobs) -> Result<Vec<Session>, DatasetError> {
    let qc = QcConfig::default().with_copy_threshold(knobs.copy_threshold);
    let b = knobs.bot_turns_per_session;
    if n_sessions == 0 {
        return Err(infeasible("at least one session is required"));
    }
    if b < qc.min_bot_turns {
        return Err(infeasible(format!("sessions need at least {} BOT turns", qc.min_bot_turns)));
    }
    if !(0.0..=1.0).contains(&knobs.knowledge_ratio) {
        return Err(infeasible("knowledge ratio must lie in [0, 1]"));
    }
    let bot_total = n_sessions * b;
    let used_total = (knobs.knowledge_ratio * bot_total as f64).round() as usize;
    if used_total < qc.min_knowledge_turns * n_sessions {
        return Err(infeasible(format!(
            "{used_total} knowledge turns cannot give {n_sessions} sessions {} each",
            qc.min_knowledge_turns
        )));
    }
    if !(1.0..=MAX_QUERY_CHARS as f64).contains(&knobs.query_chars_mean) {
        return Err(infeasible(format!("query length mean must lie in [1, {MAX_QUERY_CHARS}]")));
    }
    if !(0.0..=10.0).contains(&knobs.other_service_mean) {
        return Err(infeasible("other-service mean must lie in [0, 10]"));
    }
    let topics = topic_pool(knobs.topic_pool)?;
    let store = FixtureStore::builtin();
    if !(1..=store.locations.len()).contains(&knobs.location_pool) {
        return Err(infeasible(format!("location pool must be 1..={}", store.locations.len())));
    }
    let locations = &store.locations[..knobs.location_pool];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_k = qc.min_knowledge_turns;
    let per_session = plant(&mut rng, n_sessions, min_k, b - min_k, used_total);
    let query_total = (knobs.query_chars_mean * used_total as f64).round() as usize;
    let base = query_total / used_total;
    let mut query_lens = plant(&mut rng, used_total, base, 1, query_total).into_iter();
    let unused_total = (knobs.other_service_mean * used_total as f64).round() as usize;
    let mut unused = vec![0usize; used_total];
    for _ in 0..unused_total {
        unused[rng.random_range(0..used_total)] += 1;
    }
    let mut unused = unused.into_iter();
    let t0 = chrono::FixedOffset::east_opt(8 * 3600)
        .expect("valid offset")
        .with_ymd_and_hms(2022, 8, 1, 8, 0, 0)
        .single()
        .expect("valid time");

    let mut sessions = Vec::with_capacity(n_sessions);
    for (i, &k) in per_session.iter().enumerate() {
        let topic = topics.choose(&mut rng).expect("non-empty").clone();
        let loc = locations.choose(&mut rng).expect("non-empty");
        let time = t0 + Duration::days(rng.random_range(0..30)) + Duration::hours(rng.random_range(0..14));
        let state = SpatiotemporalState::new(time, loc.latitude, loc.longitude, loc.name.clone());
        let profile = UserProfile { topic: topic.clone(), assigned_state: state.clone() };
        let mut session = Session::new(format!("synth-{seed}-{i:05}"), profile, knobs.split);
        let mut knowledge_at: Vec<usize> = (0..b).collect();
        knowledge_at.shuffle(&mut rng);
        knowledge_at.truncate(k);
        for turn in 0..b {
            let user = if turn == 0 {
                format!("最近在关注{}，想跟你聊聊。", topic.level2)
            } else {
                USER_LINES.choose(&mut rng).expect("non-empty").to_string()
            };
            session.context.push(Turn::user(user)?)?;
            let bot = if knowledge_at.contains(&turn) {
                let len = query_lens.next().expect("one length per knowledge turn");
                let extra = unused.next().expect("one count per knowledge turn");
                let mut attempts = Vec::with_capacity(extra + 1);
                for _ in 0..extra {
                    let l = rng.random_range(2..=8);
                    attempts.push(Attempt {
                        request: ServiceRequest::new(random_query(&mut rng, l), state.clone())?,
                        knowledge: random_knowledge(&mut rng),
                    });
                }
                let used = Attempt {
                    request: ServiceRequest::new(random_query(&mut rng, len), state.clone())?,
                    knowledge: random_knowledge(&mut rng),
                };
                let reply = grounded_reply(&mut rng, &used.knowledge.text, &qc)?;
                let at = rng.random_range(0..=extra);
                attempts.insert(at, used);
                Turn::bot(reply, Some(ServiceInteraction::new(attempts, Some(at))?))?
            } else {
                Turn::bot(*BOT_CHAT.choose(&mut rng).expect("non-empty"), None)?
            };
            session.context.push(bot)?;
        }
        debug_assert!(qc_check(&session, &qc).passes());
        sessions.push(session);
    }
    Ok(sessions)
}
