use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn servdial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servdial")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn synth(dir: &Path, name: &str, n: &str, seed: &str) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let out = servdial(&["--seed", seed, "synth", "--n", n, "--out", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn synth_then_stats_reports_the_planted_knobs() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "corpus.jsonl", "100", "1");
    let out = servdial(&["--json", "stats", &path]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["n_dialogs"], 100);
    assert_eq!(v["n_utterances"], 2000);
    assert_eq!(v["service_turn_percent"], 52.3);
    assert_eq!(v["avg_chars_query"], 6.35);

    let text = String::from_utf8(servdial(&["stats", &path]).stdout).unwrap();
    assert!(text.contains("52.30%"), "{text}");
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.jsonl", "5", "3");
    let b = synth(dir.path(), "b.jsonl", "5", "3");
    let c = synth(dir.path(), "c.jsonl", "5", "4");
    let read = |p: &str| std::fs::read_to_string(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn echo_system_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "seen_test.jsonl", "10", "2");
    let out = servdial(&["--json", "eval", &path, "--system", "echo"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = json(&out);
    let r = &reports[0];
    for key in ["query_acc", "query_f1", "response_f1", "bleu1"] {
        assert_eq!(r[key], 1.0, "{key}");
    }
}

#[test]
fn baseline_eval_writes_a_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "corpus.jsonl", "5", "2");
    let report = dir.path().join("report.json");
    let out = servdial(&["eval", &path, "--out", report.to_str().unwrap(), "--sequential"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v[0]["split"], "train");
    assert_eq!(v[0]["n_examples"], 50);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = synth(dir.path(), "good.jsonl", "3", "1");
    assert_eq!(servdial(&["validate", &good]).status.code(), Some(0));

    let bad = dir.path().join("bad.jsonl");
    let mut lines: Vec<Value> =
        std::fs::read_to_string(&good).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[0]["turns"][0]["text"] = "你好，在干嘛".into();
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&bad, body).unwrap();
    let out = servdial(&["--json", "validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["violations"][0]["violations"][0]["rule"], "banned_opener");

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(servdial(&["validate", missing.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(servdial(&["validate"]).status.code(), Some(2));
    assert_eq!(servdial(&["--copy-threshold", "2", "validate", &good]).status.code(), Some(2));
}

#[test]
fn gateway_answers_the_weather_question() {
    let out = servdial(&[
        "--json",
        "gateway",
        "明天北京天气",
        "--lat",
        "39.99",
        "--lon",
        "116.30",
        "--time",
        "2022-08-12T15:00+08:00",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["skill"], "weather");
    assert!(v["text"].as_str().unwrap().contains("18度～26度"));
}

#[test]
fn gateway_reports_skill_errors_with_exit_one() {
    let out = servdial(&["gateway", "1/0", "--lat", "39.99", "--lon", "116.30", "--time", "2022-08-12T15:00+08:00"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn chat_survives_a_failed_bot_turn() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_servdial"))
        .args(["chat", "--time", "2030-01-01T09:00+08:00", "--location", "Haidian district, Beijing"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all("明天天气怎么样？\n还在吗\n/retry\n/quit\n".as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.matches("BOT turn failed:").count(), 2, "{stderr}");
    assert!(stderr.contains("type /retry or /quit"));
}

#[test]
fn unreachable_adapter_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "corpus.jsonl", "1", "1");
    let out = servdial(&["--adapter-url", "http://127.0.0.1:9/x", "eval", &path, "--system", "adapter"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn chat_saves_a_transcript() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("chat.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_servdial"))
        .args(["chat", "--topic", "travel/outing", "--out", out_path.to_str().unwrap()])
        .args(["--time", "2022-08-12T15:00+08:00", "--location", "Haidian district, Beijing"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all("明天天气怎么样？\n/rate 4\n".as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("BOT: ") && stdout.contains("18"), "{stdout}");
    let saved: Value = serde_json::from_str(std::fs::read_to_string(out_path).unwrap().trim()).unwrap();
    assert_eq!(saved["turns"].as_array().unwrap().len(), 2);
    assert_eq!(saved["rating"], 4);
}
