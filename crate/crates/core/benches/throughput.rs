//! Sequential versus parallel throughput of the batch paths: split
//! evaluation, corpus validation and passage scoring.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use servdial_core::dataset::{qc_all, synth_generate, QcConfig, SynthKnobs};
use servdial_core::gateway::retrieval::{Bm25Index, Passage};
use servdial_core::metrics::{echo_outputs, evaluate_split, examples_from_sessions, ReportSplit};
use servdial_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn evaluation(c: &mut Criterion) {
    let sessions = synth_generate(1, 400, &SynthKnobs::default()).expect("default knobs are feasible");
    let examples = examples_from_sessions(&sessions);
    let outputs = echo_outputs(&examples);
    let mut group = c.benchmark_group("evaluate_split");
    group.throughput(Throughput::Elements(examples.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate_split(black_box(&examples), &outputs, ReportSplit::Train, exec))
        });
    }
    group.finish();
}

fn validation(c: &mut Criterion) {
    let sessions = synth_generate(2, 400, &SynthKnobs::default()).expect("default knobs are feasible");
    let cfg = QcConfig::default();
    let mut group = c.benchmark_group("qc_all");
    group.throughput(Throughput::Elements(sessions.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| qc_all(black_box(&sessions), &cfg, exec))
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let sessions = synth_generate(3, 300, &SynthKnobs::default()).expect("default knobs are feasible");
    let passages: Vec<Passage> = sessions
        .iter()
        .flat_map(|s| s.context.turns().iter())
        .filter_map(|t| t.service())
        .flat_map(|svc| svc.attempts().iter())
        .enumerate()
        .map(|(i, a)| Passage { id: format!("p{i:06}"), text: a.knowledge.text.clone() })
        .collect();
    let index = Bm25Index::new(passages);
    let mut group = c.benchmark_group("bm25_search");
    group.throughput(Throughput::Elements(index.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| index.search(black_box("景区开放时间和门票价格"), 3, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation, validation, retrieval);
criterion_main!(benches);
