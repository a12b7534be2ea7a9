//! Sequential vs rayon execution of the data-parallel inner loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use semicom::graph::{capped_ego_net, synth_planted, Community, Graph, PlantedParams};
use semicom::locator::{
    encode_all_candidates, encode_community, match_candidates, node_embeddings, per_pattern_counts, EncodeMode,
    EncoderParams, MatchMetric,
};
use semicom::metrics::ScoreReport;
use semicom::rewriter::{make_training_samples, sample_rollouts, AgentParams, Env, Limits};
use semicom::Exec;

fn benchmark_graph() -> (Graph, Vec<Community>) {
    synth_planted(&PlantedParams {
        communities: 60,
        min_size: 6,
        max_size: 12,
        p_in: 0.6,
        cross_links: 300,
        seed: 1,
    })
    .unwrap()
}

fn strategies() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::parallel())]
}

fn candidates(c: &mut Criterion) {
    let (g, _) = benchmark_graph();
    let enc = EncoderParams::new(g.feature_dim(), 64, 2, 0).unwrap();
    let mut group = c.benchmark_group("encode_all_candidates");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| encode_all_candidates(&g, &enc, 2, 12, &exec).unwrap())
        });
    }
    group.finish();
}

fn matching(c: &mut Criterion) {
    let (g, comms) = benchmark_graph();
    let enc = EncoderParams::new(g.feature_dim(), 64, 1, 0).unwrap();
    let table = encode_all_candidates(&g, &enc, 1, 12, &Exec::parallel()).unwrap();
    let patterns: Vec<Vec<f64>> = comms[..20]
        .iter()
        .map(|c| encode_community(&g, c, &enc, EncodeMode::Inference).unwrap())
        .collect();
    let counts = per_pattern_counts(200, patterns.len());
    let mut group = c.benchmark_group("match_candidates");
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| match_candidates(&patterns, &table, &counts, MatchMetric::Euclidean, &exec).unwrap())
        });
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let (g, comms) = benchmark_graph();
    let preds: Vec<Community> = (0..g.node_count())
        .step_by(2)
        .map(|u| capped_ego_net(&g, u, 1, 12).unwrap())
        .collect();
    let mut group = c.benchmark_group("score_report");
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ScoreReport::compute(&preds, &comms, &exec).unwrap())
        });
    }
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let (g, comms) = benchmark_graph();
    let enc = EncoderParams::new(g.feature_dim(), 64, 1, 0).unwrap();
    let emb = node_embeddings(&g, &enc).unwrap();
    let agent = AgentParams::new(64, 32, 0).unwrap();
    let env = Env::new(&g, &emb, Limits::new(12, 10).unwrap()).unwrap();
    let samples = make_training_samples(&g, &comms[..10], 1, 12, 40, 0).unwrap();
    let mut group = c.benchmark_group("sample_rollouts");
    group.sample_size(20);
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_rollouts(&env, &agent, &samples, 7, &exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, candidates, matching, scoring, rollouts);
criterion_main!(benches);
