use semicom::graph::PlantedParams;
use semicom::pipeline::{cmd_ablate, cmd_synth, RunConfig};
use semicom::Exec;

fn planted_config(dir: &std::path::Path, seed: u64) -> RunConfig {
    let data = dir.join("data");
    cmd_synth(
        &PlantedParams {
            communities: 40,
            min_size: 6,
            max_size: 12,
            p_in: 0.6,
            cross_links: 200,
            seed,
        },
        &data,
    )
    .unwrap();
    RunConfig {
        edges: Some(data.join("edges.txt")),
        communities: Some(data.join("communities.txt")),
        output: dir.join("out"),
        k: 1,
        preprocess: false,
        train_count: 10,
        validation_count: 0,
        n: Some(30),
        rewriter_epochs: 300,
        seed: 5,
        ..RunConfig::default()
    }
}

#[test]
fn rewriting_improves_located_communities() {
    let dir = tempfile::tempdir().unwrap();
    let rows = cmd_ablate(&planted_config(dir.path(), 1), &Exec::parallel()).unwrap();
    let onmi = |m: &str| rows.iter().find(|r| r.method == m).unwrap().report.onmi;
    let f1 = |m: &str| rows.iter().find(|r| r.method == m).unwrap().report.f1;
    assert!(onmi("locator_rewriter") >= onmi("locator"), "{} vs {}", onmi("locator_rewriter"), onmi("locator"));
    assert!(f1("locator_rewriter") >= f1("locator"));
}

#[test]
fn ablation_is_deterministic_across_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = planted_config(dir.path(), 4);
    cfg.rewriter_epochs = 20;
    let a = cmd_ablate(&cfg, &Exec::Sequential).unwrap();
    let b = cmd_ablate(&cfg, &Exec::parallel()).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.method, y.method);
        assert_eq!(x.report, y.report);
    }
}
