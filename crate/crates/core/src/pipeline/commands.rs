use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::run::{
    finalize, fit_locator, fit_rewriter, load_agent, load_encoder, load_prepared, locate, random_ego_nets, refine,
    score, Located, Prepared,
};
use super::stage::{AtStage, Stage, StageError};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{load_raw_communities, synth_planted, write_communities, write_edge_list, Community, Graph, PlantedParams};
use crate::locator::EncoderParams;
use crate::metrics::ScoreReport;
use crate::ndiff::{write_checkpoint, ParamSet};
use crate::rewriter::AgentParams;

type StageResult<T> = std::result::Result<T, StageError>;

pub const PREDICTIONS: &str = "predictions.txt";
pub const LOCATED: &str = "located.txt";
pub const MATCHES: &str = "matches.tsv";
pub const METRICS: &str = "metrics.tsv";
pub const BEST_MATCHES: &str = "best_matches.tsv";
pub const LOCATOR_CKPT: &str = "locator.ckpt";
pub const REWRITER_CKPT: &str = "rewriter.ckpt";
pub const LOCATOR_LOG: &str = "locator_log.tsv";
pub const REWRITER_LOG: &str = "rewriter_log.tsv";
pub const ABLATION: &str = "ablation.tsv";
pub const CONFIG: &str = "config.txt";
pub const MANIFEST: &str = "manifest.txt";

/// Files written into one output directory, recorded for the manifest.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> StageResult<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).at(Stage::Output)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, content: &str) -> StageResult<()> {
        let p = self.path(name);
        fs::write(&p, content).map_err(|e| Error::io(&p, e)).at(Stage::Output)
    }

    fn communities(&mut self, name: &str, graph: &Graph, comms: &[Community]) -> StageResult<()> {
        let p = self.path(name);
        write_communities(&p, graph, comms).at(Stage::Output)
    }

    fn checkpoint(&mut self, name: &str, set: &ParamSet) -> StageResult<()> {
        let p = self.path(name);
        write_checkpoint(&p, set).at(Stage::Output)
    }

    /// Writes the normalized config and a manifest naming the config hash,
    /// every derived seed and every file written.
    fn finish(mut self, command: &str, cfg: &RunConfig) -> StageResult<()> {
        self.text(CONFIG, &cfg.to_text())?;
        let mut m = String::new();
        let _ = writeln!(m, "command\t{command}");
        let _ = writeln!(m, "config_hash\t{}", cfg.hash());
        let _ = writeln!(m, "seed\t{}", cfg.seed);
        for stage in SEEDED_STAGES {
            let _ = writeln!(m, "seed.{stage}\t{}", cfg.stage_seed(stage));
        }
        for f in &self.files {
            let _ = writeln!(m, "file\t{f}");
        }
        let p = self.dir.join(MANIFEST);
        fs::write(&p, m).map_err(|e| Error::io(&p, e)).at(Stage::Output)
    }
}

/// Stages that draw random numbers, each from its own derived seed.
pub const SEEDED_STAGES: [&str; 4] = ["preprocess", "locator", "rewriter", "baseline"];

fn matches_tsv(graph: &Graph, located: &Located) -> String {
    let mut out = String::from("pattern\tcenter\tdistance\n");
    for m in &located.matches {
        let _ = writeln!(out, "{}\t{}\t{}", m.pattern, graph.original_id(m.center), m.distance);
    }
    out
}

fn losses_tsv(losses: &[f64]) -> String {
    losses.iter().enumerate().map(|(i, l)| format!("{i}\t{l}\n")).collect()
}

fn write_scores(art: &mut Artifacts, report: &Option<ScoreReport>) -> StageResult<()> {
    if let Some(r) = report {
        art.text(METRICS, &r.to_tsv())?;
        art.text(BEST_MATCHES, &r.best_match_tsv())?;
    }
    Ok(())
}

fn locator_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.locator_checkpoint.clone().unwrap_or_else(|| cfg.output.join(LOCATOR_CKPT))
}

/// Result of a detection run.
#[derive(Clone, Debug)]
pub struct DetectOutcome {
    pub located: Located,
    /// Final predictions, after rewriting (when an agent is available) and filtering.
    pub predictions: Vec<Community>,
    pub report: Option<ScoreReport>,
}

fn detect_and_write(
    art: &mut Artifacts,
    data: &Prepared,
    encoder: &EncoderParams,
    agent: Option<&AgentParams>,
    cfg: &RunConfig,
    exec: &Exec,
) -> StageResult<DetectOutcome> {
    let located = locate(data, encoder, cfg, exec)?;
    let rewritten = match agent {
        Some(a) => refine(data, encoder, a, &located.communities, cfg, exec)?,
        None => located.communities.clone(),
    };
    let predictions = finalize(data, cfg, rewritten)?;
    let report = score(data, &predictions, exec)?;
    art.communities(PREDICTIONS, &data.graph, &predictions)?;
    art.communities(LOCATED, &data.graph, &located.communities)?;
    art.text(MATCHES, &matches_tsv(&data.graph, &located))?;
    write_scores(art, &report)?;
    Ok(DetectOutcome {
        located,
        predictions,
        report,
    })
}

/// Full run: prepare, train both stages, detect, rewrite, filter, score.
pub fn cmd_pipeline(cfg: &RunConfig, exec: &Exec) -> StageResult<DetectOutcome> {
    let data = load_prepared(cfg)?;
    let mut art = Artifacts::create(&cfg.output)?;
    let (encoder, loc_log) = fit_locator(&data, cfg, exec)?;
    art.checkpoint(LOCATOR_CKPT, encoder.params())?;
    art.text(LOCATOR_LOG, &losses_tsv(&loc_log.batch_losses))?;
    let (agent, rw_log) = fit_rewriter(&data, &encoder, cfg, exec)?;
    art.checkpoint(REWRITER_CKPT, agent.params())?;
    art.text(REWRITER_LOG, &rw_log.to_tsv())?;
    let outcome = detect_and_write(&mut art, &data, &encoder, Some(&agent), cfg, exec)?;
    art.finish("pipeline", cfg)?;
    Ok(outcome)
}

pub fn cmd_train_locator(cfg: &RunConfig, exec: &Exec) -> StageResult<EncoderParams> {
    let data = load_prepared(cfg)?;
    let mut art = Artifacts::create(&cfg.output)?;
    let (encoder, log) = fit_locator(&data, cfg, exec)?;
    art.checkpoint(LOCATOR_CKPT, encoder.params())?;
    art.text(LOCATOR_LOG, &losses_tsv(&log.batch_losses))?;
    art.finish("train-locator", cfg)?;
    Ok(encoder)
}

/// Trains the agent on top of a saved encoder (`locator_checkpoint`, or
/// the one in the output directory).
pub fn cmd_train_rewriter(cfg: &RunConfig, exec: &Exec) -> StageResult<AgentParams> {
    let data = load_prepared(cfg)?;
    let encoder = load_encoder(&locator_checkpoint_path(cfg))?;
    let mut art = Artifacts::create(&cfg.output)?;
    let (agent, log) = fit_rewriter(&data, &encoder, cfg, exec)?;
    art.checkpoint(REWRITER_CKPT, agent.params())?;
    art.text(REWRITER_LOG, &log.to_tsv())?;
    art.finish("train-rewriter", cfg)?;
    Ok(agent)
}

/// Detection with saved models. The agent is used when
/// `rewriter_checkpoint` is set or a checkpoint sits in the output
/// directory; otherwise the located communities are the predictions.
pub fn cmd_detect(cfg: &RunConfig, exec: &Exec) -> StageResult<DetectOutcome> {
    let data = load_prepared(cfg)?;
    let encoder = load_encoder(&locator_checkpoint_path(cfg))?;
    let agent = match &cfg.rewriter_checkpoint {
        Some(p) => Some(load_agent(p)?),
        None => {
            let p = cfg.output.join(REWRITER_CKPT);
            if p.exists() {
                Some(load_agent(&p)?)
            } else {
                None
            }
        }
    };
    let mut art = Artifacts::create(&cfg.output)?;
    let outcome = detect_and_write(&mut art, &data, &encoder, agent.as_ref(), cfg, exec)?;
    art.finish("detect", cfg)?;
    Ok(outcome)
}

/// Scores two community files against each other. Node ids are matched
/// by value; no graph is needed.
pub fn cmd_eval(preds: &Path, truths: &Path, exec: &Exec) -> StageResult<ScoreReport> {
    let p = load_raw_communities(preds).at(Stage::Ingest)?;
    let t = load_raw_communities(truths).at(Stage::Ingest)?;
    let ids: Vec<u64> = p.iter().chain(&t).flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let dense = |raw: Vec<Vec<u64>>| -> Result<Vec<Community>> {
        raw.into_iter()
            .filter(|c| !c.is_empty())
            .map(|c| Community::new(c.iter().map(|u| ids.binary_search(u).expect("collected")).collect()))
            .collect()
    };
    let (p, t) = (dense(p).at(Stage::Ingest)?, dense(t).at(Stage::Ingest)?);
    ScoreReport::compute(&p, &t, exec).at(Stage::Eval)
}

/// Writes a planted-partition benchmark: edge list, community file and a
/// manifest of every generator parameter.
pub fn cmd_synth(params: &PlantedParams, out: &Path) -> StageResult<(Graph, Vec<Community>)> {
    let (graph, comms) = synth_planted(params).at(Stage::Config)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e)).at(Stage::Output)?;
    write_edge_list(out.join("edges.txt"), &graph).at(Stage::Output)?;
    write_communities(out.join("communities.txt"), &graph, &comms).at(Stage::Output)?;
    let manifest = format!(
        "generator\tplanted\ncommunities\t{}\nmin_size\t{}\nmax_size\t{}\np_in\t{}\ncross_links\t{}\nseed\t{}\n\
         file\tedges.txt\nfile\tcommunities.txt\n",
        params.communities, params.min_size, params.max_size, params.p_in, params.cross_links, params.seed
    );
    let p = out.join(MANIFEST);
    fs::write(&p, manifest).map_err(|e| Error::io(&p, e)).at(Stage::Output)?;
    Ok((graph, comms))
}

/// One row of the ablation report.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub method: &'static str,
    pub report: ScoreReport,
}

pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let mut out = String::from("method\tf1\tjaccard\tonmi\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            r.method, r.report.f1, r.report.jaccard, r.report.onmi
        );
    }
    out
}

/// Random ego nets vs locator vs locator + rewriter, all scored against
/// the test split. Saved checkpoints are reused when configured;
/// otherwise both stages are trained.
pub fn cmd_ablate(cfg: &RunConfig, exec: &Exec) -> StageResult<Vec<AblationRow>> {
    let data = load_prepared(cfg)?;
    if data.sets.split.test.is_empty() {
        return Err(Error::NoCommunities("ablation needs a non-empty test split".into())).at(Stage::Eval);
    }
    let mut art = Artifacts::create(&cfg.output)?;
    let encoder = match &cfg.locator_checkpoint {
        Some(p) => load_encoder(p)?,
        None => fit_locator(&data, cfg, exec)?.0,
    };
    let agent = match &cfg.rewriter_checkpoint {
        Some(p) => load_agent(p)?,
        None => fit_rewriter(&data, &encoder, cfg, exec)?.0,
    };
    let located = locate(&data, &encoder, cfg, exec)?;
    let count = located.communities.len();
    let random = random_ego_nets(&data.graph, count, cfg.k, data.size_cap(cfg), cfg.stage_seed("baseline"))
        .at(Stage::Detect)?;
    let rewritten = refine(&data, &encoder, &agent, &located.communities, cfg, exec)?;
    let mut rows = Vec::new();
    for (method, comms) in [
        ("random_ego", random),
        ("locator", located.communities),
        ("locator_rewriter", rewritten),
    ] {
        let comms = finalize(&data, cfg, comms)?;
        let report = score(&data, &comms, exec)?
            .ok_or_else(|| Error::NoCommunities(format!("{method}: nothing left to score")))
            .at(Stage::Eval)?;
        rows.push(AblationRow { method, report });
    }
    art.text(ABLATION, &ablation_tsv(&rows))?;
    art.finish("ablate", cfg)?;
    Ok(rows)
}
