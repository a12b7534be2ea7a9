use std::path::{Path, PathBuf};

use rand::seq::index;

use super::config::RunConfig;
use super::stage::{AtStage, Stage, StageError};
use crate::error::Error;
use crate::exec::Exec;
use crate::graph::{
    capped_ego_net, load_communities, load_edge_list, load_features, preprocess, Community, CommunitySet, Graph,
    PreprocessParams,
};
use crate::locator::{
    encode_all_candidates, encode_community, located_communities, match_candidates, match_threshold, node_embeddings,
    per_pattern_counts, train_locator, EncodeMode, EncoderParams, LocatorLog, Match,
};
use crate::metrics::{filter_overlap, ScoreReport};
use crate::ndiff::read_checkpoint;
use crate::rewriter::{rewrite_all, train_rewriter, AgentParams, Env, Limits, RewriterLog};
use crate::rng;

type StageResult<T> = Result<T, StageError>;

/// Graph and split communities after ingest and preprocessing.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graph: Graph,
    pub sets: CommunitySet,
}

impl Prepared {
    /// Community size cap: configured, or the largest training community.
    pub fn size_cap(&self, cfg: &RunConfig) -> usize {
        cfg.size_cap.unwrap_or_else(|| self.sets.max_train_size())
    }

    /// Training and validation communities, the reference set for overlap filtering.
    pub fn seen(&self) -> Vec<Community> {
        let mut seen = self.sets.train();
        seen.extend(self.sets.validation());
        seen
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> StageResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("'{key}' is not set")))
        .at(Stage::Config)
}

/// Loads the edge list, optional features and ground-truth communities.
pub fn ingest(cfg: &RunConfig) -> StageResult<(Graph, Vec<Community>)> {
    let edges = required(&cfg.edges, "edges")?;
    let comms = required(&cfg.communities, "communities")?;
    let mut graph = load_edge_list(edges).at(Stage::Ingest)?;
    if let Some(f) = &cfg.features {
        graph = load_features(f, graph).at(Stage::Ingest)?;
    }
    let communities = load_communities(comms, &graph).at(Stage::Ingest)?;
    log::info!(
        "ingested {} nodes, {} edges, {} communities",
        graph.node_count(),
        graph.edge_count(),
        communities.len()
    );
    Ok((graph, communities))
}

/// Optional size filter and sampling, then the prefix split.
pub fn prepare(cfg: &RunConfig, graph: Graph, communities: Vec<Community>) -> StageResult<Prepared> {
    let (graph, communities) = if cfg.preprocess {
        let params = PreprocessParams {
            percentile: cfg.size_percentile,
            sample_count: cfg.sample_count,
            seed: cfg.stage_seed("preprocess"),
        };
        preprocess(&graph, &communities, &params).at(Stage::Preprocess)?
    } else {
        (graph, communities)
    };
    let sets = CommunitySet::with_prefix_split(communities, cfg.train_count, cfg.validation_count)
        .at(Stage::Preprocess)?;
    log::info!(
        "split: {} train, {} validation, {} test over {} nodes",
        sets.split.train.len(),
        sets.split.validation.len(),
        sets.split.test.len(),
        graph.node_count()
    );
    Ok(Prepared { graph, sets })
}

pub fn load_prepared(cfg: &RunConfig) -> StageResult<Prepared> {
    let (graph, comms) = ingest(cfg)?;
    prepare(cfg, graph, comms)
}

pub fn fit_locator(data: &Prepared, cfg: &RunConfig, exec: &Exec) -> StageResult<(EncoderParams, LocatorLog)> {
    train_locator(&data.graph, &data.sets.train(), &cfg.locator_config(), exec).at(Stage::Locator)
}

pub fn fit_rewriter(
    data: &Prepared,
    encoder: &EncoderParams,
    cfg: &RunConfig,
    exec: &Exec,
) -> StageResult<(AgentParams, RewriterLog)> {
    let emb = node_embeddings(&data.graph, encoder).at(Stage::Rewriter)?;
    let mut rc = cfg.rewriter_config();
    rc.size_cap = Some(data.size_cap(cfg));
    train_rewriter(&data.graph, &emb, &data.sets.train(), &rc, exec).at(Stage::Rewriter)
}

pub fn load_encoder(path: &Path) -> StageResult<EncoderParams> {
    read_checkpoint(path)
        .and_then(EncoderParams::from_param_set)
        .at(Stage::Ingest)
}

pub fn load_agent(path: &Path) -> StageResult<AgentParams> {
    read_checkpoint(path)
        .and_then(AgentParams::from_param_set)
        .at(Stage::Ingest)
}

/// Output of the locator stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Located {
    pub matches: Vec<Match>,
    pub communities: Vec<Community>,
}

/// Number of communities to locate: configured `n`, else ten per training
/// community, never more than there are candidate centers.
pub fn located_count(data: &Prepared, cfg: &RunConfig) -> usize {
    let wanted = cfg.n.unwrap_or(10 * data.sets.split.train.len());
    if wanted > data.graph.node_count() {
        log::warn!("n = {wanted} exceeds the {} candidates; clamping", data.graph.node_count());
    }
    wanted.min(data.graph.node_count())
}

/// Encodes every candidate ego net and matches them to the training
/// communities, by count or (when `eta` is set) by distance threshold.
pub fn locate(data: &Prepared, encoder: &EncoderParams, cfg: &RunConfig, exec: &Exec) -> StageResult<Located> {
    let run = || -> crate::Result<Located> {
        let train = data.sets.train();
        let cap = data.size_cap(cfg);
        let patterns = train
            .iter()
            .map(|c| encode_community(&data.graph, c, encoder, EncodeMode::Inference))
            .collect::<crate::Result<Vec<_>>>()?;
        let table = encode_all_candidates(&data.graph, encoder, cfg.k, cap, exec)?;
        let matches = match cfg.eta {
            Some(eta) => match_threshold(&patterns, &table, eta, cfg.match_metric, exec)?,
            None => {
                let counts = per_pattern_counts(located_count(data, cfg), patterns.len());
                match_candidates(&patterns, &table, &counts, cfg.match_metric, exec)?
            }
        };
        let communities = located_communities(&data.graph, &matches, cfg.k, cap)?;
        Ok(Located { matches, communities })
    };
    run().at(Stage::Detect)
}

/// Greedy rewrite of every located community.
pub fn refine(
    data: &Prepared,
    encoder: &EncoderParams,
    agent: &AgentParams,
    located: &[Community],
    cfg: &RunConfig,
    exec: &Exec,
) -> StageResult<Vec<Community>> {
    let run = || -> crate::Result<Vec<Community>> {
        let emb = node_embeddings(&data.graph, encoder)?;
        let limits = Limits::new(data.size_cap(cfg), cfg.boundary_cap)?;
        let env = Env::new(&data.graph, &emb, limits)?;
        rewrite_all(&env, agent, located, exec)
    };
    run().at(Stage::Rewriter)
}

/// Capped k-ego nets around distinct, uniformly drawn centers.
pub fn random_ego_nets(graph: &Graph, count: usize, k: usize, size_cap: usize, seed: u64) -> crate::Result<Vec<Community>> {
    if count > graph.node_count() {
        return Err(Error::InvalidParameter(format!(
            "{count} random ego nets requested from {} nodes",
            graph.node_count()
        )));
    }
    let mut r = rng::rng_for(seed, "random-ego", 0);
    index::sample(&mut r, graph.node_count(), count)
        .into_iter()
        .map(|u| capped_ego_net(graph, u, k, size_cap))
        .collect()
}

/// Drops predictions that mostly overlap training/validation communities
/// when the config asks for it.
pub fn finalize(data: &Prepared, cfg: &RunConfig, predictions: Vec<Community>) -> StageResult<Vec<Community>> {
    if cfg.filter_overlap {
        filter_overlap(&predictions, &data.seen(), cfg.overlap_threshold).at(Stage::Eval)
    } else {
        Ok(predictions)
    }
}

/// Scores against the test split; `None` when there is no test split or
/// nothing to score.
pub fn score(data: &Prepared, predictions: &[Community], exec: &Exec) -> StageResult<Option<ScoreReport>> {
    let truths = data.sets.test();
    if truths.is_empty() || predictions.is_empty() {
        return Ok(None);
    }
    ScoreReport::compute(predictions, &truths, exec).map(Some).at(Stage::Eval)
}
