use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::locator::{LocatorConfig, MatchMetric};
use crate::rewriter::RewriterConfig;

/// Every run setting. Defaults are the published hyperparameters; unset
/// optional values are derived from the data at run time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub edges: Option<PathBuf>,
    pub communities: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub output: PathBuf,
    pub locator_checkpoint: Option<PathBuf>,
    pub rewriter_checkpoint: Option<PathBuf>,

    /// Ego-net radius and GCN depth, 1 or 2.
    pub k: usize,
    pub dim: usize,
    pub alpha: f64,
    pub locator_lr: f64,
    pub locator_epochs: usize,
    pub locator_batches: usize,
    pub pairs_per_batch: usize,
    pub dropout: f64,

    pub rewriter_lr: f64,
    pub rewriter_epochs: usize,
    pub episodes_per_epoch: usize,
    pub rewriter_hidden: usize,
    pub boundary_cap: usize,
    /// Community size cap; unset means the largest training community.
    pub size_cap: Option<usize>,

    /// Number of located communities; unset means 10x the training count.
    pub n: Option<usize>,
    /// Distance threshold; when set it replaces the count-based matcher.
    pub eta: Option<f64>,
    pub match_metric: MatchMetric,

    pub train_count: usize,
    pub validation_count: usize,
    pub preprocess: bool,
    pub size_percentile: f64,
    pub sample_count: usize,
    pub filter_overlap: bool,
    pub overlap_threshold: f64,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let loc = LocatorConfig::default();
        let rw = RewriterConfig::default();
        RunConfig {
            edges: None,
            communities: None,
            features: None,
            output: PathBuf::from("out"),
            locator_checkpoint: None,
            rewriter_checkpoint: None,
            k: loc.layers,
            dim: loc.dim,
            alpha: loc.alpha,
            locator_lr: loc.lr,
            locator_epochs: loc.epochs,
            locator_batches: loc.batches_per_epoch,
            pairs_per_batch: loc.pairs_per_batch,
            dropout: loc.dropout,
            rewriter_lr: rw.lr,
            rewriter_epochs: rw.epochs,
            episodes_per_epoch: rw.episodes_per_epoch,
            rewriter_hidden: rw.hidden,
            boundary_cap: rw.boundary_cap,
            size_cap: None,
            n: None,
            eta: None,
            match_metric: MatchMetric::Euclidean,
            train_count: 90,
            validation_count: 10,
            preprocess: true,
            size_percentile: 0.9,
            sample_count: 1000,
            filter_overlap: false,
            overlap_threshold: 0.5,
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn metric_name(m: MatchMetric) -> &'static str {
    match m {
        MatchMetric::Euclidean => "euclidean",
        MatchMetric::OrderPenalty => "order",
    }
}

impl RunConfig {
    /// Parses `key = value` lines. `#` starts a comment; blank values
    /// leave optional settings unset; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            c.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            c.resolve_paths(dir);
        }
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.edges,
            &mut self.communities,
            &mut self.features,
            &mut self.locator_checkpoint,
            &mut self.rewriter_checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output);
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "edges" => self.edges = opt_path(v),
            "communities" => self.communities = opt_path(v),
            "features" => self.features = opt_path(v),
            "output" => self.output = PathBuf::from(v),
            "locator_checkpoint" => self.locator_checkpoint = opt_path(v),
            "rewriter_checkpoint" => self.rewriter_checkpoint = opt_path(v),
            "k" => self.k = parse_num(key, v)?,
            "dim" => self.dim = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "locator_lr" => self.locator_lr = parse_num(key, v)?,
            "locator_epochs" => self.locator_epochs = parse_num(key, v)?,
            "locator_batches" => self.locator_batches = parse_num(key, v)?,
            "pairs_per_batch" => self.pairs_per_batch = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "rewriter_lr" => self.rewriter_lr = parse_num(key, v)?,
            "rewriter_epochs" => self.rewriter_epochs = parse_num(key, v)?,
            "episodes_per_epoch" => self.episodes_per_epoch = parse_num(key, v)?,
            "rewriter_hidden" => self.rewriter_hidden = parse_num(key, v)?,
            "boundary_cap" => self.boundary_cap = parse_num(key, v)?,
            "size_cap" => self.size_cap = parse_opt(key, v)?,
            "n" => self.n = parse_opt(key, v)?,
            "eta" => self.eta = parse_opt(key, v)?,
            "match_metric" => {
                self.match_metric = match v {
                    "euclidean" => MatchMetric::Euclidean,
                    "order" => MatchMetric::OrderPenalty,
                    _ => return Err(Error::Config(format!("{key}: expected euclidean or order, got '{v}'"))),
                }
            }
            "train_count" => self.train_count = parse_num(key, v)?,
            "validation_count" => self.validation_count = parse_num(key, v)?,
            "preprocess" => self.preprocess = parse_bool(key, v)?,
            "size_percentile" => self.size_percentile = parse_num(key, v)?,
            "sample_count" => self.sample_count = parse_num(key, v)?,
            "filter_overlap" => self.filter_overlap = parse_bool(key, v)?,
            "overlap_threshold" => self.overlap_threshold = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !(1..=2).contains(&self.k) {
            return fail(format!("k must be 1 or 2, got {}", self.k));
        }
        for (name, v) in [
            ("dim", self.dim),
            ("locator_batches", self.locator_batches),
            ("pairs_per_batch", self.pairs_per_batch),
            ("episodes_per_epoch", self.episodes_per_epoch),
            ("rewriter_hidden", self.rewriter_hidden),
            ("boundary_cap", self.boundary_cap),
            ("train_count", self.train_count),
            ("sample_count", self.sample_count),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !finite_pos(self.alpha) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        for (name, lr) in [("locator_lr", self.locator_lr), ("rewriter_lr", self.rewriter_lr)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return fail(format!("{name} must be non-negative, got {lr}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.size_cap == Some(0) || self.n == Some(0) {
            return fail("size_cap and n must be positive when set".into());
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta >= 0.0) {
                return fail(format!("eta must be non-negative, got {eta}"));
            }
        }
        if !(self.size_percentile > 0.0 && self.size_percentile <= 1.0) {
            return fail(format!("size_percentile must be in (0, 1], got {}", self.size_percentile));
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return fail(format!("overlap_threshold must be in [0, 1], got {}", self.overlap_threshold));
        }
        if self.output.as_os_str().is_empty() {
            return fail("output must not be empty".into());
        }
        Ok(())
    }

    /// Normalized text: every key in a fixed order, one per line.
    pub fn to_text(&self) -> String {
        let rows = [
            ("edges", show_path(&self.edges)),
            ("communities", show_path(&self.communities)),
            ("features", show_path(&self.features)),
            ("output", self.output.display().to_string()),
            ("locator_checkpoint", show_path(&self.locator_checkpoint)),
            ("rewriter_checkpoint", show_path(&self.rewriter_checkpoint)),
            ("k", self.k.to_string()),
            ("dim", self.dim.to_string()),
            ("alpha", self.alpha.to_string()),
            ("locator_lr", self.locator_lr.to_string()),
            ("locator_epochs", self.locator_epochs.to_string()),
            ("locator_batches", self.locator_batches.to_string()),
            ("pairs_per_batch", self.pairs_per_batch.to_string()),
            ("dropout", self.dropout.to_string()),
            ("rewriter_lr", self.rewriter_lr.to_string()),
            ("rewriter_epochs", self.rewriter_epochs.to_string()),
            ("episodes_per_epoch", self.episodes_per_epoch.to_string()),
            ("rewriter_hidden", self.rewriter_hidden.to_string()),
            ("boundary_cap", self.boundary_cap.to_string()),
            ("size_cap", show(&self.size_cap)),
            ("n", show(&self.n)),
            ("eta", show(&self.eta)),
            ("match_metric", metric_name(self.match_metric).to_string()),
            ("train_count", self.train_count.to_string()),
            ("validation_count", self.validation_count.to_string()),
            ("preprocess", self.preprocess.to_string()),
            ("size_percentile", self.size_percentile.to_string()),
            ("sample_count", self.sample_count.to_string()),
            ("filter_overlap", self.filter_overlap.to_string()),
            ("overlap_threshold", self.overlap_threshold.to_string()),
            ("seed", self.seed.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in &rows {
            if v.is_empty() {
                let _ = writeln!(out, "{k} =");
            } else {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// SHA-256 of the normalized text, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn locator_config(&self) -> LocatorConfig {
        LocatorConfig {
            dim: self.dim,
            layers: self.k,
            alpha: self.alpha,
            lr: self.locator_lr,
            epochs: self.locator_epochs,
            batches_per_epoch: self.locator_batches,
            pairs_per_batch: self.pairs_per_batch,
            dropout: self.dropout,
            seed: self.stage_seed("locator"),
        }
    }

    pub fn rewriter_config(&self) -> RewriterConfig {
        RewriterConfig {
            hidden: self.rewriter_hidden,
            lr: self.rewriter_lr,
            epochs: self.rewriter_epochs,
            episodes_per_epoch: self.episodes_per_epoch,
            boundary_cap: self.boundary_cap,
            radius: self.k,
            size_cap: self.size_cap,
            seed: self.stage_seed("rewriter"),
        }
    }

    /// Seed of a named stage, derived from the base seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        crate::rng::derive(self.seed, stage, 0)
    }
}

// Error's Display already prefixes "config error:"; keep just the message
// when re-wrapping with a line number.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
