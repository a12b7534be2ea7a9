use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semicom::graph::PlantedParams;
use semicom::pipeline::{
    ablation_tsv, cmd_ablate, cmd_detect, cmd_eval, cmd_pipeline, cmd_synth, cmd_train_locator, cmd_train_rewriter,
    AtStage, DetectOutcome, RunConfig, Stage, StageError, BEST_MATCHES, METRICS,
};
use semicom::Exec;

/// Semi-supervised community detection: locate communities that resemble
/// a few labelled ones, then refine them with a learned rewriting policy.
#[derive(Parser)]
#[command(name = "semicom", version)]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads: 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train both stages, detect, rewrite and score.
    Pipeline,
    /// Train the community encoder only.
    TrainLocator,
    /// Train the rewriting agent on a saved encoder.
    TrainRewriter,
    /// Detect communities with saved checkpoints.
    Detect,
    /// Score a prediction file against a ground-truth file.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        truths: PathBuf,
    },
    /// Generate a planted-partition benchmark.
    Synth(SynthArgs),
    /// Compare random ego nets, the locator, and locator plus rewriter.
    Ablate,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    communities: usize,
    #[arg(long, default_value_t = 6)]
    min_size: usize,
    #[arg(long, default_value_t = 12)]
    max_size: usize,
    #[arg(long, default_value_t = 0.6)]
    p_in: f64,
    /// Random edges between distinct communities.
    #[arg(long, default_value_t = 200)]
    links: usize,
}

fn config(cli: &Cli) -> Result<RunConfig, StageError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).at(Stage::Config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    cfg.validate().at(Stage::Config)?;
    Ok(cfg)
}

fn report_detection(outcome: &DetectOutcome) {
    match &outcome.report {
        Some(r) => print!("{}", r.to_tsv()),
        None => println!("communities\t{}", outcome.predictions.len()),
    }
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let exec = Exec::with_workers(cli.workers);
    match &cli.command {
        Command::Eval { preds, truths } => {
            let report = cmd_eval(preds, truths, &exec)?;
            print!("{}", report.to_tsv());
            if let Some(dir) = &cli.out {
                let write = |name: &str, text: String| {
                    std::fs::create_dir_all(dir)
                        .and_then(|_| std::fs::write(dir.join(name), text))
                        .map_err(|e| semicom::Error::Io {
                            path: dir.join(name),
                            source: e,
                        })
                        .at(Stage::Output)
                };
                write(METRICS, report.to_tsv())?;
                write(BEST_MATCHES, report.best_match_tsv())?;
            }
        }
        Command::Synth(a) => {
            let cfg = config(cli)?;
            let params = PlantedParams {
                communities: a.communities,
                min_size: a.min_size,
                max_size: a.max_size,
                p_in: a.p_in,
                cross_links: a.links,
                seed: cfg.seed,
            };
            let (g, comms) = cmd_synth(&params, &cfg.output)?;
            println!("nodes\t{}\nedges\t{}\ncommunities\t{}", g.node_count(), g.edge_count(), comms.len());
        }
        Command::Pipeline => report_detection(&cmd_pipeline(&config(cli)?, &exec)?),
        Command::Detect => report_detection(&cmd_detect(&config(cli)?, &exec)?),
        Command::TrainLocator => {
            cmd_train_locator(&config(cli)?, &exec)?;
        }
        Command::TrainRewriter => {
            cmd_train_rewriter(&config(cli)?, &exec)?;
        }
        Command::Ablate => print!("{}", ablation_tsv(&cmd_ablate(&config(cli)?, &exec)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SEMICOM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
