//! End-to-end orchestration: configuration, stage functions and the
//! commands behind the command-line tool.

mod commands;
mod config;
mod run;
mod stage;

pub use commands::{
    ablation_tsv, cmd_ablate, cmd_detect, cmd_eval, cmd_pipeline, cmd_synth, cmd_train_locator, cmd_train_rewriter,
    AblationRow, DetectOutcome, ABLATION, BEST_MATCHES, CONFIG, LOCATED, LOCATOR_CKPT, LOCATOR_LOG, MANIFEST, MATCHES,
    METRICS, PREDICTIONS, REWRITER_CKPT, REWRITER_LOG, SEEDED_STAGES,
};
pub use config::RunConfig;
pub use run::{
    finalize, fit_locator, fit_rewriter, ingest, load_agent, load_encoder, load_prepared, locate, located_count,
    prepare, random_ego_nets, refine, score, Located, Prepared,
};
pub use stage::{AtStage, Stage, StageError};
