use std::fmt;

use crate::error::Error;

/// Pipeline stage a failure is attributed to. Each maps to its own
/// process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Config,
    Ingest,
    Preprocess,
    Locator,
    Detect,
    Rewriter,
    Eval,
    Output,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Config,
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Locator,
        Stage::Detect,
        Stage::Rewriter,
        Stage::Eval,
        Stage::Output,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Locator => "locator",
            Stage::Detect => "detect",
            Stage::Rewriter => "rewriter",
            Stage::Eval => "eval",
            Stage::Output => "output",
        }
    }

    /// Exit status; starts at 3 so it never collides with 1 (panic) or 2
    /// (usage errors from the argument parser).
    pub fn exit_code(self) -> i32 {
        3 + Stage::ALL.iter().position(|&s| s == self).expect("listed") as i32
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

/// Tags the error of a library call with the stage it belongs to.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}
