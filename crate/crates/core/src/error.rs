use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("illegal move {mv} in position\n{board}")]
    IllegalMove { mv: String, board: String },
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("shape mismatch: checkpoint has {field}={found}, configuration expects {expected}")]
    ShapeMismatch {
        field: &'static str,
        found: u64,
        expected: u64,
    },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at update {update}: policy={policy_loss} value={value_loss} entropy={entropy}")]
    NonFiniteLoss {
        update: u64,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}
