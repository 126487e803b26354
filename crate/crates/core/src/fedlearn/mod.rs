//! Linear regression over vertically partitioned data.
//!
//! Each reporting entity holds some feature columns for the same aligned
//! individuals; the FIU holds the labels and the decryption key. Partial
//! predictions are summed under additive encryption in a chain through the
//! parties, the FIU decrypts the total and broadcasts the plaintext residual
//! vector `E = prediction - Y`, and every party takes a gradient step on its
//! own weights.
//!
//! The residual broadcast is part of the protocol and leaks each
//! individual's current prediction error to every party.

mod config;
mod data;
mod protocol;

pub use config::{loss_csv, weights_json, PartyFile, RunConfig, FEDLR_CONFIG_SCHEMA};
pub use data::{LabelSet, PartyDataset, Standardization, WeightsPartition};
pub use protocol::{
    add_partial, audit_policy, encrypted_round_robin, replay, residual, run_digest, run_fedlr, train, TrainConfig,
    TrainResult, DIVERGENCE_PATIENCE, FEDLR_PROTOCOL,
};

use crate::harness::HarnessError;
use crate::he::HeError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FedError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("training diverged at iteration {iteration}: loss rose {} times in a row ({recent_loss:?})", DIVERGENCE_PATIENCE)]
    Diverged { iteration: u32, recent_loss: Vec<f64> },
}
