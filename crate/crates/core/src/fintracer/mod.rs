//! Encrypted breadth-first tag propagation across banks.
//!
//! Every account that takes part in a cross-institution transaction carries
//! an additively encrypted tag under the FIU's key, initialised to `Enc(1)`
//! for seed accounts and `Enc(0)` otherwise. In each round every bank sends
//! each neighbour one rerandomized copy of the source tag per cross edge,
//! and adds what it receives into its own tags. After `K` rounds the FIU
//! decrypts.
//!
//! Tags accumulate rather than saturate. With `A` the cross-edge adjacency
//! matrix and `s` the seed indicator, the tags after `K` rounds are
//! `(I + Aᵀ)^K s`: the number of walks from a seed of length at most `K`,
//! each walk of length `j` weighted by `C(K, j)`. A tag is nonzero exactly
//! when the account is reachable from a seed in at most `K` hops.

mod protocol;
mod scenario;

pub use protocol::{
    aggregate, audit_policy, build_partial_mappings, init_tags, replay, reveal, run, run_fintracer,
    scenario_digest, FinTracerResult, PartialMapping, RevealedTag, RevealedValue, TagVector, FINTRACER_PROTOCOL,
};
pub use scenario::{
    AccountRef, AccountSpec, DpSpec, EdgeSpec, Institution, InstitutionSpec, Network, RevealMode, Scenario, SeedSpec,
    SCENARIO_SCHEMA,
};

use crate::dp::DpError;
use crate::harness::HarnessError;
use crate::he::HeError;

/// Four banks, one seed account and six cross edges forming two paths that
/// merge at `d1`.
pub const NDIS_FIXTURE: &str = include_str!("../../fixtures/ndis.json");

pub fn ndis_scenario() -> Scenario {
    Scenario::from_json(NDIS_FIXTURE).expect("bundled fixture parses")
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FinTracerError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error("no tag for account {account} at {institution}")]
    UnknownAccount { institution: String, account: String },
    #[error("mapping entry for unknown edge [{}, {}] -> [{}, {}]", .src.0, .src.1, .dst.0, .dst.1)]
    UnknownEdge { src: AccountRef, dst: AccountRef },
    #[error("revealing [{institution}, {account}]: {source}")]
    Reveal {
        institution: String,
        account: String,
        source: HeError,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
}
