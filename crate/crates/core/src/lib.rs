//! Privacy-preserving financial-intelligence protocols at desk scale.
//!
//! * [`he`]: group arithmetic, ElGamal and two additive schemes.
//! * [`pprl`]: keyed Bloom-filter encoding of names with Dice similarity.
//! * [`psi`]: private set intersection, its cardinality variant and a
//!   private greater-than comparison.
//! * [`fintracer`]: encrypted tag propagation over a multi-bank graph.
//! * [`fedlearn`]: vertically partitioned linear regression.
//! * [`dp`]: Laplace and geometric mechanisms.
//! * [`harness`]: message bus, transcripts, auditing and replay.
//! * [`schemas`]: JSON schemas of the scenario, config and transcript files.

pub mod dp;
pub mod fedlearn;
pub mod fintracer;
pub mod harness;
pub mod he;
pub mod pprl;
pub mod psi;
pub mod rng;
pub mod schemas;
