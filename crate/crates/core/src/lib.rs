//! Secure concurrent multipath transmission over fountain-coded erasure sessions.
//!
//! The crate is organised around the pipeline a sender runs each slot:
//!
//! * [`codec`]: Raptor-style fountain coding over GF(2) (dense precode followed
//!   by an LT inner code) with maximum-likelihood decoding.
//! * [`threat`]: intrusion and leakage probabilities over multi-session node
//!   topologies, plus measurement of what a single-session eavesdropper recovers.
//! * [`reliability`]: the latency-reliability-security function that scores a
//!   scheduling weight vector against per-session delay profiles.
//! * [`cmdp`]: the queue-aware constrained MDP, its linear-programming form,
//!   a self-contained simplex solver and threshold-policy extraction.
//! * [`sim`]: a timeslot Monte Carlo simulator that replays a policy.
//! * [`scenario`]: configuration files and the named parameter presets.
//!
//! Monte Carlo loops and parameter sweeps run on rayon when the `parallel`
//! feature is enabled (the default); see [`exec::Execution`].

pub mod cmdp;
pub mod codec;
pub mod error;
pub mod exec;
pub mod gf2;
pub mod reliability;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod threat;

pub use error::{Error, Result};
pub use exec::Execution;
pub use gf2::Gf2Matrix;
