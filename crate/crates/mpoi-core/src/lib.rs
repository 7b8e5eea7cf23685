//! Markovian price of information: combinatorial optimization where each
//! element's value sits behind an absorbing Markov chain that must be paid,
//! step by step, to reveal it.
//!
//! The crate provides:
//! - Markov systems with validation, classification, and seeded sampling
//!   ([`markov`]);
//! - the penalized stopping game, state grades, prevailing costs/rewards, and
//!   the Weitzman reservation value ([`grade`]);
//! - packing/covering feasibility oracles ([`constraints`]) and frugal greedy
//!   algorithms over them ([`frugal`]);
//! - adaptive probing strategies driven by grades, their robust variant, the
//!   teasing-game evaluator, and surrogate bounds ([`adaptive`]);
//! - an LP + online-contention-resolution pipeline for the commitment
//!   constraint ([`commitment`]);
//! - exact ground truth via dynamic programming and full trajectory-profile
//!   enumeration ([`oracle`]);
//! - scenario files, reports, and the `mpoi` CLI ([`scenario`], [`report`],
//!   [`cli`]).

pub mod adaptive;
pub mod cli;
pub mod commitment;
pub mod constraints;
pub mod error;
pub mod frugal;
pub mod grade;
pub mod markov;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod simplex;

pub use error::{Error, Result};
