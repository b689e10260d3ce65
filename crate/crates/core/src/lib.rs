//! Knowledge-guided design of graph neural network architectures.
//!
//! The crate is organised around five pieces: [`knowledge`] holds the prior
//! and experiment knowledge bases, [`gateway`] talks to completion and
//! embedding providers, [`arch`] defines genotypes and the search over them,
//! [`eval`] scores genotypes, and [`agents`] wires everything into the
//! planning pipeline. [`config`] turns a config file into those parts.

pub mod agents;
pub mod arch;
pub mod clock;
pub mod config;
pub mod eval;
pub mod gateway;
pub mod hash;
pub mod knowledge;
pub mod rng;

pub use agents::{Agents, ExperimentReport, RunResult, TaskPlan};
pub use arch::{decode, encode, ArchGenotype, SearchSpace};
pub use eval::{EvalBackend, EvalRequest, EvalResult};
pub use gateway::Gateway;
pub use knowledge::KnowledgeStore;
