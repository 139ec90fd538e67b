//! Decentralized stochastic optimization simulator.
//!
//! Simulates gradient-tracking algorithms over a network of `m` nodes that
//! communicate through a symmetric doubly stochastic mixing matrix. The
//! main algorithm, D-GET, combines a recursively variance-reduced local
//! gradient estimator (refreshed with a full or large batch every `q`
//! iterations) with a tracker variable that follows the global average
//! gradient. Baselines (GNSD, DGD, DSGD) run on the same state machinery.
//!
//! The crate is organized around the pieces a desk-scale experiment needs:
//!
//! - [`topology`]: communication graphs, mixing matrix recipes
//!   (Metropolis-Hastings, maximum-degree, Laplacian) and their spectral
//!   contraction factor `eta`.
//! - [`problems`]: synthetic finite-sum and online objectives with exact
//!   per-sample gradients, known Lipschitz constants, and an oracle counter
//!   that charges one unit per sample access.
//! - [`engine`]: the iteration loops, with per-node work parallelized via
//!   rayon (the `parallel` feature, on by default).
//! - [`theory`]: stepsize rules, potential-function constants, batch-size
//!   plans, and closed-form sample/communication predictions.
//! - [`diagnostics`]: the stationarity measure, tracking/estimator error
//!   decompositions, and the potential-descent checker. Diagnostics never
//!   touch the oracle counter.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, domain, node, iteration)`, so runs are reproducible bit for bit
//! regardless of how the per-node work is scheduled.

pub mod diagnostics;
pub mod engine;
pub mod problems;
pub mod stacked;
pub mod stream;
pub mod theory;
pub mod topology;
pub mod trace;

pub use engine::{Algorithm, AlgorithmConfig, EngineError, IterateState, Mode};
pub use problems::{FiniteSumProblem, IfoCounter, OnlineProblem, Problem, ProblemKind};
pub use stacked::Stacked;
pub use topology::{Graph, MixingMatrix, TopologyError};
pub use trace::{RunTrace, TraceRow};
