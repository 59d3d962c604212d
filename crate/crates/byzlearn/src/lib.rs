//! Simulator and analysis toolkit for Byzantine-resilient non-Bayesian
//! learning over directed multi-agent networks.
//!
//! Agents repeatedly observe private signals about an unknown world state,
//! exchange log-belief vectors with their neighbors, mask up to `f`
//! Byzantine peers by aggregating Tverberg points of received values, and
//! fold their own signal likelihoods in with a Bayesian update. The
//! toolkit runs such systems deterministically, checks the structural and
//! identifiability assumptions learning rests on, and verifies the
//! row-stochastic matrix picture of an execution after the fact.
//!
//! ## Modules
//!
//! - [`topology`] — directed graphs, strongly connected and source
//!   components, reduced-graph enumeration.
//! - [`observation`] — signal models, KL divergences, the C0/C1 bounding
//!   constants, global identifiability checking.
//! - [`geometry`] — linear feasibility, convex-hull membership, Tverberg
//!   points with certifying partitions.
//! - [`protocol`] — the synchronous round engine and Byzantine adversary
//!   strategies with per-link equivocation.
//! - [`analysis`] — transition-matrix extraction, backward products,
//!   source-component mass checks, belief log-ratio reconstruction.
//! - [`harness`] — experiment configs, seeded multi-trial runs, trace
//!   output, and the command-line interface.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example tverberg_point
//! cargo run --example reduced_graphs
//! cargo run --example check_assumptions
//! cargo run --example byzantine_learning
//! cargo run --example disconnected_components
//! cargo run --example adversary_strategies
//! cargo run --example trace_analysis
//! ```

pub mod analysis;
pub mod geometry;
pub mod harness;
pub mod observation;
pub mod protocol;
pub mod topology;
