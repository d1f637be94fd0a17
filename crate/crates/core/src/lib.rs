//! Identifiability of direct causal effects in linear structural equation
//! models with explicit latent factors.
//!
//! The crate decides whether the direct-effect matrix of a latent-factor
//! graph can be recovered from the observable covariance matrix:
//!
//! - [`graph`]: latent-factor and mixed graph representations, half-trek
//!   reachability, latent projection, canonical forms.
//! - [`flow`]: integer max-flow with unit node capacities and path
//!   decomposition.
//! - [`criterion`]: the latent-factor half-trek criterion, its flow-graph
//!   reduction, the recursive identification algorithm, and the mixed-graph
//!   half-trek criterion.
//! - [`model`]: exact rational parametrization of the covariance model and
//!   deterministic parameter sampling.
//! - [`identify`]: exact recovery of the parameter matrices from a covariance
//!   matrix along a certificate.
//! - [`dimension`]: Jacobian-rank dimension tests deciding generically
//!   finite-to-one versus infinite-to-one parametrizations.
//! - [`cnf`]: reduction from CNF satisfiability to the single-node criterion
//!   check, with a brute-force oracle.
//! - [`census`]: enumeration of unlabeled graph classes with fixed latent
//!   structure and their classification.

pub mod bitset;
pub mod census;
pub mod cnf;
pub mod criterion;
pub mod dimension;
pub mod flow;
pub mod graph;
pub mod identify;
pub mod model;
pub mod rational;
pub mod rmatrix;

pub use bitset::BitSet;
pub use graph::{parse_graph, parse_mixed_graph, GraphError, LatentFactorGraph, MixedGraph};
pub use rational::Rational;
pub use rmatrix::RMatrix;
