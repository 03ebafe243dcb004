//! Matching the vertices of a unipartite graph to the shared vertex set of a
//! bipartite network.
//!
//! The bipartite incidence matrix `B` (n shared vertices by m bipartite-only
//! vertices) is modelled column by column as a Markov random field whose edge
//! set is an unknown relabeling of the unipartite graph `A`. The matchers in
//! [`matcher`] jointly estimate the relabeling and the field parameters by
//! alternating a penalized likelihood fit ([`gauss_fit`], [`ising_fit`]) with a
//! Frank-Wolfe quadratic assignment step ([`assign`]).
//!
//! [`baselines`] provides the collapse-then-match pipelines and error metrics,
//! [`experiment`] the Monte-Carlo harness used by the `bipmatch` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::tabs_in_doc_comments)]

pub mod assign;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod gauss_fit;
pub mod graphs;
pub mod io;
pub mod ising_fit;
pub mod linalg;
pub mod matcher;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use graphs::{DoublyStochastic, EdgeSet, Permutation, SeedSet, UnipartiteGraph};
pub use models::{BipartiteData, ModelFamily, MrfParams};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
