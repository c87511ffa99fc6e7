//! Copula Gaussian graphical models.
//!
//! A copula Gaussian graphical model places a Gaussian graphical model on
//! latent normal variables that are tied to the observed binary, ordinal or
//! continuous variables only through their ranks (the extended rank
//! likelihood). This crate samples the joint posterior over graphs,
//! precision matrices and latent data with a reversible-jump MCMC, and turns
//! the draws into model-averaged summaries: edge inclusion probabilities,
//! latent correlations, expected cell counts, Cramér's V associations and
//! interval-null Bayes factors.
//!
//! Vertices are 0-based everywhere in the library. File formats and the CLI
//! use 1-based vertex labels; the conversion happens only in [`io`].
//!
//! Module map:
//!
//! - [`graph`]: undirected graphs stored as edge bitsets.
//! - [`cholesky`]: the Cholesky parameterization of the cone of precision
//!   matrices with a given zero pattern (free elements, completion, Jacobian).
//! - [`gwishart`]: G-Wishart densities and Monte Carlo normalizing constants.
//! - [`latent`] and [`truncnorm`]: the latent layer and its Gibbs update.
//! - [`sampler`]: the three-step chain, the multi-chain runner and the
//!   fixed full-graph baseline.
//! - [`mvn`]: normal CDFs, rectangle probabilities and the Gaussian copula.
//! - [`estimators`]: posterior summaries computed from the sample stream.
//! - [`io`] and [`cli`]: data ingestion, output files and the command line.

// `!(x > 0.0)` is written on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cholesky;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod gwishart;
pub mod io;
pub mod latent;
pub mod mvn;
pub mod rng;
pub mod sampler;
pub mod truncnorm;

pub use error::{Error, Result};
pub use graph::UndirectedGraph;
