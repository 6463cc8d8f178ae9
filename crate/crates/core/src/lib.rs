//! Uncertainty measures for autoregressive sequence models.
//!
//! The crate scores generated sequences with measures derived from two
//! proper scoring rules:
//!
//! - the zero-one score, approximated by the negative log-likelihood of the
//!   greedily decoded sequence ([`estimators::g_nll`]);
//! - the logarithmic score, which gives the sampling-based entropy family:
//!   predictive entropy, semantic entropy, their length-normalized variants
//!   and discrete semantic entropy.
//!
//! Everything is built on the [`seqmodel::TokenDistributionSource`] trait.
//! Synthetic Dirichlet models ([`synthdist`]) implement it with exact
//! enumeration oracles, so estimator quality can be measured against ground
//! truth. Real model outputs enter through JSONL traces ([`traceio`]).
//!
//! Runnable walkthroughs live in `examples/`; the `seqscore` binary exposes
//! the experiment runner.

pub mod cli;
pub mod decode;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod semcluster;
pub mod seqmodel;
pub mod synthdist;
pub mod traceio;

pub use error::{Error, Result};
pub use seqmodel::{ScoredSequence, TokenDistribution, TokenDistributionSource, TokenId, Vocab};
