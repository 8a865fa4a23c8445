//! Label-free accuracy estimation from classifier logits.
//!
//! The crate centers on the MaNo score ([`mano`]): logits are normalized with
//! a dataset-level choice between a truncated exponential and the softmax,
//! then aggregated with a scaled entry-wise `L_p` norm. Around it sit the
//! logit-based baselines ([`baselines`]), the metrics used to compare
//! estimators ([`evaluation`]), file formats ([`data_io`]) and a seeded
//! synthetic shift benchmark ([`simulator`]).

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data_io;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod mano;
pub mod numerics;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{score_dataset, Estimator, ScoreReport, ScoreSign, ScoringContext};
pub use evaluation::EvalRecord;
pub use mano::{mano_score, Branch, ManoResult, SoftrunConfig};
pub use numerics::{LogitsMatrix, ProbMatrix, ProbVector};
