//! Claim verification through Cloze questions.
//!
//! Claims are tagged for named entities, each entity is masked in turn to
//! form a fill-in-the-blank question, a masked-token predictor answers every
//! question, and the fraction of correct answers decides whether the claim is
//! labelled `SUPPORTS` or sent to `MANUAL_REVIEW`.
//!
//! Every stage reads and writes line-delimited JSON stage files (see
//! [`dataset`]) so stages can be run, resumed and tested independently.

pub mod answerer;
pub mod classify;
pub mod cli;
pub mod clozegen;
pub mod dataset;
mod error;
mod http;
pub mod percent;
pub mod tagger;
pub mod tokenizer;

pub use error::{Error, ErrorKind};
pub use http::RetryPolicy;
