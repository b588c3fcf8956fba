//! Neural utterance classifiers for clinical speech transcripts, with
//! interpretation tooling: activation clustering with automatic POS-pattern
//! discovery, first-derivative saliency maps, and a gender-split bootstrap
//! protocol.
//!
//! The crate is organized around the pipeline:
//! corpus (CHAT-lite parsing / synthesis) -> autodiff (tape-based gradients)
//! -> models (CNN, LSTM, CNN-LSTM) -> training (Adam + clipping) ->
//! interpret (clustering, saliency) / stats (gender bootstrap).

pub mod autodiff;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod interpret;
pub mod models;
pub mod seeds;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
