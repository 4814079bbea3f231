//! Severity classification of per-frame video embeddings.
//!
//! The pipeline reduces a `T × D` sequence of frame embeddings to a short
//! sequence ([`reduce`]), classifies it with two stacked LSTMs and a softmax
//! head ([`nn`]), evaluates under stratified k-fold cross-validation
//! ([`train`]) and explains predictions with standard and integrated
//! gradients ([`attribution`]).

pub mod attribution;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod nn;
pub mod reduce;
pub mod train;

pub use error::{Error, Result};
