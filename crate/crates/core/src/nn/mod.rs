//! Stacked-LSTM classifier with exact backpropagation and Adam.

pub mod adam;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod lstm;
pub mod model;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{argmax, cross_entropy, softmax, DenseParams};
pub use dropout::{dropout, Phase};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{lstm_backward, lstm_forward, Gate, LstmCache, LstmLayerParams};
pub use model::{Forward, ForwardCache, Gradients, ModelParams, ModelShape, TENSOR_NAMES};
