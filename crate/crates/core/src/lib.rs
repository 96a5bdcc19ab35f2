//! Noise-robust voice conversion built from a BLSTM speech enhancer and an
//! autoencoder conversion model, trained under adversarial objectives, with
//! the DSP front-end, corpus synthesis, staged training schedule, and
//! mel-cepstral-distortion evaluation needed to compare the system variants.

pub mod autograd;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod signal;
pub mod trainer;

pub use error::{Error, Result};
