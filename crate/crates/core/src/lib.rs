//! Emotion detection with adversarial personal-attribute discriminators.
//!
//! A shared LSTM encoder reads a post; gender and location attention pools the
//! hidden states; discriminators behind gradient-reversal nodes shape the
//! encoder; five binary heads predict happiness, sadness, anger, surprise and
//! fear. Everything, including reverse-mode differentiation, is implemented
//! here on dense `f64` arrays.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod text;
pub mod training;

pub use error::{NpdError, Result};
