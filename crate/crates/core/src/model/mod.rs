//! The shared LSTM encoder, attribute attention, discriminators and emotion
//! heads, wired per [`ModelVariant`].

mod checkpoint;
mod network;
mod params;
mod variant;


pub use checkpoint::{Checkpoint, Manifest, ParamMeta, CHECKPOINT_MAGIC};
pub use network::{
    AttentionNodes, AttentionOutput, Attribute, Bound, ForwardOutput, NpdModel, Prediction,
};
pub use params::{ParamStore, Parameter, Partition};
pub use variant::{DiscriminatorWiring, ModelVariant, Representation};

use serde::{Deserialize, Serialize};

use crate::corpus::NUM_EMOTIONS;
use crate::error::{NpdError, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// Width of each emotion head's hidden layer.
    pub head_dim: usize,
    pub num_locations: usize,
    pub fine_tune_embeddings: bool,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, embed_dim: usize, num_locations: usize) -> Self {
        ModelConfig {
            variant,
            embed_dim,
            hidden_dim: 128,
            attention_dim: 128,
            head_dim: 64,
            num_locations,
            fine_tune_embeddings: false,
        }
    }

    pub fn with_hidden(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self.attention_dim = hidden_dim;
        self
    }

    pub fn with_head_dim(mut self, head_dim: usize) -> Self {
        self.head_dim = head_dim;
        self
    }

    pub fn num_emotions(&self) -> usize {
        NUM_EMOTIONS
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.attention_dim == 0 || self.head_dim == 0 {
            return Err(NpdError::Config("model dimensions must be >= 1".into()));
        }
        if self.num_locations < 2 {
            return Err(NpdError::Config(format!(
                "need at least 2 location classes, got {}",
                self.num_locations
            )));
        }
        Ok(())
    }
}
