//! Joint adversarial training: losses, AdaGrad, batching and the epoch loop.

mod adagrad;
mod loss;
mod trainer;

pub use adagrad::{adagrad_step, AdaGradState, ADAGRAD_EPSILON};
pub use loss::{
    emotion_loss, gender_loss, location_loss, total_loss, EmotionProbs, ATTRIBUTE_EPS,
    EMOTION_FLOOR,
};
pub use trainer::{
    add_l2_gradient, batch_gradients, train, BatchGradients, BatchStats, EpochRecord, Trained,
    TrainingLog,
};

use serde::{Deserialize, Serialize};

use crate::error::{NpdError, Result};
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// AdaGrad learning rate.
    pub mu: f64,
    /// Weights of the emotion, gender and location losses.
    pub lambdas: [f64; 3],
    /// L2 strength on the emotion heads.
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Scale applied by the gradient reversal nodes.
    pub reversal: f64,
    /// How examples within a batch are spread over threads.
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            mu: 1e-4,
            lambdas: [1.0, 1.0, 1.0],
            l2_lambda: 1e-4,
            batch_size: 32,
            dropout_rate: 0.2,
            max_epochs: 50,
            patience: 5,
            seed: 1,
            clip_norm: Some(5.0),
            reversal: 1.0,
            execution: Execution::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NpdError::Config(msg));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.mu));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad(format!("loss weights must be >= 0, got {:?}", self.lambdas));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2 strength must be >= 0, got {}", self.l2_lambda));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("clip norm must be > 0, got {c}"));
            }
        }
        if !(self.reversal >= 0.0 && self.reversal.is_finite()) {
            return bad(format!("reversal scale must be >= 0, got {}", self.reversal));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainingConfig::default();
        assert_eq!(c.mu, 1e-4);
        assert_eq!(c.lambdas, [1.0; 3]);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.dropout_rate, 0.2);
        c.validate().unwrap();
        for broken in [
            TrainingConfig { mu: 0.0, ..c.clone() },
            TrainingConfig { lambdas: [1.0, -1.0, 1.0], ..c.clone() },
            TrainingConfig { batch_size: 0, ..c.clone() },
            TrainingConfig { dropout_rate: 1.0, ..c.clone() },
            TrainingConfig { clip_norm: Some(0.0), ..c.clone() },
        ] {
            assert!(matches!(broken.validate(), Err(NpdError::Config(_))));
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: TrainingConfig = serde_json::from_str(r#"{"mu": 0.05, "max_epochs": 3}"#).unwrap();
        assert_eq!(c.mu, 0.05);
        assert_eq!(c.max_epochs, 3);
        assert_eq!(c.patience, 5);
    }
}
