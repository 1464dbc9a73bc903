use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{NpdError, Result};

/// The four parameter groups updated by the joint saddle-point step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    /// Shared feature extractor: LSTM, attention, embeddings when fine-tuned.
    Encoder,
    /// Emotion heads.
    Emotion,
    /// Gender discriminator.
    Gender,
    /// Location discriminator.
    Location,
}

impl Partition {
    pub fn symbol(self) -> &'static str {
        match self {
            Partition::Encoder => "theta_f",
            Partition::Emotion => "theta_y",
            Partition::Gender => "theta_g",
            Partition::Location => "theta_l",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub partition: Partition,
    pub trainable: bool,
}

/// Ordered, named parameter slots. Slot indices are what graphs bind to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor, partition: Partition, trainable: bool) -> usize {
        self.params.push(Parameter {
            name: name.into(),
            value,
            partition,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, slot: usize) -> &Parameter {
        &self.params[slot]
    }

    pub fn value(&self, slot: usize) -> &Tensor {
        &self.params[slot].value
    }

    pub fn value_mut(&mut self, slot: usize) -> &mut Tensor {
        &mut self.params[slot].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn slots_in(&self, partition: Partition) -> Vec<usize> {
        (0..self.params.len())
            .filter(|&i| self.params[i].partition == partition)
            .collect()
    }

    /// Zero-filled gradient buffers, one per slot.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.value.len()]).collect()
    }

    /// Replaces every value from `other`, which must have identical names and shapes.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(NpdError::Format(format!(
                "expected {} parameters, found {}",
                self.len(),
                other.len()
            )));
        }
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() {
                return Err(NpdError::Format(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    mine.name,
                    mine.value.shape(),
                    theirs.name,
                    theirs.value.shape()
                )));
            }
            mine.value = theirs.value.clone();
        }
        Ok(())
    }

    pub fn squared_norm(&self, partition: Partition) -> f64 {
        self.params
            .iter()
            .filter(|p| p.partition == partition)
            .map(|p| p.value.sum_squares())
            .sum()
    }
}
