use crate::model::ParamStore;

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Per-coordinate sums of squared gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaGradState {
    accumulators: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl AdaGradState {
    pub fn new(params: &ParamStore) -> Self {
        AdaGradState {
            accumulators: params.zero_grads(),
            epsilon: ADAGRAD_EPSILON,
        }
    }

    pub fn accumulator(&self, slot: usize) -> &[f64] {
        &self.accumulators[slot]
    }
}

/// `acc += g^2; p -= mu * g / (sqrt(acc) + eps)` for every trainable slot,
/// then zeroes `grads`.
pub fn adagrad_step(params: &mut ParamStore, grads: &mut [Vec<f64>], state: &mut AdaGradState, mu: f64) {
    let eps = state.epsilon;
    for (slot, grad) in grads.iter_mut().enumerate() {
        if params.get(slot).trainable {
            let acc = &mut state.accumulators[slot];
            let values = params.value_mut(slot).data_mut();
            for ((p, a), &g) in values.iter_mut().zip(acc.iter_mut()).zip(grad.iter()) {
                *a += g * g;
                *p -= mu * g / (a.sqrt() + eps);
            }
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
