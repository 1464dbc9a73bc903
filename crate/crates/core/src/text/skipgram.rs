use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use crate::autodiff::Tensor;
use crate::error::{NpdError, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly towards zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            embed_dim: 100,
            window: 5,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.window == 0 || self.negatives_per_positive == 0 {
            return Err(NpdError::Config(
                "skip-gram embed_dim, window and negatives_per_positive must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NpdError::Config("skip-gram learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

const UNIGRAM_POWER: f64 = 0.75;
const MIN_RATE_FRACTION: f64 = 1e-4;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Input vectors ~ U(-0.5/d, 0.5/d), drawn from the seed's `skipgram-init` stream.
fn initial_vectors(vocab_size: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "skipgram-init");
    let half = 0.5 / dim as f64;
    (0..vocab_size * dim)
        .map(|_| r.random_range(-half..half))
        .collect()
}

/// Cumulative unigram^0.75 distribution over ids.
fn noise_cdf(corpus: &[Vec<usize>], vocab_size: usize) -> Vec<f64> {
    let mut counts = vec![0usize; vocab_size];
    for &id in corpus.iter().flatten() {
        counts[id] += 1;
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = counts
        .iter()
        .map(|&c| {
            acc += (c as f64).powf(UNIGRAM_POWER);
            acc
        })
        .collect();
    for v in &mut cdf {
        *v /= acc;
    }
    cdf
}

fn sample(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Skip-gram with negative sampling over id sequences.
///
/// Returns the input (centre-word) vectors. Training is sequential and fully
/// determined by `cfg.seed`.
pub fn train_skipgram(
    corpus: &[Vec<usize>],
    vocab_size: usize,
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable> {
    cfg.validate()?;
    let total_tokens: usize = corpus.iter().map(Vec::len).sum();
    if total_tokens == 0 {
        return Err(NpdError::Config("skip-gram corpus is empty".into()));
    }
    if let Some(&bad) = corpus.iter().flatten().find(|&&id| id >= vocab_size) {
        return Err(NpdError::Contract(format!(
            "token id {bad} out of range for vocabulary of {vocab_size}"
        )));
    }
    let dim = cfg.embed_dim;
    let mut input = initial_vectors(vocab_size, dim, cfg.seed);
    let mut output = vec![0.0; vocab_size * dim];
    let cdf = noise_cdf(corpus, vocab_size);
    let mut r = rng::stream(cfg.seed, "skipgram-train");
    let schedule = (cfg.epochs * total_tokens).max(1) as f64;
    let mut seen = 0usize;
    let mut update = vec![0.0; dim];

    for _ in 0..cfg.epochs {
        for sentence in corpus {
            for (pos, &center) in sentence.iter().enumerate() {
                let rate = cfg.learning_rate * (1.0 - seen as f64 / schedule).max(MIN_RATE_FRACTION);
                seen += 1;
                let reach = r.random_range(1..=cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sentence[ctx_pos];
                    update.iter_mut().for_each(|u| *u = 0.0);
                    let v = &input[center * dim..(center + 1) * dim];
                    for k in 0..=cfg.negatives_per_positive {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = sample(&cdf, r.random::<f64>());
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut output[target * dim..(target + 1) * dim];
                        let score: f64 = v.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                        let step = (label - sigmoid(score)) * rate;
                        for ((u, o), a) in update.iter_mut().zip(out.iter_mut()).zip(v) {
                            *u += step * *o;
                            *o += step * a;
                        }
                    }
                    for (w, u) in input[center * dim..(center + 1) * dim].iter_mut().zip(&update) {
                        *w += u;
                    }
                }
            }
        }
    }
    EmbeddingTable::new(Tensor::matrix(vocab_size, dim, input)?)
}
