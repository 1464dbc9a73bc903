#![allow(dead_code)]

use npd_core::autodiff::Tensor;
use npd_core::corpus::{TokenizedPost, NUM_EMOTIONS};
use npd_core::model::{DiscriminatorWiring, ModelConfig, ModelVariant, NpdModel, Partition};
use npd_core::rng;
use npd_core::text::EmbeddingTable;
use npd_core::training::{
    batch_gradients, emotion_loss, gender_loss, location_loss, total_loss, EmotionProbs, TrainingConfig,
};
use rand::Rng as _;

pub fn random_table(vocab: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng::stream(seed, "test-table");
    let data = (0..vocab * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    EmbeddingTable::new(Tensor::new(vec![vocab, dim], data).unwrap()).unwrap()
}

pub fn random_posts(n: usize, len: usize, vocab: usize, m: usize, seed: u64) -> Vec<TokenizedPost> {
    let mut r = rng::stream(seed, "test-posts");
    (0..n)
        .map(|_| TokenizedPost {
            ids: (0..len).map(|_| r.random_range(0..vocab)).collect(),
            emotions: std::array::from_fn(|_| r.random_range(0..2)),
            gender: r.random_range(0..2),
            location: r.random_range(0..m),
        })
        .collect()
}

/// Spreads parameters beyond the small default init so every path carries
/// a non-trivial gradient.
pub fn perturb(model: &mut NpdModel, scale: f64, seed: u64) {
    let mut r = rng::stream(seed, "test-perturb");
    for slot in 0..model.params().len() {
        for v in model.params_mut().value_mut(slot).data_mut() {
            *v += r.random_range(-scale..scale);
        }
    }
}

/// Loss components computed from eval-mode predictions and the value-level
/// loss functions, independent of the gradient graph.
pub fn objective_parts(model: &NpdModel, posts: &[TokenizedPost], l2: f64) -> (f64, f64, f64) {
    let mut probs: Vec<EmotionProbs> = Vec::new();
    let mut p_male = Vec::new();
    let mut locs = Vec::new();
    for p in posts {
        let pred = model.predict(&p.ids).unwrap();
        probs.push(std::array::from_fn(|j| [1.0 - pred.emotion_present[j], pred.emotion_present[j]]));
        if let Some(g) = pred.gender_male {
            p_male.push(g);
        }
        if let Some(l) = pred.location {
            locs.push(l);
        }
    }
    let gold: Vec<[u8; NUM_EMOTIONS]> = posts.iter().map(|p| p.emotions).collect();
    let genders: Vec<u8> = posts.iter().map(|p| p.gender).collect();
    let places: Vec<usize> = posts.iter().map(|p| p.location).collect();
    let jy = emotion_loss(&probs, &gold, model.params().squared_norm(Partition::Emotion), l2).unwrap();
    let jg = if p_male.is_empty() { 0.0 } else { gender_loss(&p_male, &genders).unwrap() };
    let jl = if locs.is_empty() { 0.0 } else { location_loss(&locs, &places).unwrap() };
    (jy, jg, jl)
}

pub struct GradCheck {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_name: String,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares analytic batch gradients with central differences of the
/// objective each partition descends: the plain weighted sum for the heads
/// and discriminators, and for the encoder the same sum with reversed attribute terms negated.
pub fn gradient_check(model: &NpdModel, posts: &[TokenizedPost], cfg: &TrainingConfig, step: f64, floor: f64) -> GradCheck {
    let batch: Vec<&TokenizedPost> = posts.iter().collect();
    let analytic = batch_gradients(model, &batch, cfg, (0, 0)).unwrap().grads;
    let [l1, l2, l3] = cfg.lambdas;
    let sign = |w: Option<DiscriminatorWiring>| if w.is_some_and(|w| w.reversed) { -1.0 } else { 1.0 };
    let sg = sign(model.variant().gender_discriminator());
    let sl = sign(model.variant().location_discriminator());
    let objective = |m: &NpdModel, part: Partition| {
        let (jy, jg, jl) = objective_parts(m, posts, cfg.l2_lambda);
        match part {
            Partition::Encoder => l1 * jy + sg * l2 * jg + sl * l3 * jl,
            _ => total_loss(jy, jg, jl, cfg.lambdas),
        }
    };
    let mut out = GradCheck {
        checked: 0,
        worst_rel: 0.0,
        worst_name: String::new(),
    };
    let mut probe = model.clone();
    for slot in 0..model.params().len() {
        let p = model.params().get(slot);
        if !p.trainable {
            continue;
        }
        for i in 0..p.value.len() {
            let orig = p.value.data()[i];
            probe.params_mut().value_mut(slot).data_mut()[i] = orig + step;
            let up = objective(&probe, p.partition);
            probe.params_mut().value_mut(slot).data_mut()[i] = orig - step;
            let down = objective(&probe, p.partition);
            probe.params_mut().value_mut(slot).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let rel = rel_err(analytic[slot][i], numeric, floor);
            out.checked += 1;
            if rel > out.worst_rel {
                out.worst_rel = rel;
                out.worst_name = format!("{}[{i}] analytic {:.3e} numeric {:.3e}", p.name, analytic[slot][i], numeric);
            }
        }
    }
    out
}

pub fn gradcheck_model(seed: u64, vocab: usize) -> NpdModel {
    gradcheck_variant(ModelVariant::Npd, seed, vocab)
}

pub fn gradcheck_variant(variant: ModelVariant, seed: u64, vocab: usize) -> NpdModel {
    let cfg = ModelConfig {
        fine_tune_embeddings: true,
        ..ModelConfig::new(variant, 8, 5).with_hidden(16).with_head_dim(8)
    };
    let mut m = NpdModel::new(cfg, &random_table(vocab, 8, seed), seed).unwrap();
    perturb(&mut m, 0.3, seed);
    m
}

pub fn gradcheck_config() -> TrainingConfig {
    TrainingConfig {
        dropout_rate: 0.0,
        clip_norm: None,
        l2_lambda: 0.01,
        lambdas: [1.0, 0.7, 0.4],
        ..TrainingConfig::default()
    }
}
