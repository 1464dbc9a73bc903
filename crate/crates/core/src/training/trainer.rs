use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::adagrad::{adagrad_step, AdaGradState};
use super::loss::{ATTRIBUTE_EPS, EMOTION_FLOOR};
use super::TrainingConfig;
use crate::autodiff::{Graph, NodeId, ReversalCoefficient};
use crate::corpus::TokenizedPost;
use crate::error::{NpdError, Result};
use crate::evaluation::evaluate;
use crate::model::{NpdModel, ParamStore, Partition};
use crate::rng;

/// Batch-mean loss components. `j_y` includes the L2 term.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchStats {
    pub j_y: f64,
    pub j_gend: Option<f64>,
    pub j_loc: Option<f64>,
    pub clamp_events: usize,
}

/// Gradients of the joint objective, one buffer per parameter slot.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradients {
    pub grads: Vec<Vec<f64>>,
    pub stats: BatchStats,
    /// Global norm before clipping.
    pub norm: f64,
}

struct ExampleResult {
    grads: Vec<(usize, Vec<f64>)>,
    /// Embedding-table gradient restricted to the rows the post touches.
    embedding_rows: Vec<(usize, Vec<f64>)>,
    nll_y: f64,
    nll_g: Option<f64>,
    nll_l: Option<f64>,
    clamps: usize,
}

fn diverged(g: &Graph, model: &NpdModel, detail: &str) -> String {
    match g.first_non_finite() {
        Some((id, tag)) => format!("{detail}; first non-finite tensor is node {} ({tag:?})", id.index()),
        None => format!("{detail} ({} parameters)", model.params().len()),
    }
}

fn example_gradients(
    model: &NpdModel,
    post: &TokenizedPost,
    cfg: &TrainingConfig,
    reversal: ReversalCoefficient,
    batch_len: usize,
    rng_key: (&str, u64),
) -> Result<ExampleResult> {
    let mut g = Graph::new();
    let b = model.bind(&mut g);
    let mut r = rng::indexed_stream(cfg.seed, rng_key.0, rng_key.1);
    let out = model.forward(&mut g, &b, &post.ids, true, cfg.dropout_rate, reversal, &mut r)?;

    let mut nll_y: Option<NodeId> = None;
    for (j, &p) in out.emotion_probs.iter().enumerate() {
        let term = g.nll_pick(p, post.emotions[j] as usize, EMOTION_FLOOR)?;
        nll_y = Some(match nll_y {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    let nll_y = nll_y.expect("five emotion heads");
    let [l1, l2, l3] = cfg.lambdas;
    let scale = 1.0 / batch_len as f64;
    let mut objective = g.scale(nll_y, l1 * scale);
    let nll_g = match out.gender_prob {
        Some(p) => {
            let t = g.binary_nll(p, post.gender as f64, ATTRIBUTE_EPS)?;
            let weighted = g.scale(t, l2 * scale);
            objective = g.add(objective, weighted)?;
            Some(t)
        }
        None => None,
    };
    let nll_l = match out.location_probs {
        Some(p) => {
            let t = g.nll_pick(p, post.location, ATTRIBUTE_EPS)?;
            let weighted = g.scale(t, l3 * scale);
            objective = g.add(objective, weighted)?;
            Some(t)
        }
        None => None,
    };
    if !g.value(objective).is_finite() {
        return Err(NpdError::Divergence {
            epoch: 0,
            batch: 0,
            detail: diverged(&g, model, "non-finite loss"),
        });
    }
    g.backward(objective)?;
    let table_slot = model.params().slot("embeddings");
    let dim = model.config().embed_dim;
    let mut grads = Vec::new();
    let mut embedding_rows = Vec::new();
    for (slot, d) in g.param_grads() {
        if Some(slot) == table_slot {
            let mut ids = post.ids.clone();
            ids.sort_unstable();
            ids.dedup();
            embedding_rows = ids.into_iter().map(|r| (r, d[r * dim..(r + 1) * dim].to_vec())).collect();
        } else {
            grads.push((slot, d.to_vec()));
        }
    }
    Ok(ExampleResult {
        grads,
        embedding_rows,
        nll_y: g.value(nll_y).item(),
        nll_g: nll_g.map(|n| g.value(n).item()),
        nll_l: nll_l.map(|n| g.value(n).item()),
        clamps: g.clamp_events(),
    })
}

/// Adds the gradient of `coeff / 2 * ||theta_y||^2` into `grads`.
pub fn add_l2_gradient(params: &ParamStore, grads: &mut [Vec<f64>], coeff: f64) {
    if coeff == 0.0 {
        return;
    }
    for slot in params.slots_in(Partition::Emotion) {
        for (g, &p) in grads[slot].iter_mut().zip(params.value(slot).data()) {
            *g += coeff * p;
        }
    }
}

/// Gradient of the joint objective over one batch.
///
/// Each example gets its own graph; per-example gradients are summed in
/// batch order, so the result does not depend on the execution mode.
/// `key` names the dropout stream (`epoch`, `batch`).
pub fn batch_gradients(
    model: &NpdModel,
    batch: &[&TokenizedPost],
    cfg: &TrainingConfig,
    key: (usize, usize),
) -> Result<BatchGradients> {
    if batch.is_empty() {
        return Err(NpdError::Contract("empty batch".into()));
    }
    let reversal = ReversalCoefficient::new(cfg.reversal)?;
    let stream = format!("dropout/{}/{}", key.0, key.1);
    let results = cfg.execution.map(batch, |i, post| {
        example_gradients(model, post, cfg, reversal, batch.len(), (&stream, i as u64))
    });

    let params = model.params();
    let table_slot = params.slot("embeddings");
    let mut grads = params.zero_grads();
    let n = batch.len() as f64;
    let mut stats = BatchStats::default();
    let (mut sum_y, mut sum_g, mut sum_l) = (0.0, None::<f64>, None::<f64>);
    for res in results {
        let res = res.map_err(|e| match e {
            NpdError::Divergence { detail, .. } => NpdError::Divergence {
                epoch: key.0,
                batch: key.1,
                detail,
            },
            other => other,
        })?;
        for (slot, d) in res.grads {
            for (acc, v) in grads[slot].iter_mut().zip(d) {
                *acc += v;
            }
        }
        if let Some(t) = table_slot {
            let dim = model.config().embed_dim;
            for (r, d) in res.embedding_rows {
                for (acc, v) in grads[t][r * dim..(r + 1) * dim].iter_mut().zip(d) {
                    *acc += v;
                }
            }
        }
        sum_y += res.nll_y;
        if let Some(v) = res.nll_g {
            *sum_g.get_or_insert(0.0) += v;
        }
        if let Some(v) = res.nll_l {
            *sum_l.get_or_insert(0.0) += v;
        }
        stats.clamp_events += res.clamps;
    }
    let l2 = cfg.l2_lambda;
    stats.j_y = sum_y / n + 0.5 * l2 * params.squared_norm(Partition::Emotion);
    stats.j_gend = sum_g.map(|s| s / n);
    stats.j_loc = sum_l.map(|s| s / n);
    add_l2_gradient(params, &mut grads, cfg.lambdas[0] * l2);

    let mut sq = 0.0;
    for (slot, gr) in grads.iter().enumerate() {
        if !params.get(slot).trainable {
            continue;
        }
        for &v in gr {
            sq += v * v;
        }
        if gr.iter().any(|v| !v.is_finite()) {
            return Err(NpdError::Divergence {
                epoch: key.0,
                batch: key.1,
                detail: format!("non-finite gradient for parameter `{}`", params.get(slot).name),
            });
        }
    }
    let norm = sq.sqrt();
    if let Some(cap) = cfg.clip_norm {
        if norm > cap {
            let s = cap / norm;
            grads.iter_mut().flatten().for_each(|v| *v *= s);
        }
    }
    Ok(BatchGradients { grads, stats, norm })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub j_y: f64,
    pub j_gend: Option<f64>,
    pub j_loc: Option<f64>,
    pub dev_average_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub clamp_events: usize,
}

impl TrainingLog {
    /// One tab-separated line per epoch after a header; absent losses print as `-`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tj_y\tj_gend\tj_loc\tdev_avg_f1\n");
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{}\t{}\t{:.6}",
                e.epoch,
                e.j_y,
                opt(e.j_gend),
                opt(e.j_loc),
                e.dev_average_f1
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| NpdError::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    /// Parameters from the epoch with the best dev average F1.
    pub model: NpdModel,
    pub log: TrainingLog,
}

/// Shuffled minibatch AdaGrad with early stopping on dev average F1.
pub fn train(
    mut model: NpdModel,
    train_set: &[TokenizedPost],
    dev: &[TokenizedPost],
    cfg: &TrainingConfig,
) -> Result<Trained> {
    cfg.validate()?;
    let mut log = TrainingLog::default();
    if cfg.max_epochs == 0 {
        return Ok(Trained { model, log });
    }
    if train_set.is_empty() || dev.is_empty() {
        return Err(NpdError::Contract(format!(
            "training needs non-empty train and dev sets (got {} and {})",
            train_set.len(),
            dev.len()
        )));
    }
    let mut state = AdaGradState::new(model.params());
    let mut shuffle = rng::stream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle);
        let (mut jy, mut jg, mut jl) = (0.0, None::<f64>, None::<f64>);
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&TokenizedPost> = chunk.iter().map(|&i| &train_set[i]).collect();
            let mut bg = batch_gradients(&model, &batch, cfg, (epoch, bi))?;
            adagrad_step(model.params_mut(), &mut bg.grads, &mut state, cfg.mu);
            jy += bg.stats.j_y;
            if let Some(v) = bg.stats.j_gend {
                *jg.get_or_insert(0.0) += v;
            }
            if let Some(v) = bg.stats.j_loc {
                *jl.get_or_insert(0.0) += v;
            }
            log.clamp_events += bg.stats.clamp_events;
            batches += 1;
        }
        let nb = batches as f64;
        let dev_f1 = evaluate(&model, dev, cfg.execution)?.average_f1;
        let record = EpochRecord {
            epoch,
            j_y: jy / nb,
            j_gend: jg.map(|v| v / nb),
            j_loc: jl.map(|v| v / nb),
            dev_average_f1: dev_f1,
        };
        log::info!(
            "{} epoch {epoch}: j_y {:.4} dev avg F1 {dev_f1:.4}",
            model.variant(),
            record.j_y
        );
        log.epochs.push(record);
        if best.as_ref().is_none_or(|(f, _)| dev_f1 > *f) {
            best = Some((dev_f1, model.params().clone()));
            log.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params_mut().load_values(&params)?;
    }
    Ok(Trained { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::model::{ModelConfig, ModelVariant};
    use crate::par::Execution;
    use crate::text::EmbeddingTable;
    use rand::Rng as _;

    const VOCAB: usize = 12;

    fn table() -> EmbeddingTable {
        let mut r = rng::stream(3, "table");
        let data = (0..VOCAB * 4).map(|_| r.random_range(-1.0..1.0)).collect();
        EmbeddingTable::new(Tensor::new(vec![VOCAB, 4], data).unwrap()).unwrap()
    }

    fn model(variant: ModelVariant) -> NpdModel {
        let cfg = ModelConfig::new(variant, 4, 3).with_hidden(6).with_head_dim(4);
        NpdModel::new(cfg, &table(), 9).unwrap()
    }

    /// Token 2 marks happiness, token 3 marks fear; gender follows token 4.
    fn data(n: usize, seed: u64) -> Vec<TokenizedPost> {
        let mut r = rng::stream(seed, "data");
        (0..n)
            .map(|_| {
                let happy = r.random_bool(0.5);
                let fear = r.random_bool(0.3);
                let male = r.random_bool(0.5);
                let mut ids: Vec<usize> = (0..5).map(|_| r.random_range(5..VOCAB)).collect();
                if happy {
                    ids.insert(r.random_range(0..ids.len()), 2);
                }
                if fear {
                    ids.insert(r.random_range(0..ids.len()), 3);
                }
                if male {
                    ids.push(4);
                }
                TokenizedPost {
                    ids,
                    emotions: [happy as u8, 0, 0, 0, fear as u8],
                    gender: male as u8,
                    location: r.random_range(0..3),
                }
            })
            .collect()
    }

    fn cfg() -> TrainingConfig {
        TrainingConfig {
            mu: 0.05,
            batch_size: 8,
            max_epochs: 6,
            patience: 10,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let m = model(ModelVariant::Npd);
        let out = train(m.clone(), &data(20, 1), &data(5, 2), &TrainingConfig { max_epochs: 0, ..cfg() }).unwrap();
        assert_eq!(out.model, m);
        assert!(out.log.epochs.is_empty());
        assert_eq!(out.log.to_tsv().lines().count(), 1);
    }

    #[test]
    fn zero_attribute_weights_leave_discriminators_without_gradient() {
        let m = model(ModelVariant::Npd);
        let posts = data(8, 1);
        let batch: Vec<&TokenizedPost> = posts.iter().collect();
        let c = TrainingConfig { lambdas: [1.0, 0.0, 0.0], ..cfg() };
        let bg = batch_gradients(&m, &batch, &c, (1, 0)).unwrap();
        for part in [Partition::Gender, Partition::Location] {
            for s in m.params().slots_in(part) {
                assert!(bg.grads[s].iter().all(|&g| g == 0.0), "{}", m.params().get(s).name);
            }
        }
        let full = batch_gradients(&m, &batch, &cfg(), (1, 0)).unwrap();
        let gs = m.params().slot("gender.w").unwrap();
        assert!(full.grads[gs].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn execution_mode_does_not_change_gradients() {
        let m = model(ModelVariant::Npd);
        let posts = data(16, 4);
        let batch: Vec<&TokenizedPost> = posts.iter().collect();
        let seq = TrainingConfig { execution: Execution::Sequential, ..cfg() };
        let par = TrainingConfig { execution: Execution::Parallel, ..cfg() };
        let a = batch_gradients(&m, &batch, &seq, (2, 3)).unwrap();
        let b = batch_gradients(&m, &batch, &par, (2, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let m = model(ModelVariant::Npd);
        let posts = data(8, 5);
        let batch: Vec<&TokenizedPost> = posts.iter().collect();
        let tight = TrainingConfig { clip_norm: Some(1e-3), ..cfg() };
        let bg = batch_gradients(&m, &batch, &tight, (1, 0)).unwrap();
        assert!(bg.norm > 1e-3);
        let norm: f64 = bg.grads.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (tr, dev) = (data(64, 6), data(16, 7));
        let a = train(model(ModelVariant::Npd), &tr, &dev, &cfg()).unwrap();
        let b = train(
            model(ModelVariant::Npd),
            &tr,
            &dev,
            &TrainingConfig { execution: Execution::Sequential, ..cfg() },
        )
        .unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
        let first = a.log.epochs.first().unwrap().j_y;
        let last = a.log.epochs.last().unwrap().j_y;
        assert!(last < first, "{first} -> {last}");
        assert!(a.log.epochs[0].j_gend.is_some());
        let tsv = a.log.to_tsv();
        assert_eq!(tsv.lines().count(), a.log.epochs.len() + 1);
        assert_eq!(tsv.lines().nth(1).unwrap().split('\t').count(), 5);
    }

    #[test]
    fn nan_parameters_abort_with_a_diagnostic() {
        let mut m = model(ModelVariant::Lstm);
        let s = m.params().slot("lstm.w_rec").unwrap();
        m.params_mut().value_mut(s).data_mut()[0] = f64::NAN;
        match train(m, &data(16, 1), &data(4, 2), &cfg()).map(|t| t.log) {
            Err(NpdError::Divergence { epoch, detail, .. }) => {
                assert_eq!(epoch, 1);
                assert!(detail.contains("first non-finite tensor"), "{detail}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn l2_alone_shrinks_emotion_heads() {
        let mut m = model(ModelVariant::Lstm);
        let mut state = AdaGradState::new(m.params());
        let mut prev = m.params().squared_norm(Partition::Emotion);
        let encoder = m.params().squared_norm(Partition::Encoder);
        for _ in 0..20 {
            let mut grads = m.params().zero_grads();
            add_l2_gradient(m.params(), &mut grads, 0.5);
            adagrad_step(m.params_mut(), &mut grads, &mut state, 1e-3);
            let now = m.params().squared_norm(Partition::Emotion);
            assert!(now < prev);
            prev = now;
        }
        assert_eq!(m.params().squared_norm(Partition::Encoder), encoder);
    }

    #[test]
    fn empty_splits_are_rejected() {
        let err = train(model(ModelVariant::Lstm), &[], &data(4, 2), &cfg()).unwrap_err();
        assert!(matches!(err, NpdError::Contract(_)));
    }
}
