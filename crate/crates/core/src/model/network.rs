use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::params::{ParamStore, Partition};
use super::variant::{ModelVariant, Representation};
use super::ModelConfig;
use crate::autodiff::{Graph, NodeId, ReversalCoefficient, Tensor};
use crate::corpus::{Emotion, NUM_EMOTIONS};
use crate::error::{NpdError, Result};
use crate::rng::{self, Rng};
use crate::text::EmbeddingTable;

const INIT_RANGE: f64 = 0.08;
const STATE_INIT_STD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attribute {
    Gender,
    Location,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Location => "location",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct AttentionSlots {
    w: usize,
    b: usize,
    u: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeadSlots {
    w_hidden: usize,
    b_hidden: usize,
    w_out: usize,
    b_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Slots {
    embeddings: usize,
    w_in: usize,
    w_rec: usize,
    b_lstm: usize,
    h0: usize,
    c0: usize,
    attention_gender: AttentionSlots,
    attention_location: AttentionSlots,
    heads: Vec<HeadSlots>,
    gender_w: usize,
    gender_b: usize,
    location_w: usize,
    location_b: usize,
}

enum Init {
    Uniform,
    Zeros,
    Normal,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    partition: Partition,
    init: Init,
}

fn layout(cfg: &ModelConfig) -> Vec<Spec> {
    let (e, h, a, q, m) = (
        cfg.embed_dim,
        cfg.hidden_dim,
        cfg.attention_dim,
        cfg.head_dim,
        cfg.num_locations,
    );
    let d = cfg.variant.representation_dim(h);
    let spec = |name: String, shape: Vec<usize>, partition, init| Spec {
        name,
        shape,
        partition,
        init,
    };
    use Partition::*;
    let mut out = vec![
        spec("lstm.w_in".into(), vec![e, 4 * h], Encoder, Init::Uniform),
        spec("lstm.w_rec".into(), vec![h, 4 * h], Encoder, Init::Uniform),
        spec("lstm.bias".into(), vec![4 * h], Encoder, Init::Zeros),
        spec("lstm.h0".into(), vec![h], Encoder, Init::Normal),
        spec("lstm.c0".into(), vec![h], Encoder, Init::Normal),
    ];
    for attr in ["gender", "location"] {
        out.push(spec(format!("attention.{attr}.w"), vec![h, a], Encoder, Init::Uniform));
        out.push(spec(format!("attention.{attr}.b"), vec![a], Encoder, Init::Zeros));
        out.push(spec(format!("attention.{attr}.u"), vec![a], Encoder, Init::Uniform));
    }
    for emo in crate::corpus::Emotion::ALL {
        let n = emo.name();
        out.push(spec(format!("emotion.{n}.hidden.w"), vec![d, q], Emotion, Init::Uniform));
        out.push(spec(format!("emotion.{n}.hidden.b"), vec![q], Emotion, Init::Zeros));
        out.push(spec(format!("emotion.{n}.out.w"), vec![q, 2], Emotion, Init::Uniform));
        out.push(spec(format!("emotion.{n}.out.b"), vec![2], Emotion, Init::Zeros));
    }
    out.push(spec("gender.w".into(), vec![h], Gender, Init::Uniform));
    out.push(spec("gender.b".into(), vec![], Gender, Init::Zeros));
    out.push(spec("location.w".into(), vec![h, m], Location, Init::Uniform));
    out.push(spec("location.b".into(), vec![m], Location, Init::Zeros));
    out
}

/// Per-graph node handles for every parameter slot.
pub struct Bound {
    nodes: Vec<NodeId>,
}

impl Bound {
    pub fn node(&self, slot: usize) -> NodeId {
        self.nodes[slot]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AttentionNodes {
    pub attribute: Attribute,
    /// Softmax weights over the sequence, `[n]`.
    pub weights: NodeId,
    /// Weighted sum of hidden states, `[hidden_dim]`.
    pub pooled: NodeId,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Per emotion, `[p(absent), p(present)]`.
    pub emotion_probs: Vec<NodeId>,
    /// Scalar probability that the author is male.
    pub gender_prob: Option<NodeId>,
    /// Distribution over location classes.
    pub location_probs: Option<NodeId>,
    pub attention: Vec<AttentionNodes>,
    pub hidden: Vec<NodeId>,
    pub representation: NodeId,
}

/// Attention weights and pooled vector as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub attribute: Attribute,
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
}

impl AttentionOutput {
    /// Sequence length pooled over.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `p(present)` per emotion in column order.
    pub emotion_present: [f64; NUM_EMOTIONS],
    pub gender_male: Option<f64>,
    pub location: Option<Vec<f64>>,
    pub attention: Vec<AttentionOutput>,
}

impl Prediction {
    pub fn predicted(&self) -> [bool; NUM_EMOTIONS] {
        self.emotion_present.map(|p| p > 0.5)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpdModel {
    config: ModelConfig,
    params: ParamStore,
    slots: Slots,
}

impl NpdModel {
    /// Fresh parameters drawn from the seed's `init` stream.
    pub fn new(config: ModelConfig, embeddings: &EmbeddingTable, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.embed_dim() != config.embed_dim {
            return Err(NpdError::Config(format!(
                "embedding table has dim {} but model expects {}",
                embeddings.embed_dim(),
                config.embed_dim
            )));
        }
        let mut r = rng::stream(seed, "init");
        let normal = Normal::new(0.0, STATE_INIT_STD).expect("valid std");
        let mut params = ParamStore::new();
        params.push(
            "embeddings",
            embeddings.matrix().clone(),
            Partition::Encoder,
            config.fine_tune_embeddings,
        );
        for s in layout(&config) {
            let n: usize = s.shape.iter().product();
            let data: Vec<f64> = match s.init {
                Init::Zeros => vec![0.0; n],
                Init::Uniform => (0..n).map(|_| r.random_range(-INIT_RANGE..INIT_RANGE)).collect(),
                Init::Normal => (0..n).map(|_| normal.sample(&mut r)).collect(),
            };
            params.push(s.name, Tensor::new(s.shape, data)?, s.partition, true);
        }
        Self::from_params(config, params)
    }

    /// Wraps an existing parameter store, checking names and shapes against
    /// the layout the config implies.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if params.len() != expected.len() + 1 {
            return Err(NpdError::Config(format!(
                "variant {} expects {} parameters, found {}",
                config.variant,
                expected.len() + 1,
                params.len()
            )));
        }
        let emb = params.get(0);
        if emb.name != "embeddings" || emb.value.ndim() != 2 || emb.value.shape()[1] != config.embed_dim {
            return Err(NpdError::Config("first parameter must be the embedding table".into()));
        }
        for (i, s) in expected.iter().enumerate() {
            let p = params.get(i + 1);
            if p.name != s.name || p.value.shape() != s.shape.as_slice() {
                return Err(NpdError::Config(format!(
                    "variant {} expects `{}` {:?}, found `{}` {:?}",
                    config.variant,
                    s.name,
                    s.shape,
                    p.name,
                    p.value.shape()
                )));
            }
        }
        let fine_tune = config.fine_tune_embeddings;
        let mut store = ParamStore::new();
        for p in params.iter() {
            let trainable = if p.name == "embeddings" { fine_tune } else { p.trainable };
            store.push(p.name.clone(), p.value.clone(), p.partition, trainable);
        }
        let slot = |name: &str| store.slot(name).expect("layout checked");
        let attention = |attr: &str| AttentionSlots {
            w: slot(&format!("attention.{attr}.w")),
            b: slot(&format!("attention.{attr}.b")),
            u: slot(&format!("attention.{attr}.u")),
        };
        let heads = Emotion::ALL
            .iter()
            .map(|e| HeadSlots {
                w_hidden: slot(&format!("emotion.{}.hidden.w", e.name())),
                b_hidden: slot(&format!("emotion.{}.hidden.b", e.name())),
                w_out: slot(&format!("emotion.{}.out.w", e.name())),
                b_out: slot(&format!("emotion.{}.out.b", e.name())),
            })
            .collect();
        let slots = Slots {
            embeddings: 0,
            w_in: slot("lstm.w_in"),
            w_rec: slot("lstm.w_rec"),
            b_lstm: slot("lstm.bias"),
            h0: slot("lstm.h0"),
            c0: slot("lstm.c0"),
            attention_gender: attention("gender"),
            attention_location: attention("location"),
            heads,
            gender_w: slot("gender.w"),
            gender_b: slot("gender.b"),
            location_w: slot("location.w"),
            location_b: slot("location.b"),
        };
        Ok(NpdModel {
            config,
            params: store,
            slots,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> ModelVariant {
        self.config.variant
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.params.value(self.slots.embeddings).shape()[0]
    }

    /// Slots of the parameters belonging to emotion head `j`.
    pub fn head_slots(&self, j: usize) -> [usize; 4] {
        let h = self.slots.heads[j];
        [h.w_hidden, h.b_hidden, h.w_out, h.b_out]
    }

    pub fn bind(&self, g: &mut Graph) -> Bound {
        let nodes = self
            .params
            .iter()
            .enumerate()
            .map(|(slot, p)| {
                if p.trainable {
                    g.param(slot, &p.value)
                } else {
                    g.constant(p.value.clone())
                }
            })
            .collect();
        Bound { nodes }
    }

    /// Runs the LSTM over `ids`, returning `h_1..h_n`.
    pub fn encode(&self, g: &mut Graph, b: &Bound, ids: &[usize]) -> Result<Vec<NodeId>> {
        if ids.is_empty() {
            return Err(NpdError::Contract("cannot encode an empty token sequence".into()));
        }
        let h = self.config.hidden_dim;
        let s = &self.slots;
        let x = g.gather_rows(b.node(s.embeddings), ids)?;
        let xw = g.matmul(x, b.node(s.w_in))?;
        let z_in = g.add_row_bias(xw, b.node(s.b_lstm))?;
        let mut hidden = b.node(s.h0);
        let mut cell = b.node(s.c0);
        let mut states = Vec::with_capacity(ids.len());
        for t in 0..ids.len() {
            let zx = g.row(z_in, t)?;
            let zh = g.matmul(hidden, b.node(s.w_rec))?;
            let z = g.add(zx, zh)?;
            let pre_i = g.slice(z, 0, h)?;
            let pre_f = g.slice(z, h, h)?;
            let pre_o = g.slice(z, 2 * h, h)?;
            let pre_g = g.slice(z, 3 * h, h)?;
            let input_gate = g.sigmoid(pre_i);
            let forget_gate = g.sigmoid(pre_f);
            let output_gate = g.sigmoid(pre_o);
            let candidate = g.tanh(pre_g);
            let kept = g.mul(forget_gate, cell)?;
            let written = g.mul(input_gate, candidate)?;
            cell = g.add(kept, written)?;
            let squashed = g.tanh(cell);
            hidden = g.mul(output_gate, squashed)?;
            states.push(hidden);
        }
        Ok(states)
    }

    /// Additive attention: `s_i = u . tanh(W h_i + b)`, weights `softmax(s)`,
    /// pooled `sum_i weights_i h_i`.
    pub fn attend(
        &self,
        g: &mut Graph,
        b: &Bound,
        attribute: Attribute,
        hidden: &[NodeId],
    ) -> Result<AttentionNodes> {
        if hidden.is_empty() {
            return Err(NpdError::Contract("cannot attend over an empty sequence".into()));
        }
        let slots = match attribute {
            Attribute::Gender => self.slots.attention_gender,
            Attribute::Location => self.slots.attention_location,
        };
        let states = g.stack_rows(hidden)?;
        let projected = g.matmul(states, b.node(slots.w))?;
        let projected = g.add_row_bias(projected, b.node(slots.b))?;
        let keys = g.tanh(projected);
        let scores = g.matmul(keys, b.node(slots.u))?;
        let weights = g.softmax(scores)?;
        let pooled = g.matmul(weights, states)?;
        Ok(AttentionNodes {
            attribute,
            weights,
            pooled,
        })
    }

    /// Five two-class heads: `softmax(W_out . sigmoid(W_hidden . H + b_hidden) + b_out)`.
    pub fn emotion_heads(&self, g: &mut Graph, b: &Bound, rep: NodeId) -> Result<Vec<NodeId>> {
        let expected = self.config.variant.representation_dim(self.config.hidden_dim);
        let got = g.value(rep).shape().to_vec();
        if got != [expected] {
            return Err(NpdError::Contract(format!(
                "emotion heads expect a [{expected}] representation, got {got:?}"
            )));
        }
        self.slots
            .heads
            .iter()
            .map(|hs| {
                let z = g.matmul(rep, b.node(hs.w_hidden))?;
                let z = g.add(z, b.node(hs.b_hidden))?;
                let features = g.sigmoid(z);
                let logits = g.matmul(features, b.node(hs.w_out))?;
                let logits = g.add(logits, b.node(hs.b_out))?;
                g.softmax(logits)
            })
            .collect()
    }

    /// Gender probability (male) and location distribution. Inputs pass
    /// through gradient reversal first when `reversal` is given.
    pub fn discriminate(
        &self,
        g: &mut Graph,
        b: &Bound,
        gender_input: Option<NodeId>,
        location_input: Option<NodeId>,
        reversal: Option<ReversalCoefficient>,
    ) -> Result<(Option<NodeId>, Option<NodeId>)> {
        let h = self.config.hidden_dim;
        let check = |g: &Graph, v: NodeId| -> Result<()> {
            if g.value(v).shape() != [h] {
                return Err(NpdError::Contract(format!(
                    "discriminator expects a [{h}] vector, got {:?}",
                    g.value(v).shape()
                )));
            }
            Ok(())
        };
        let gender = match gender_input {
            Some(v) => {
                check(g, v)?;
                let v = match reversal {
                    Some(c) => g.grad_reverse(v, c),
                    None => v,
                };
                let logit = g.matmul(v, b.node(self.slots.gender_w))?;
                let logit = g.add(logit, b.node(self.slots.gender_b))?;
                Some(g.sigmoid(logit))
            }
            None => None,
        };
        let location = match location_input {
            Some(v) => {
                check(g, v)?;
                let v = match reversal {
                    Some(c) => g.grad_reverse(v, c),
                    None => v,
                };
                let logits = g.matmul(v, b.node(self.slots.location_w))?;
                let logits = g.add(logits, b.node(self.slots.location_b))?;
                Some(g.softmax(logits)?)
            }
            None => None,
        };
        Ok((gender, location))
    }

    /// Full forward pass wired per the model's variant.
    ///
    /// Dropout (train mode only) is applied to the emotion heads' input.
    pub fn forward(
        &self,
        g: &mut Graph,
        b: &Bound,
        ids: &[usize],
        train: bool,
        dropout: f64,
        reversal: ReversalCoefficient,
        rng: &mut Rng,
    ) -> Result<ForwardOutput> {
        let variant = self.config.variant;
        let hidden = self.encode(g, b, ids)?;
        let last = *hidden.last().expect("non-empty");
        let mut attention = Vec::new();
        let rep = match variant.representation() {
            Representation::LastHidden => last,
            Representation::GenderAttention => {
                attention.push(self.attend(g, b, Attribute::Gender, &hidden)?);
                attention[0].pooled
            }
            Representation::LocationAttention => {
                attention.push(self.attend(g, b, Attribute::Location, &hidden)?);
                attention[0].pooled
            }
            Representation::BothAttentions => {
                let vg = self.attend(g, b, Attribute::Gender, &hidden)?;
                let vl = self.attend(g, b, Attribute::Location, &hidden)?;
                attention.push(vg);
                attention.push(vl);
                g.concat(vg.pooled, vl.pooled)?
            }
        };
        let pooled_for = |attr: Attribute| {
            attention
                .iter()
                .find(|a| a.attribute == attr)
                .map(|a| a.pooled)
        };
        let mut inputs = [None, None];
        let mut reversed = None;
        for (k, (wiring, attr)) in [
            (variant.gender_discriminator(), Attribute::Gender),
            (variant.location_discriminator(), Attribute::Location),
        ]
        .into_iter()
        .enumerate()
        {
            if let Some(w) = wiring {
                inputs[k] = Some(if w.from_attention {
                    pooled_for(attr).ok_or_else(|| {
                        NpdError::Config(format!("{variant} has no {} attention", attr.name()))
                    })?
                } else {
                    last
                });
                reversed = Some(w.reversed);
            }
        }
        let (gender_prob, location_probs) = self.discriminate(
            g,
            b,
            inputs[0],
            inputs[1],
            reversed.unwrap_or(false).then_some(reversal),
        )?;
        let head_input = g.dropout(rep, dropout, rng, train)?;
        let emotion_probs = self.emotion_heads(g, b, head_input)?;
        Ok(ForwardOutput {
            emotion_probs,
            gender_prob,
            location_probs,
            attention,
            hidden,
            representation: rep,
        })
    }

    /// Eval-mode forward returning plain values.
    pub fn predict(&self, ids: &[usize]) -> Result<Prediction> {
        let mut g = Graph::new();
        let b = self.bind(&mut g);
        let mut unused = rng::stream(0, "predict");
        let out = self.forward(&mut g, &b, ids, false, 0.0, ReversalCoefficient::ONE, &mut unused)?;
        let mut emotion_present = [0.0; NUM_EMOTIONS];
        for (j, &p) in out.emotion_probs.iter().enumerate() {
            emotion_present[j] = g.value(p).data()[1];
        }
        Ok(Prediction {
            emotion_present,
            gender_male: out.gender_prob.map(|p| g.value(p).item()),
            location: out.location_probs.map(|p| g.value(p).data().to_vec()),
            attention: out
                .attention
                .iter()
                .map(|a| AttentionOutput {
                    attribute: a.attribute,
                    weights: g.value(a.weights).data().to_vec(),
                    pooled: g.value(a.pooled).data().to_vec(),
                })
                .collect(),
        })
    }
}
