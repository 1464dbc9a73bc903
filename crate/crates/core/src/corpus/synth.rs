//! Synthetic corpora with planted attribute/emotion correlations.
//!
//! Text is a sequence of symbolic tokens:
//!
//! * `w0042` neutral filler, Zipf-distributed by rank;
//! * `gm_f_03` / `gm_m_03` gender markers;
//! * `lm2_07` location markers (location 2);
//! * `emo_hap_l2_01` emotion markers in an attribute-specific dialect cell,
//!   or `emo_hap_all_01` in the shared cell.
//!
//! Author attributes are drawn uniformly. The emotion is drawn from a
//! categorical distribution whose per-emotion probabilities are the
//! prevalence targets reweighted by the author's gender and location
//! affinities, normalised so the marginals equal the targets.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::post::{Corpus, Emotion, Gender, Post, NUM_EMOTIONS};
use crate::error::{NpdError, Result};
use crate::rng::{self, Rng};

/// Emotion shares of a reference microblog corpus (posts per emotion / 11157),
/// in column order happiness, sadness, anger, surprise, fear.
pub const DEFAULT_PREVALENCE: [f64; NUM_EMOTIONS] = [
    2915.0 / 11157.0,
    2454.0 / 11157.0,
    153.0 / 11157.0,
    601.0 / 11157.0,
    359.0 / 11157.0,
];

const EMOTION_CODES: [&str; NUM_EMOTIONS] = ["hap", "sad", "ang", "sur", "fea"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_posts: usize,
    pub num_locations: usize,
    pub neutral_tokens: usize,
    /// Zipf exponent of the neutral-token rank distribution (0 = uniform).
    pub neutral_zipf_exponent: f64,
    pub markers_per_attribute_value: usize,
    pub emotion_markers_per_cell: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability a post carries a marker of its author's gender.
    pub gender_marker_prob: f64,
    /// Probability a post carries a marker of its author's location.
    pub location_marker_prob: f64,
    /// Probability an emotional post carries a marker of its emotion.
    pub emotion_marker_prob: f64,
    /// Probability an emitted emotion marker comes from the author's dialect
    /// cell (split evenly between the gender and the location cell) rather
    /// than the shared cell.
    pub dialect_prob: f64,
    pub prevalence: [f64; NUM_EMOTIONS],
    /// Relative emotion affinity per gender (female, male).
    pub gender_affinity: [[f64; NUM_EMOTIONS]; 2],
    /// Relative emotion affinity per location; empty means uniform.
    pub location_affinity: Vec<[f64; NUM_EMOTIONS]>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_posts: 8000,
            num_locations: 5,
            neutral_tokens: 1500,
            neutral_zipf_exponent: 1.0,
            markers_per_attribute_value: 30,
            emotion_markers_per_cell: 4,
            min_len: 8,
            max_len: 25,
            gender_marker_prob: 0.8,
            location_marker_prob: 0.8,
            emotion_marker_prob: 0.8,
            dialect_prob: 0.5,
            prevalence: DEFAULT_PREVALENCE,
            gender_affinity: [
                [1.1, 1.3, 0.6, 1.0, 1.2],
                [0.9, 0.7, 1.4, 1.0, 0.8],
            ],
            location_affinity: vec![
                [1.4, 0.7, 0.8, 1.0, 1.0],
                [0.7, 1.2, 1.5, 1.0, 1.2],
                [0.8, 1.5, 1.0, 1.0, 1.0],
                [1.5, 0.7, 0.8, 1.2, 0.8],
                [1.0, 1.0, 1.0, 1.0, 1.0],
            ],
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// Attributes leave no trace in the text and do not shift emotions.
    pub fn null_signal() -> Self {
        SynthConfig {
            gender_marker_prob: 0.0,
            location_marker_prob: 0.0,
            dialect_prob: 0.0,
            gender_affinity: [[1.0; NUM_EMOTIONS]; 2],
            location_affinity: Vec::new(),
            ..SynthConfig::default()
        }
    }

    fn location_affinity(&self, l: usize) -> [f64; NUM_EMOTIONS] {
        self.location_affinity
            .get(l)
            .copied()
            .unwrap_or([1.0; NUM_EMOTIONS])
    }

    /// Per-(gender, location) emotion probabilities, validated.
    fn emotion_table(&self) -> Result<Vec<[f64; NUM_EMOTIONS]>> {
        let m = self.num_locations;
        let mut raw = Vec::with_capacity(2 * m);
        for g in 0..2 {
            for l in 0..m {
                let la = self.location_affinity(l);
                let mut row = [0.0; NUM_EMOTIONS];
                for j in 0..NUM_EMOTIONS {
                    row[j] = self.gender_affinity[g][j] * la[j];
                }
                raw.push(row);
            }
        }
        let mut table = raw.clone();
        for j in 0..NUM_EMOTIONS {
            let mean = raw.iter().map(|r| r[j]).sum::<f64>() / raw.len() as f64;
            for row in &mut table {
                row[j] = if mean > 0.0 {
                    self.prevalence[j] * row[j] / mean
                } else {
                    0.0
                };
            }
        }
        for (cell, row) in table.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total > 1.0 + 1e-12 {
                return Err(NpdError::Config(format!(
                    "prevalence targets unsatisfiable: emotion probabilities for gender {} location {} sum to {total:.3} > 1",
                    cell / m,
                    cell % m
                )));
            }
        }
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("gender_marker_prob", self.gender_marker_prob),
            ("location_marker_prob", self.location_marker_prob),
            ("emotion_marker_prob", self.emotion_marker_prob),
            ("dialect_prob", self.dialect_prob),
        ];
        for (name, p) in probs.iter().chain(
            self.prevalence
                .iter()
                .map(|p| ("prevalence", *p))
                .collect::<Vec<_>>()
                .iter(),
        ) {
            if !(0.0..=1.0).contains(p) {
                return Err(NpdError::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.num_locations < 2 {
            return Err(NpdError::Config("num_locations must be >= 2".into()));
        }
        if !self.location_affinity.is_empty() && self.location_affinity.len() != self.num_locations {
            return Err(NpdError::Config(format!(
                "location_affinity has {} rows for {} locations",
                self.location_affinity.len(),
                self.num_locations
            )));
        }
        let affinities = self
            .gender_affinity
            .iter()
            .chain(&self.location_affinity)
            .flatten();
        if affinities.clone().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(NpdError::Config("affinities must be finite and >= 0".into()));
        }
        if self.neutral_tokens == 0
            || self.markers_per_attribute_value == 0
            || self.emotion_markers_per_cell == 0
        {
            return Err(NpdError::Config("token inventories must be non-empty".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len || self.max_len < 4 {
            return Err(NpdError::Config(format!(
                "invalid post length range {}..={} (need 1 <= min <= max, max >= 4)",
                self.min_len, self.max_len
            )));
        }
        self.emotion_table().map(|_| ())
    }
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|r| {
                acc += (r as f64).powf(-exponent);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Zipf { cdf }
    }

    fn sample(&self, r: &mut Rng) -> usize {
        let u: f64 = r.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn emotion_marker(cfg: &SynthConfig, r: &mut Rng, e: Emotion, gender: Gender, loc: usize) -> String {
    let cell = if r.random::<f64>() < cfg.dialect_prob {
        if r.random_bool(0.5) {
            match gender {
                Gender::Female => "f".to_string(),
                Gender::Male => "m".to_string(),
            }
        } else {
            format!("l{loc}")
        }
    } else {
        "all".to_string()
    };
    let k = r.random_range(0..cfg.emotion_markers_per_cell);
    format!("emo_{}_{cell}_{k:02}", EMOTION_CODES[e.index()])
}

/// Generates `cfg.n_posts` posts. Bit-reproducible for a given config.
pub fn synthesize(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let table = cfg.emotion_table()?;
    let zipf = Zipf::new(cfg.neutral_tokens, cfg.neutral_zipf_exponent);
    let mut r = rng::stream(cfg.seed, "synth");
    let m = cfg.num_locations;
    let mut posts = Vec::with_capacity(cfg.n_posts);
    for _ in 0..cfg.n_posts {
        let gender = if r.random_bool(0.5) {
            Gender::Male
        } else {
            Gender::Female
        };
        let location = r.random_range(0..m);
        let probs = &table[gender.bit() as usize * m + location];
        let u: f64 = r.random();
        let mut acc = 0.0;
        let emotion = Emotion::ALL.into_iter().find(|e| {
            acc += probs[e.index()];
            u < acc
        });

        let len = r.random_range(cfg.min_len..=cfg.max_len);
        let mut tokens: Vec<String> = (0..len)
            .map(|_| format!("w{:04}", zipf.sample(&mut r)))
            .collect();
        let mut planted = Vec::new();
        if r.random::<f64>() < cfg.gender_marker_prob {
            let k = r.random_range(0..cfg.markers_per_attribute_value);
            let g = if gender == Gender::Female { "f" } else { "m" };
            planted.push(format!("gm_{g}_{k:02}"));
        }
        if r.random::<f64>() < cfg.location_marker_prob {
            let k = r.random_range(0..cfg.markers_per_attribute_value);
            planted.push(format!("lm{location}_{k:02}"));
        }
        if let Some(e) = emotion {
            if r.random::<f64>() < cfg.emotion_marker_prob {
                planted.push(emotion_marker(cfg, &mut r, e, gender, location));
            }
        }
        let slots = sample_indices(&mut r, len, planted.len());
        for (slot, tok) in slots.into_iter().zip(planted) {
            tokens[slot] = tok;
        }
        posts.push(Post {
            text: tokens.join(" "),
            emotions: emotion.into_iter().collect(),
            gender,
            location,
        });
    }
    Ok(Corpus {
        posts,
        num_locations: m,
    })
}
