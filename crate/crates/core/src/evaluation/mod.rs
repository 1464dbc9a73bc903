//! Per-emotion F1, average F1, attribute accuracy and the variant ablation
//! harness.

mod ablation;
mod metrics;

pub use ablation::{ablate, AblationData, AblationPlan, AblationRow, AblationTable, VariantSummary};
pub use metrics::{average_f1, f1, BinaryCounts, ConfusionCounts};

use std::fmt::Write as _;

use crate::corpus::{Emotion, TokenizedPost, NUM_EMOTIONS};
use crate::error::{NpdError, Result};
use crate::model::{ModelVariant, NpdModel};
use crate::par::Execution;

/// Probability above which an emotion is predicted present.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub variant: ModelVariant,
    pub seed: Option<u64>,
    /// Per-emotion F1 in column order.
    pub f1: [f64; NUM_EMOTIONS],
    pub average_f1: f64,
    pub counts: ConfusionCounts,
}

impl EvalReport {
    pub fn from_counts(variant: ModelVariant, seed: Option<u64>, counts: ConfusionCounts) -> Self {
        let f1 = std::array::from_fn(|j| f1(&counts, j));
        EvalReport {
            variant,
            seed,
            f1,
            average_f1: average_f1(&f1),
            counts,
        }
    }

    pub fn tsv_row(&self) -> String {
        let seed = self.seed.map_or("-".to_string(), |s| s.to_string());
        let mut row = format!("{}\t{seed}", self.variant);
        for v in self.f1.iter().chain([&self.average_f1]) {
            let _ = write!(row, "\t{v:.4}");
        }
        row
    }
}

/// Header of every report table.
pub fn tsv_header() -> String {
    let mut h = String::from("variant\tseed");
    for e in Emotion::ALL {
        h.push('\t');
        h.push_str(e.title());
    }
    h.push_str("\tAverage");
    h
}

/// Runs the model in eval mode over `test` and scores thresholded predictions.
pub fn evaluate(model: &NpdModel, test: &[TokenizedPost], execution: Execution) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(NpdError::Contract("cannot evaluate on an empty test set".into()));
    }
    let predictions = execution.map(test, |_, post| model.predict(&post.ids));
    let mut counts = ConfusionCounts::default();
    for (post, pred) in test.iter().zip(predictions) {
        counts.record(pred?.predicted(), post.emotions);
    }
    Ok(EvalReport::from_counts(model.variant(), None, counts))
}

/// Accuracy of the discriminators a variant carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributeAccuracy {
    pub gender: Option<f64>,
    pub location: Option<f64>,
}

pub fn attribute_accuracy(
    model: &NpdModel,
    test: &[TokenizedPost],
    execution: Execution,
) -> Result<AttributeAccuracy> {
    if test.is_empty() {
        return Err(NpdError::Contract("cannot evaluate on an empty test set".into()));
    }
    let predictions = execution.map(test, |_, post| model.predict(&post.ids));
    let (mut gender_hits, mut location_hits) = (0usize, 0usize);
    let (mut has_gender, mut has_location) = (false, false);
    for (post, pred) in test.iter().zip(predictions) {
        let pred = pred?;
        if let Some(p) = pred.gender_male {
            has_gender = true;
            gender_hits += ((p > 0.5) == (post.gender == 1)) as usize;
        }
        if let Some(dist) = &pred.location {
            has_location = true;
            let best = dist
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc })
                .0;
            location_hits += (best == post.location) as usize;
        }
    }
    let n = test.len() as f64;
    Ok(AttributeAccuracy {
        gender: has_gender.then(|| gender_hits as f64 / n),
        location: has_location.then(|| location_hits as f64 / n),
    })
}
