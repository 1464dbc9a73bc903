use std::fmt::Write as _;

use super::{evaluate, tsv_header, EvalReport};
use crate::corpus::{TokenizedPost, NUM_EMOTIONS};
use crate::error::{NpdError, Result};
use crate::model::{ModelConfig, ModelVariant, NpdModel};
use crate::par::Execution;
use crate::text::EmbeddingTable;
use crate::training::{train, TrainingConfig};

/// Splits and embeddings shared by every run of an ablation.
#[derive(Clone, Copy)]
pub struct AblationData<'a> {
    pub train: &'a [TokenizedPost],
    pub dev: &'a [TokenizedPost],
    pub test: &'a [TokenizedPost],
    pub embeddings: &'a EmbeddingTable,
}

#[derive(Clone, Debug)]
pub struct AblationPlan {
    pub variants: Vec<ModelVariant>,
    pub seeds: Vec<u64>,
    /// Architecture template; the variant field is replaced per run.
    pub model: ModelConfig,
    /// Training template; the seed field is replaced per run.
    pub training: TrainingConfig,
    /// How the (variant, seed) runs are scheduled.
    pub jobs: Execution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: ModelVariant,
    pub seed: u64,
    pub outcome: std::result::Result<EvalReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub variant: ModelVariant,
    pub succeeded: usize,
    pub failed: usize,
    pub mean_f1: [f64; NUM_EMOTIONS],
    /// Seed-mean average F1; `None` when every run failed.
    pub mean_average_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// Per-variant seed means, in first-appearance order.
    pub fn summaries(&self) -> Vec<VariantSummary> {
        let mut order: Vec<ModelVariant> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.variant) {
                order.push(r.variant);
            }
        }
        order
            .into_iter()
            .map(|variant| {
                let rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.variant == variant).collect();
                let ok: Vec<&EvalReport> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
                let n = ok.len() as f64;
                let mean_f1 = std::array::from_fn(|j| {
                    if ok.is_empty() {
                        0.0
                    } else {
                        ok.iter().map(|r| r.f1[j]).sum::<f64>() / n
                    }
                });
                VariantSummary {
                    variant,
                    succeeded: ok.len(),
                    failed: rows.len() - ok.len(),
                    mean_f1,
                    mean_average_f1: (!ok.is_empty())
                        .then(|| ok.iter().map(|r| r.average_f1).sum::<f64>() / n),
                }
            })
            .collect()
    }

    pub fn mean_average_f1(&self, variant: ModelVariant) -> Option<f64> {
        self.summaries()
            .into_iter()
            .find(|s| s.variant == variant)
            .and_then(|s| s.mean_average_f1)
    }

    /// Per-run rows, then one `mean` row per variant.
    pub fn to_tsv(&self) -> String {
        let mut s = tsv_header();
        s.push('\n');
        for r in &self.rows {
            match &r.outcome {
                Ok(rep) => {
                    let _ = writeln!(s, "{}", rep.tsv_row());
                }
                Err(msg) => {
                    let _ = writeln!(s, "{}\t{}\tfailed: {}", r.variant, r.seed, msg.replace('\t', " "));
                }
            }
        }
        for sum in self.summaries() {
            let Some(avg) = sum.mean_average_f1 else {
                let _ = writeln!(s, "{}\tmean\tall runs failed", sum.variant);
                continue;
            };
            let _ = write!(s, "{}\tmean", sum.variant);
            for v in sum.mean_f1 {
                let _ = write!(s, "\t{v:.4}");
            }
            let _ = writeln!(s, "\t{avg:.4}");
        }
        s
    }
}

fn run_one(data: &AblationData<'_>, plan: &AblationPlan, variant: ModelVariant, seed: u64) -> Result<EvalReport> {
    let cfg = ModelConfig {
        variant,
        ..plan.model.clone()
    };
    let training = TrainingConfig {
        seed,
        ..plan.training.clone()
    };
    let model = NpdModel::new(cfg, data.embeddings, seed)?;
    let trained = train(model, data.train, data.dev, &training)?;
    let mut report = evaluate(&trained.model, data.test, training.execution)?;
    report.seed = Some(seed);
    Ok(report)
}

/// Trains and evaluates every (variant, seed) pair on the same data.
///
/// A failing run becomes a failed row; the remaining runs continue.
pub fn ablate(data: &AblationData<'_>, plan: &AblationPlan) -> Result<AblationTable> {
    if plan.variants.is_empty() || plan.seeds.is_empty() {
        return Err(NpdError::Config("ablation needs at least one variant and one seed".into()));
    }
    let jobs: Vec<(ModelVariant, u64)> = plan
        .variants
        .iter()
        .flat_map(|&v| plan.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let rows = plan.jobs.map(&jobs, |_, &(variant, seed)| {
        let outcome = run_one(data, plan, variant, seed).map_err(|e| {
            log::warn!("{variant} seed {seed} failed: {e}");
            e.to_string()
        });
        AblationRow { variant, seed, outcome }
    });
    Ok(AblationTable { rows })
}
