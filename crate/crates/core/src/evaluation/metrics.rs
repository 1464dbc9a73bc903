use serde::{Deserialize, Serialize};

use crate::corpus::NUM_EMOTIONS;

/// Binary confusion counts for one emotion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryCounts {
    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 whenever a denominator is 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-emotion confusion counts over one evaluation set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_emotion: [BinaryCounts; NUM_EMOTIONS],
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: [bool; NUM_EMOTIONS], gold: [u8; NUM_EMOTIONS]) {
        for j in 0..NUM_EMOTIONS {
            self.per_emotion[j].record(predicted[j], gold[j] == 1);
        }
    }

    pub fn total(&self) -> usize {
        self.per_emotion[0].total()
    }
}

pub fn f1(counts: &ConfusionCounts, emotion: usize) -> f64 {
    counts.per_emotion[emotion].f1()
}

/// Unweighted mean of per-emotion F1 values.
pub fn average_f1(f1s: &[f64; NUM_EMOTIONS]) -> f64 {
    f1s.iter().sum::<f64>() / NUM_EMOTIONS as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_cases() {
        let c = |tp, fp, fn_| BinaryCounts { tp, fp, fn_, tn: 0 };
        assert_eq!(c(10, 0, 0).f1(), 1.0);
        assert_eq!(c(0, 4, 7).f1(), 0.0);
        assert_eq!(c(0, 0, 0).f1(), 0.0);
        assert!((c(3, 1, 2).f1() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c(3, 1, 2).precision(), 0.75);
        assert_eq!(c(3, 1, 2).recall(), 0.6);
    }

    #[test]
    fn reported_average_reconstructs() {
        let avg = average_f1(&[0.657, 0.510, 0.459, 0.135, 0.127]);
        assert!((avg - 0.378).abs() <= 0.001);
    }

    #[test]
    fn totals_track_records() {
        let mut c = ConfusionCounts::default();
        c.record([true, false, true, false, false], [1, 1, 0, 0, 0]);
        c.record([false; 5], [0; 5]);
        assert_eq!(c.total(), 2);
        assert_eq!(c.per_emotion[0].tp, 1);
        assert_eq!(c.per_emotion[1].fn_, 1);
        assert_eq!(c.per_emotion[2].fp, 1);
        assert_eq!(c.per_emotion[3].tn, 2);
    }

    proptest::proptest! {
        #[test]
        fn f1_is_bounded_and_symmetric(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let a = BinaryCounts { tp, fp, fn_, tn: 0 }.f1();
            let b = BinaryCounts { tp, fp: fn_, fn_: fp, tn: 0 }.f1();
            proptest::prop_assert!((0.0..=1.0).contains(&a));
            proptest::prop_assert!((a - b).abs() <= 1e-15);
            let dice = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
            proptest::prop_assert!((a - dice).abs() <= 1e-12);
        }
    }
}
