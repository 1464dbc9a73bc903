//! Batch-mean losses computed directly on probability values.
//!
//! The graph builds the same quantities from `nll_pick` / `binary_nll`; these
//! are used for reporting and as an independent reference.

use crate::corpus::NUM_EMOTIONS;
use crate::error::{NpdError, Result};

/// Floor on the probability of the gold emotion class.
pub const EMOTION_FLOOR: f64 = 1e-300;
/// Discriminator probabilities are kept inside `[eps, 1 - eps]`.
pub const ATTRIBUTE_EPS: f64 = 1e-12;

/// `ln(max(p, floor))`, keeping NaN visible.
fn floored_ln(p: f64, floor: f64) -> f64 {
    if p.is_nan() {
        p
    } else {
        p.max(floor).ln()
    }
}

/// Two-class distributions `[p(absent), p(present)]`, one per emotion.
pub type EmotionProbs = [[f64; 2]; NUM_EMOTIONS];

fn check_batch(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(NpdError::Contract(format!("{what}: {a} predictions but {b} labels")));
    }
    if a == 0 {
        return Err(NpdError::Contract(format!("{what}: empty batch")));
    }
    Ok(())
}

/// Mean over the batch of `-sum_j ln p_j(gold_j)`, plus
/// `l2_lambda / 2 * emotion_sq_norm`.
pub fn emotion_loss(
    probs: &[EmotionProbs],
    gold: &[[u8; NUM_EMOTIONS]],
    emotion_sq_norm: f64,
    l2_lambda: f64,
) -> Result<f64> {
    check_batch(probs.len(), gold.len(), "emotion loss")?;
    let mut total = 0.0;
    for (p, y) in probs.iter().zip(gold) {
        for j in 0..NUM_EMOTIONS {
            total -= floored_ln(p[j][y[j] as usize], EMOTION_FLOOR);
        }
    }
    Ok(total / probs.len() as f64 + 0.5 * l2_lambda * emotion_sq_norm)
}

/// Mean binary negative log-likelihood of the male probability.
pub fn gender_loss(p_male: &[f64], gold: &[u8]) -> Result<f64> {
    check_batch(p_male.len(), gold.len(), "gender loss")?;
    let total: f64 = p_male
        .iter()
        .zip(gold)
        .map(|(&p, &g)| {
            let p = p.clamp(ATTRIBUTE_EPS, 1.0 - ATTRIBUTE_EPS);
            let g = g as f64;
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / p_male.len() as f64)
}

/// Mean `-ln p[gold]` over location distributions.
pub fn location_loss(probs: &[Vec<f64>], gold: &[usize]) -> Result<f64> {
    check_batch(probs.len(), gold.len(), "location loss")?;
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(gold) {
        let py = *p.get(y).ok_or_else(|| {
            NpdError::Contract(format!("location {y} outside {} classes", p.len()))
        })?;
        total -= floored_ln(py, ATTRIBUTE_EPS);
    }
    Ok(total / probs.len() as f64)
}

/// `lambda1 * j_y + lambda2 * j_gend + lambda3 * j_loc`.
pub fn total_loss(j_y: f64, j_gend: f64, j_loc: f64, lambdas: [f64; 3]) -> f64 {
    lambdas[0] * j_y + lambdas[1] * j_gend + lambdas[2] * j_loc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn closed_forms() {
        let uniform = [[0.5, 0.5]; NUM_EMOTIONS];
        let j = emotion_loss(&[uniform], &[[1, 0, 1, 0, 0]], 0.0, 0.0).unwrap();
        assert!((j - 5.0 * 2f64.ln()).abs() < 1e-14);
        let perfect = [[0.0, 1.0]; NUM_EMOTIONS];
        assert_eq!(emotion_loss(&[perfect], &[[1; 5]], 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(emotion_loss(&[perfect], &[[1; 5]], 4.0, 0.5).unwrap(), 1.0);

        assert!((gender_loss(&[0.5, 0.5], &[0, 1]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let sure = gender_loss(&[1.0], &[1]).unwrap();
        assert!(sure > 0.0 && (sure - 1e-12).abs() < 1e-15);

        let m7 = vec![1.0 / 7.0; 7];
        assert!((location_loss(&[m7], &[3]).unwrap() - 7f64.ln()).abs() < 1e-14);
        let one_hot = vec![0.0, 1.0, 0.0];
        assert_eq!(location_loss(&[one_hot], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_is_floored() {
        let mut p = [[0.5, 0.5]; NUM_EMOTIONS];
        p[0] = [1.0, 0.0];
        let j = emotion_loss(&[p], &[[1, 0, 0, 0, 0]], 0.0, 0.0).unwrap();
        assert!(j.is_finite());
        assert!(gender_loss(&[0.0], &[1]).unwrap().is_finite());
        assert!(emotion_loss(&[[[f64::NAN, f64::NAN]; 5]], &[[0; 5]], 0.0, 0.0).unwrap().is_nan());
        assert!(location_loss(&[vec![f64::NAN, 0.5]], &[0]).unwrap().is_nan());
    }

    #[test]
    fn random_batches_match_elementwise_sum() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 9;
        let mut probs = Vec::new();
        let mut gold = Vec::new();
        let mut g_p: Vec<f64> = Vec::new();
        let mut g_y = Vec::new();
        let mut l_p = Vec::new();
        let mut l_y = Vec::new();
        for _ in 0..n {
            let mut p = [[0.0; 2]; NUM_EMOTIONS];
            let mut y = [0u8; NUM_EMOTIONS];
            for j in 0..NUM_EMOTIONS {
                let q: f64 = r.random_range(0.01..0.99);
                p[j] = [1.0 - q, q];
                y[j] = r.random_range(0..2);
            }
            probs.push(p);
            gold.push(y);
            g_p.push(r.random_range(0.01..0.99));
            g_y.push(r.random_range(0..2u8));
            let raw: Vec<f64> = (0..5).map(|_| r.random_range(0.1..1.0)).collect();
            let z: f64 = raw.iter().sum();
            l_p.push(raw.iter().map(|x| x / z).collect::<Vec<_>>());
            l_y.push(r.random_range(0..5usize));
        }
        let mut want = 0.0;
        for i in 0..n {
            for j in 0..NUM_EMOTIONS {
                want += -(if gold[i][j] == 1 { probs[i][j][1] } else { probs[i][j][0] }).ln();
            }
        }
        want /= n as f64;
        assert!((emotion_loss(&probs, &gold, 0.0, 0.0).unwrap() - want).abs() < 1e-12);

        let want: f64 = (0..n)
            .map(|i| if g_y[i] == 1 { -g_p[i].ln() } else { -(1.0 - g_p[i]).ln() })
            .sum::<f64>()
            / n as f64;
        assert!((gender_loss(&g_p, &g_y).unwrap() - want).abs() < 1e-12);

        let want: f64 = (0..n).map(|i| -l_p[i][l_y[i]].ln()).sum::<f64>() / n as f64;
        assert!((location_loss(&l_p, &l_y).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn weighted_sum() {
        assert_eq!(total_loss(2.0, 3.0, 4.0, [1.0, 0.0, 0.0]), 2.0);
        assert_eq!(total_loss(2.0, 3.0, 4.0, [1.0, 1.0, 1.0]), 9.0);
    }

    #[test]
    fn mismatched_batches_error() {
        assert!(gender_loss(&[0.5], &[]).is_err());
        assert!(location_loss(&[vec![0.5, 0.5]], &[2]).is_err());
    }
}
