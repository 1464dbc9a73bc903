use rand::seq::SliceRandom;

use crate::error::{NpdError, Result};
use crate::rng;

/// Share of posts used for training (the rest is test).
pub const TRAIN_FRACTION: f64 = 0.7;
/// Share of the training portion held out for early stopping.
pub const DEV_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded random partition into train / dev / test.
///
/// `train_frac` of the posts form the training portion, of which
/// [`DEV_FRACTION`] is carved off as dev; the remainder is test.
pub fn split<T: Clone>(items: &[T], train_frac: f64, seed: u64) -> Result<Split<T>> {
    if items.len() < 10 {
        return Err(NpdError::Config(format!(
            "need at least 10 posts to split, got {}",
            items.len()
        )));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(NpdError::Config(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let n = items.len();
    let trainval = ((n as f64 * train_frac).round() as usize).clamp(2, n - 1);
    let dev = ((trainval as f64 * DEV_FRACTION).round() as usize).clamp(1, trainval - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let pick = |range: &[usize]| range.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..trainval - dev]),
        dev: pick(&order[trainval - dev..trainval]),
        test: pick(&order[trainval..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_posts() {
        let items: Vec<u32> = (0..100).collect();
        let s = split(&items, TRAIN_FRACTION, 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (63, 7, 30));
        let mut all: Vec<u32> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_eq!(split(&items, TRAIN_FRACTION, 3).unwrap(), s);
        assert_ne!(split(&items, TRAIN_FRACTION, 4).unwrap(), s);
    }

    #[test]
    fn too_few_posts() {
        let items: Vec<u32> = (0..9).collect();
        assert!(matches!(split(&items, 0.7, 1), Err(NpdError::Config(_))));
        let items: Vec<u32> = (0..10).collect();
        let s = split(&items, 0.7, 1).unwrap();
        assert_eq!(s.train.len() + s.dev.len() + s.test.len(), 10);
    }

    proptest::proptest! {
        #[test]
        fn split_is_an_exact_partition(n in 10usize..400, seed in 0u64..1000) {
            let items: Vec<usize> = (0..n).collect();
            let s = split(&items, TRAIN_FRACTION, seed).unwrap();
            proptest::prop_assert!(!s.train.is_empty() && !s.dev.is_empty() && !s.test.is_empty());
            let mut all: Vec<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, items);
        }
    }
}
