use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};

/// Shuffler output: the permuted batch plus what corrupted senders reveal.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleResult<T> {
    pub permuted: Vec<T>,
    /// `(original_index, shuffled_index)` for each corrupted sender, ascending by original index.
    pub leakage: Vec<(usize, usize)>,
}

/// Applies a uniformly random permutation and leaks positions of corrupted senders only.
pub fn shuffle<T, R: Rng + ?Sized>(
    items: Vec<T>,
    corrupted: &BTreeSet<usize>,
    rng: &mut R,
) -> Result<ShuffleResult<T>> {
    let n = items.len();
    if n == 0 {
        return Err(invalid("cannot shuffle an empty batch"));
    }
    if let Some(&bad) = corrupted.iter().find(|&&i| i >= n) {
        return Err(invalid(format!("corrupted index {bad} out of range for {n} senders")));
    }
    // order[pos] = original index placed at pos
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut position = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        position[orig] = pos;
    }
    let leakage = corrupted.iter().map(|&i| (i, position[i])).collect();
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let permuted = order
        .iter()
        .map(|&orig| slots[orig].take().expect("each index appears once"))
        .collect();
    Ok(ShuffleResult { permuted, leakage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(shuffle(Vec::<u8>::new(), &BTreeSet::new(), &mut rng).is_err());
    }

    #[test]
    fn out_of_range_corruption_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(shuffle(vec![1, 2], &BTreeSet::from([2]), &mut rng).is_err());
    }

    #[test]
    fn no_corruption_no_leakage() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = shuffle(vec![1, 2, 3], &BTreeSet::new(), &mut rng).unwrap();
        assert!(r.leakage.is_empty());
    }

    proptest! {
        #[test]
        fn permutation_and_leakage(
            n in 1usize..40,
            seed in any::<u64>(),
            mask in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corrupted: BTreeSet<usize> = (0..n).filter(|i| mask >> (i % 64) & 1 == 1).collect();
            let items: Vec<usize> = (0..n).map(|i| i * 10).collect();
            let r = shuffle(items.clone(), &corrupted, &mut rng).unwrap();
            let mut sorted = r.permuted.clone();
            sorted.sort();
            prop_assert_eq!(sorted, items.clone());
            prop_assert_eq!(r.leakage.len(), corrupted.len());
            for &(orig, pos) in &r.leakage {
                prop_assert!(corrupted.contains(&orig));
                prop_assert_eq!(r.permuted[pos], items[orig]);
            }
        }
    }
}
