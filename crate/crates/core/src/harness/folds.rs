use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint trace-index sets covering every trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices outside fold `i`, ascending.
    pub fn rest(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Splits traces (given by their lengths) into `k` folds stratified by
/// length quartile: shuffle, group by quartile, then deal round-robin.
pub fn make_folds(lengths: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = lengths.len();
    if k == 0 || n < k {
        return Err(Error::TooFewTraces { needed: k.max(1), got: n });
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let cuts = [sorted[n / 4], sorted[n / 2], sorted[3 * n / 4]];
    let quartile = |len: usize| cuts.partition_point(|&c| c < len);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&i| quartile(lengths[i]));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_traces_make_five_pairs() {
        let plan = make_folds(&[3; 10], 5, 0).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn seeded() {
        let lens: Vec<usize> = (0..40).map(|i| i % 7 + 1).collect();
        assert_eq!(make_folds(&lens, 5, 9).unwrap(), make_folds(&lens, 5, 9).unwrap());
        assert_ne!(make_folds(&lens, 5, 9).unwrap(), make_folds(&lens, 5, 10).unwrap());
    }

    #[test]
    fn too_few_traces() {
        assert!(make_folds(&[1, 2, 3, 4], 5, 0).is_err());
    }

    #[test]
    fn quartiles_spread_over_folds() {
        // 20 short and 20 long traces: each fold gets 4 of each
        let lens: Vec<usize> = (0..40).map(|i| if i < 20 { 2 } else { 30 }).collect();
        let plan = make_folds(&lens, 5, 1).unwrap();
        for f in &plan.folds {
            assert_eq!(f.iter().filter(|&&i| lens[i] == 2).count(), 4);
        }
    }

    proptest! {
        #[test]
        fn partition_of_all_traces(lens in prop::collection::vec(1usize..50, 5..200), seed in any::<u64>()) {
            let plan = make_folds(&lens, 5, seed).unwrap();
            let mut all: Vec<usize> = plan.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..lens.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut rest = plan.rest(0);
            rest.extend(&plan.folds[0]);
            prop_assert_eq!(rest.len(), lens.len());
        }
    }
}
