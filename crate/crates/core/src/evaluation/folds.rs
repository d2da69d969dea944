use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One train/test split of one repetition. Index lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub repetition: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified `k`-fold partition of `0..labels.len()`.
///
/// Each class is shuffled with its own stream of `seed` and dealt
/// round-robin over the folds; the next class continues where the previous
/// one stopped, so fold sizes differ by at most one as well.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<FoldAssignment>> {
    if k == 0 {
        return Err(Error::InvalidConfig("number of folds must be >= 1".into()));
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(classes.len());
    for &class in &classes {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::ClassSmallerThanK {
                class_size: idx.len(),
                k,
            });
        }
        members.push(idx);
    }

    let mut test: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next = 0;
    for (class, mut idx) in classes.iter().zip(members) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::from(*class)));
        idx.shuffle(&mut rng);
        for i in idx {
            test[next].push(i);
            next = (next + 1) % k;
        }
    }

    let n = labels.len();
    Ok(test
        .into_iter()
        .enumerate()
        .map(|(fold, mut test)| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            FoldAssignment {
                repetition: 0,
                fold,
                train: (0..n).filter(|&i| !in_test[i]).collect(),
                test,
            }
        })
        .collect())
}

/// `repetitions` independent stratified partitions; repetition `r` uses
/// `derive_seed(seed, r)`.
pub fn repeated_stratified_kfold(
    labels: &[u8],
    k: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<FoldAssignment>> {
    let mut out = Vec::with_capacity(k * repetitions);
    for r in 0..repetitions {
        for mut f in stratified_kfold(labels, k, derive_seed(seed, r as u64))? {
            f.repetition = r;
            out.push(f);
        }
    }
    Ok(out)
}
