use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Random partition of `0..b` into `k` folds whose sizes differ by at most
/// one (the larger folds come first). Indices inside a fold are ascending.
pub fn kfold_split(b: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > b {
        return Err(Error::InvalidParameter(format!("cannot split {b} bags into {k} folds")));
    }
    let mut folds = vec![Vec::with_capacity(b / k + 1); k];
    for (pos, i) in shuffled(b, seed).into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Bag-level train/test split. The test side holds `round(fraction · b)`
/// bags, at least one, and leaves at least one for training.
pub fn train_test_split(b: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction must lie in (0, 1), got {fraction}")));
    }
    if b < 2 {
        return Err(Error::InsufficientBags(format!("{b} bag(s) cannot be split into train and test")));
    }
    let n_test = ((fraction * b as f64).round() as usize).clamp(1, b - 1);
    let idx = shuffled(b, seed);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
