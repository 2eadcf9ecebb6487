use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/validation/test proportions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.70,
            valid: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.valid, self.test];
        if r.iter().any(|v| !(*v >= 0.0)) || self.train <= 0.0 {
            return Err(Error::invalid("split ratios must be non-negative with train > 0"));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split ratios must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut into train, validation and test parts.
/// Validation and test sizes are the rounded ratios; train takes the rest.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<Partition> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 rows to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let mut n_valid = (spec.valid * n as f64).round() as usize;
    let mut n_test = (spec.test * n as f64).round() as usize;
    while n_valid + n_test >= n {
        if n_test >= n_valid && n_test > 0 {
            n_test -= 1;
        } else {
            n_valid -= 1;
        }
    }
    let n_train = n - n_valid - n_test;
    let test = idx.split_off(n_train + n_valid);
    let valid = idx.split_off(n_train);
    Ok(Partition {
        train: idx,
        valid,
        test,
    })
}

/// Seeded shuffle of `indices` dealt into `k` contiguous folds whose sizes
/// differ by at most one.
pub fn kfold(indices: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k-fold needs k >= 2"));
    }
    if k > indices.len() {
        return Err(Error::invalid(format!(
            "cannot cut {} rows into {k} folds",
            indices.len()
        )));
    }
    let mut idx = indices.to_vec();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = idx.len() / k;
    let extra = idx.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}
