use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::Manifest;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Manifest,
    pub test: Manifest,
    /// Classes too small to appear on both sides.
    pub warnings: Vec<String>,
}

/// Stratified train/test split by classid. Each class with `n ≥ 2` records
/// sends `round(n · fraction)` (clamped to `[1, n − 1]`) to the test side; a
/// class with one record stays in train. Record order is preserved.
pub fn split(manifest: &Manifest, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        by_class.entry(r.classid).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; manifest.records.len()];
    let mut warnings = Vec::new();
    for (classid, mut idx) in by_class {
        let n = idx.len();
        if n < 2 {
            warnings.push(format!("class {classid} has {n} record; kept in train"));
            continue;
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in manifest.records.iter().zip(is_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok(Split {
        train: manifest.with_records(train),
        test: manifest.with_records(test),
        warnings,
    })
}
