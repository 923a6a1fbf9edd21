//! Seeded train/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetSplit, Label, TimeSeriesSample};
use crate::error::{Error, Result};

/// Partition samples into a reproducible train/test split.
///
/// The train set receives `ceil(n * train_ratio)` samples (1113 at ratio
/// 0.783 gives 872/241). With `stratified` the per-class allocation follows
/// the largest-remainder method, keeping every class within one sample of
/// the global ratio while preserving the exact total.
pub fn split_dataset(
    samples: Vec<TimeSeriesSample>,
    train_ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_ratio {train_ratio} outside (0, 1)"
        )));
    }

    let n = samples.len();
    let train_total = ((n as f64 * train_ratio).ceil() as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // Decide per-index membership.
    let mut in_train = vec![false; n];
    if stratified {
        let n_good = samples.iter().filter(|s| s.label() == Label::Good).count();
        let n_bad = n - n_good;
        let quotas = largest_remainder(&[n_good, n_bad], train_ratio, train_total);
        let mut taken = [0usize; 2];
        for &idx in &order {
            let class = samples[idx].label().index();
            if taken[class] < quotas[class] {
                in_train[idx] = true;
                taken[class] += 1;
            }
        }
    } else {
        for &idx in order.iter().take(train_total) {
            in_train[idx] = true;
        }
    }

    // Move samples out in shuffled order so membership and ordering are both
    // functions of the seed alone.
    let mut slots: Vec<Option<TimeSeriesSample>> = samples.into_iter().map(Some).collect();
    let mut train = Vec::with_capacity(train_total);
    let mut test = Vec::with_capacity(n - train_total);
    for idx in order {
        let sample = slots[idx].take().expect("each index moved once");
        if in_train[idx] {
            train.push(sample);
        } else {
            test.push(sample);
        }
    }

    Ok(DatasetSplit { train, test, seed })
}

/// Apportion `total` train slots over class sizes by largest remainder.
fn largest_remainder(class_counts: &[usize], ratio: f64, total: usize) -> Vec<usize> {
    let mut quotas: Vec<usize> = Vec::with_capacity(class_counts.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(class_counts.len());
    let mut assigned = 0usize;
    for (i, &count) in class_counts.iter().enumerate() {
        let exact = count as f64 * ratio;
        let base = (exact.floor() as usize).min(count);
        quotas.push(base);
        assigned += base;
        remainders.push((i, exact - base as f64));
    }
    // Stable order on ties keeps the apportionment deterministic.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut remaining = total.saturating_sub(assigned);
    for (i, _) in remainders {
        if remaining == 0 {
            break;
        }
        if quotas[i] < class_counts[i] {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    quotas
}
