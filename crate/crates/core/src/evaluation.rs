//! Precision/recall bookkeeping and stratified fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Precision, recall and their harmonic mean, expert being the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub precision: T,
    pub recall: T,
    pub f_measure: T,
}

impl<T: Scalar> Metrics<T> {
    /// From true positives, predicted positives and actual positives.
    /// Empty denominators give zero.
    pub fn from_counts(true_positives: usize, predicted: usize, actual: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { T::zero() } else { T::of_usize(num) / T::of_usize(den) };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, actual);
        Self { precision, recall, f_measure: f_measure(precision, recall) }
    }

    /// Component-wise arithmetic mean.
    pub fn mean(items: &[Self]) -> Self {
        let n = T::of_usize(items.len().max(1));
        Self {
            precision: items.iter().map(|m| m.precision).sum::<T>() / n,
            recall: items.iter().map(|m| m.recall).sum::<T>() / n,
            f_measure: items.iter().map(|m| m.f_measure).sum::<T>() / n,
        }
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f_measure<T: Scalar>(precision: T, recall: T) -> T {
    let sum = precision + recall;
    if sum == T::zero() {
        T::zero()
    } else {
        T::of(2.0) * precision * recall / sum
    }
}

/// Fold index for every sample, stratified by label.
///
/// Each class is shuffled with the seed and dealt round-robin; the negative
/// class continues where the positive class stopped, so fold sizes differ by
/// at most one and so do the per-fold counts of each class.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    assert!(folds > 0, "at least one fold");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut assignment = vec![0; labels.len()];
    for (slot, &i) in positives.iter().chain(&negatives).enumerate() {
        assignment[i] = slot % folds;
    }
    assignment
}
