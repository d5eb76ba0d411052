//! Linear expertise techniques, per-file normalization, threshold
//! classification and threshold calibration against declared expertise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{stratified_folds, Metrics};
use crate::features::FeatureTable;
use crate::num::Scalar;

/// A (developer, file) pair.
pub type Pair = (String, String);

pub const DOA_INTERCEPT: f64 = 3.293;
pub const DOA_FA_WEIGHT: f64 = 1.098;
pub const DOA_DL_WEIGHT: f64 = 0.164;
pub const DOA_AC_WEIGHT: f64 = 0.321;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ExpertiseError {
    #[error("negative input to doa: {0}")]
    NegativeInput(f64),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("oracle pair ({developer}, {file}) has no score")]
    UnscoredOraclePair { developer: String, file: String },
    #[error("oracle has no labeled pairs")]
    EmptyOracle,
    #[error("{samples} labeled pairs cannot fill {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("pair ({developer}, {file}) is labeled both expert and non-expert")]
    ConflictingLabels { developer: String, file: String },
    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Doa,
    Blame,
    NumCommits,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::Doa, Technique::Blame, Technique::NumCommits];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Doa => "doa",
            Technique::Blame => "blame",
            Technique::NumCommits => "num_commits",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = ExpertiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "doa" => Ok(Technique::Doa),
            "blame" => Ok(Technique::Blame),
            "num_commits" | "numcommits" => Ok(Technique::NumCommits),
            _ => Err(ExpertiseError::UnknownTechnique(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertiseScore<T> {
    pub developer: String,
    pub file: String,
    pub technique: Technique,
    pub raw: T,
    /// `raw` over the largest `raw` on the same file, in [0, 1].
    pub normalized: T,
}

/// Declared experts and declared non-experts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleSets {
    pub declared_experts: BTreeSet<Pair>,
    pub declared_non_experts: BTreeSet<Pair>,
}

impl OracleSets {
    pub fn new(declared_experts: BTreeSet<Pair>, declared_non_experts: BTreeSet<Pair>) -> Result<Self, ExpertiseError> {
        if let Some((developer, file)) = declared_experts.intersection(&declared_non_experts).next() {
            return Err(ExpertiseError::ConflictingLabels { developer: developer.clone(), file: file.clone() });
        }
        Ok(Self { declared_experts, declared_non_experts })
    }

    /// Build from (pair, is_expert) labels.
    pub fn from_labels(labels: impl IntoIterator<Item = (Pair, bool)>) -> Result<Self, ExpertiseError> {
        let (mut experts, mut non_experts) = (BTreeSet::new(), BTreeSet::new());
        for (pair, expert) in labels {
            if expert {
                experts.insert(pair);
            } else {
                non_experts.insert(pair);
            }
        }
        Self::new(experts, non_experts)
    }

    pub fn len(&self) -> usize {
        self.declared_experts.len() + self.declared_non_experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, pair: &Pair) -> Option<bool> {
        if self.declared_experts.contains(pair) {
            Some(true)
        } else if self.declared_non_experts.contains(pair) {
            Some(false)
        } else {
            None
        }
    }

    /// All labeled pairs in sorted order with their labels.
    pub fn labeled(&self) -> Vec<(&Pair, bool)> {
        let mut all: Vec<(&Pair, bool)> =
            self.declared_experts.iter().map(|p| (p, true)).chain(self.declared_non_experts.iter().map(|p| (p, false))).collect();
        all.sort();
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint<T> {
    pub k: T,
    pub precision: T,
    pub recall: T,
    pub f_measure: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve<T> {
    pub technique: Option<Technique>,
    pub points: Vec<ThresholdPoint<T>>,
    pub best_k: T,
}

impl<T: Scalar> ThresholdCurve<T> {
    pub fn best(&self) -> &ThresholdPoint<T> {
        self.points.iter().find(|p| p.k == self.best_k).expect("best_k is a grid point")
    }
}

/// Degree of authorship from first authorship, own commits and others' commits.
pub fn doa<T: Scalar>(fa: bool, dl: T, ac: T) -> Result<T, ExpertiseError> {
    for v in [dl, ac] {
        if v < T::zero() || v.is_nan() {
            return Err(ExpertiseError::NegativeInput(v.to_f64_lossy()));
        }
    }
    let fa = if fa { T::one() } else { T::zero() };
    Ok(T::of(DOA_INTERCEPT) + T::of(DOA_FA_WEIGHT) * fa + T::of(DOA_DL_WEIGHT) * dl - T::of(DOA_AC_WEIGHT) * ac.ln_1p())
}

/// Raw and per-file normalized scores of one technique for every pair in the table.
pub fn technique_scores<T: Scalar>(table: &FeatureTable, technique: Technique) -> Vec<ExpertiseScore<T>> {
    let mut commits_per_file: BTreeMap<&str, u64> = BTreeMap::new();
    for row in &table.rows {
        *commits_per_file.entry(row.file.as_str()).or_default() += row.features.num_commits;
    }
    let mut scores: Vec<ExpertiseScore<T>> = table
        .rows
        .iter()
        .map(|row| {
            let f = &row.features;
            let raw = match technique {
                Technique::Doa => {
                    let others = commits_per_file[row.file.as_str()] - f.num_commits;
                    doa(f.fa == 1, T::of(f.num_commits as f64), T::of(others as f64)).expect("counts are non-negative")
                }
                Technique::Blame => T::of(f.blame as f64),
                Technique::NumCommits => T::of(f.num_commits as f64),
            };
            ExpertiseScore { developer: row.developer.clone(), file: row.file.clone(), technique, raw, normalized: T::zero() }
        })
        .collect();
    normalize(&mut scores);
    scores
}

/// Divide each raw score by the largest raw score on its file.
pub fn normalize<T: Scalar>(scores: &mut [ExpertiseScore<T>]) {
    let mut max: BTreeMap<String, T> = BTreeMap::new();
    for s in scores.iter() {
        let entry = max.entry(s.file.clone()).or_insert(s.raw);
        if s.raw > *entry {
            *entry = s.raw;
        }
    }
    for s in scores.iter_mut() {
        let m = max[&s.file];
        s.normalized = if m > T::zero() { (s.raw / m).max(T::zero()).min(T::one()) } else { T::zero() };
    }
}

fn check_threshold<T: Scalar>(k: T) -> Result<(), ExpertiseError> {
    if k >= T::zero() && k <= T::one() {
        Ok(())
    } else {
        Err(ExpertiseError::InvalidThreshold(k.to_f64_lossy()))
    }
}

/// Rounding slack, in units of `k`, for a normalized score sitting on a grid point.
fn slack<T: Scalar>() -> T {
    T::epsilon() * T::of(4.0)
}

fn is_expert<T: Scalar>(normalized: T, k: T) -> bool {
    if k == T::zero() {
        normalized > T::zero()
    } else {
        normalized >= k - k * slack::<T>()
    }
}

/// Pairs predicted expert at threshold `k`.
pub fn classify<T: Scalar>(scores: &[ExpertiseScore<T>], k: T) -> Result<BTreeSet<Pair>, ExpertiseError> {
    check_threshold(k)?;
    Ok(scores.iter().filter(|s| is_expert(s.normalized, k)).map(|s| (s.developer.clone(), s.file.clone())).collect())
}

/// Precision over predicted labeled pairs, recall over declared experts.
pub fn evaluate<T: Scalar>(predicted: &BTreeSet<Pair>, oracle: &OracleSets) -> Result<Metrics<T>, ExpertiseError> {
    if oracle.is_empty() {
        return Err(ExpertiseError::EmptyOracle);
    }
    let true_positives = predicted.intersection(&oracle.declared_experts).count();
    let false_positives = predicted.intersection(&oracle.declared_non_experts).count();
    Ok(Metrics::from_counts(true_positives, true_positives + false_positives, oracle.declared_experts.len()))
}

fn check_scored<T>(scores: &[ExpertiseScore<T>], oracle: &OracleSets) -> Result<(), ExpertiseError> {
    let scored: BTreeSet<(&str, &str)> = scores.iter().map(|s| (s.developer.as_str(), s.file.as_str())).collect();
    for (developer, file) in oracle.declared_experts.iter().chain(&oracle.declared_non_experts) {
        if !scored.contains(&(developer.as_str(), file.as_str())) {
            return Err(ExpertiseError::UnscoredOraclePair { developer: developer.clone(), file: file.clone() });
        }
    }
    Ok(())
}

/// Classify at `k` and evaluate, checking that every oracle pair is scored.
pub fn evaluate_scores<T: Scalar>(scores: &[ExpertiseScore<T>], oracle: &OracleSets, k: T) -> Result<Metrics<T>, ExpertiseError> {
    check_scored(scores, oracle)?;
    evaluate(&classify(scores, k)?, oracle)
}

/// Sweep the eleven-point threshold grid with stratified k-fold evaluation
/// and pick the threshold with the best mean F-measure.
pub fn calibrate<T: Scalar>(
    scores: &[ExpertiseScore<T>],
    oracle: &OracleSets,
    folds: usize,
    seed: u64,
) -> Result<ThresholdCurve<T>, ExpertiseError> {
    if oracle.is_empty() {
        return Err(ExpertiseError::EmptyOracle);
    }
    check_scored(scores, oracle)?;
    let labeled = oracle.labeled();
    if folds == 0 || labeled.len() < folds {
        return Err(ExpertiseError::TooFewSamples { samples: labeled.len(), folds });
    }
    let labels: Vec<bool> = labeled.iter().map(|(_, l)| *l).collect();
    let assignment = stratified_folds(&labels, folds, seed);
    let normalized: BTreeMap<(&str, &str), T> = scores.iter().map(|s| ((s.developer.as_str(), s.file.as_str()), s.normalized)).collect();
    let values: Vec<T> = labeled.iter().map(|((d, f), _)| normalized[&(d.as_str(), f.as_str())]).collect();

    let points: Vec<ThresholdPoint<T>> = T::threshold_grid()
        .into_par_iter()
        .map(|k| {
            let per_fold: Vec<Metrics<T>> = (0..folds)
                .map(|fold| {
                    let (mut tp, mut predicted, mut actual) = (0, 0, 0);
                    for i in (0..labels.len()).filter(|&i| assignment[i] == fold) {
                        let p = is_expert(values[i], k);
                        tp += usize::from(p && labels[i]);
                        predicted += usize::from(p);
                        actual += usize::from(labels[i]);
                    }
                    Metrics::from_counts(tp, predicted, actual)
                })
                .collect();
            let m = Metrics::mean(&per_fold);
            ThresholdPoint { k, precision: m.precision, recall: m.recall, f_measure: m.f_measure }
        })
        .collect();
    let best = points.iter().fold(points[0], |best, p| if p.f_measure > best.f_measure { *p } else { best });
    let technique = scores.first().map(|s| s.technique);
    Ok(ThresholdCurve { technique, best_k: best.k, points })
}
