//! Stratified k-fold cross-validation and exhaustive grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifierKind, ClassifierSpec, Distance, Learner, MLDataset, MLError, Scaler};
use crate::evaluation::{stratified_folds, Metrics};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport<T> {
    pub spec: ClassifierSpec,
    pub per_fold: Vec<Metrics<T>>,
    pub mean_precision: T,
    pub mean_recall: T,
    pub mean_f: T,
}

/// Per-fold metrics for any [`Learner`]. Each fold standardizes on its
/// training split, fits with `seed`, and scores the held-out split.
pub fn cross_validate_with<T: Scalar>(
    learner: &dyn Learner<T>,
    dataset: &MLDataset<T>,
    folds: usize,
    seed: u64,
) -> Result<Vec<Metrics<T>>, MLError> {
    if folds < 2 || dataset.len() < folds {
        return Err(MLError::TooFewSamples { samples: dataset.len(), folds });
    }
    if !dataset.has_both_classes() {
        return Err(MLError::SingleClassData);
    }
    let assignment = stratified_folds(&dataset.labels(), folds, seed);
    (0..folds)
        .into_par_iter()
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| assignment[i] == fold);
            let train = dataset.subset(&train);
            let (scaler, _) = Scaler::fit(&train)?;
            let model = learner.fit(&scaler.transform_dataset(&train), seed)?;
            let (mut tp, mut predicted, mut actual) = (0, 0, 0);
            for &i in &test {
                let row = &dataset.rows[i];
                let p = model.predict(&scaler.transform(&row.features));
                tp += usize::from(p && row.label);
                predicted += usize::from(p);
                actual += usize::from(row.label);
            }
            Ok(Metrics::from_counts(tp, predicted, actual))
        })
        .collect()
}

pub fn cross_validate<T: Scalar>(spec: &ClassifierSpec, dataset: &MLDataset<T>, folds: usize, seed: u64) -> Result<CVReport<T>, MLError> {
    spec.validate()?;
    let per_fold = cross_validate_with(spec, dataset, folds, seed)?;
    let mean = Metrics::mean(&per_fold);
    Ok(CVReport { spec: spec.clone(), per_fold, mean_precision: mean.precision, mean_recall: mean.recall, mean_f: mean.f_measure })
}

/// Cross-validate every spec and return the one with the highest mean F
/// (earliest in `grid` on ties).
pub fn grid_search<T: Scalar>(
    grid: &[ClassifierSpec],
    dataset: &MLDataset<T>,
    folds: usize,
    seed: u64,
) -> Result<(ClassifierSpec, CVReport<T>), MLError> {
    if grid.is_empty() {
        return Err(MLError::EmptyGrid);
    }
    let reports: Vec<CVReport<T>> = grid.par_iter().map(|spec| cross_validate(spec, dataset, folds, seed)).collect::<Result<_, _>>()?;
    let best = reports.into_iter().reduce(|best, r| if r.mean_f > best.mean_f { r } else { best }).expect("non-empty grid");
    Ok((best.spec.clone(), best))
}

/// The default hyperparameter grid of a classifier family.
pub fn default_grid(kind: ClassifierKind) -> Vec<ClassifierSpec> {
    match kind {
        ClassifierKind::Knn => [1, 3, 5, 7, 9, 11]
            .into_iter()
            .flat_map(|k| [Distance::Euclidean, Distance::Manhattan].map(|distance| ClassifierSpec::Knn { k, distance }))
            .collect(),
        ClassifierKind::LogisticRegression => {
            [0.001, 0.01, 0.1, 1.0, 10.0].into_iter().map(|l2| ClassifierSpec::LogisticRegression { l2 }).collect()
        }
        ClassifierKind::RandomForest => {
            let mut grid = Vec::new();
            for trees in [50, 100, 200] {
                for max_depth in [Some(4), Some(8), Some(16), None] {
                    for max_features in [2, 4] {
                        grid.push(ClassifierSpec::RandomForest { trees, max_depth, max_features });
                    }
                }
            }
            grid
        }
    }
}
