//! Supervised classifiers over (adds, fa, size, num_days) with stratified
//! cross-validation and grid search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::num::Scalar;

mod cv;
mod forest;
mod knn;
mod logistic;
mod scaling;

pub use cv::{cross_validate, cross_validate_with, default_grid, grid_search, CVReport};
pub use forest::{RandomForest, Tree};
pub use knn::Knn;
pub use logistic::{log_loss, log_loss_gradient, LogisticRegression, MAX_ITERATIONS, TOLERANCE};
pub use scaling::{standardize, Scaler, Standardized, ZeroVariance};

/// Columns of a feature vector, in order.
pub const FEATURE_NAMES: [&str; 4] = ["adds", "fa", "size", "num_days"];
/// Index of the binary first-authorship column, which is never scaled.
pub const FA_COLUMN: usize = 1;

pub type Features<T> = [T; 4];

#[derive(Debug, Error, PartialEq)]
pub enum MLError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{samples} rows cannot fill {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("training data holds a single class")]
    SingleClassData,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("row {row} has a non-finite feature")]
    NonFiniteFeature { row: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("unknown classifier `{0}`")]
    UnknownClassifier(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLRow<T> {
    pub features: Features<T>,
    /// True for a declared expert.
    pub label: bool,
    pub developer: String,
    pub file: String,
}

impl<T: Scalar> MLRow<T> {
    pub fn from_feature_vector(developer: &str, file: &str, f: &FeatureVector, label: bool) -> Self {
        Self {
            features: [T::of(f.adds as f64), T::of(f64::from(f.fa)), T::of(f.size as f64), T::of(f.num_days)],
            label,
            developer: developer.to_string(),
            file: file.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MLDataset<T> {
    pub rows: Vec<MLRow<T>>,
}

impl<T: Scalar> MLDataset<T> {
    pub fn new(rows: Vec<MLRow<T>>) -> Result<Self, MLError> {
        if let Some(row) = rows.iter().position(|r| r.features.iter().any(|v| !v.is_finite())) {
            return Err(MLError::NonFiniteFeature { row });
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }
}

/// A fitted classifier.
pub trait Model<T: Scalar>: Send + Sync {
    /// Estimated probability of the expert class, in [0, 1].
    fn predict_score(&self, x: &Features<T>) -> T;

    fn predict(&self, x: &Features<T>) -> bool {
        self.predict_score(x) >= T::of(0.5)
    }
}

/// Something that fits a [`Model`] on a dataset. New classifier families
/// plug into cross-validation by implementing this.
pub trait Learner<T: Scalar>: Sync {
    fn fit(&self, data: &MLDataset<T>, seed: u64) -> Result<Box<dyn Model<T>>, MLError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Euclidean,
    Manhattan,
}

impl Distance {
    pub fn name(self) -> &'static str {
        match self {
            Distance::Euclidean => "euclidean",
            Distance::Manhattan => "manhattan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    LogisticRegression,
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Knn, ClassifierKind::LogisticRegression, ClassifierKind::RandomForest];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = MLError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "logistic_regression" | "logistic" => Ok(ClassifierKind::LogisticRegression),
            "random_forest" | "forest" => Ok(ClassifierKind::RandomForest),
            _ => Err(MLError::UnknownClassifier(s.to_string())),
        }
    }
}

/// A classifier family with concrete hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn { k: usize, distance: Distance },
    LogisticRegression { l2: f64 },
    RandomForest { trees: usize, max_depth: Option<usize>, max_features: usize },
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Knn { .. } => ClassifierKind::Knn,
            ClassifierSpec::LogisticRegression { .. } => ClassifierKind::LogisticRegression,
            ClassifierSpec::RandomForest { .. } => ClassifierKind::RandomForest,
        }
    }

    pub fn hyperparameters(&self) -> BTreeMap<String, String> {
        let entries: Vec<(&str, String)> = match self {
            ClassifierSpec::Knn { k, distance } => {
                vec![("k", k.to_string()), ("distance", distance.name().to_string())]
            }
            ClassifierSpec::LogisticRegression { l2 } => vec![("l2", l2.to_string())],
            ClassifierSpec::RandomForest { trees, max_depth, max_features } => vec![
                ("trees", trees.to_string()),
                ("max_depth", max_depth.map_or_else(|| "none".to_string(), |d| d.to_string())),
                ("max_features", max_features.to_string()),
            ],
        };
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// `name=value` pairs joined by `;`, in key order.
    pub fn hyperparameter_string(&self) -> String {
        self.hyperparameters().iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }

    pub fn validate(&self) -> Result<(), MLError> {
        let bad = |what: &str| Err(MLError::InvalidHyperparameter(what.to_string()));
        match *self {
            ClassifierSpec::Knn { k: 0, .. } => bad("knn k must be at least 1"),
            ClassifierSpec::LogisticRegression { l2 } if !(l2.is_finite() && l2 >= 0.0) => bad("l2 must be finite and non-negative"),
            ClassifierSpec::RandomForest { trees: 0, .. } => bad("random forest needs at least one tree"),
            ClassifierSpec::RandomForest { max_features, .. } if !(1..=FEATURE_NAMES.len()).contains(&max_features) => {
                bad("max_features must be between 1 and 4")
            }
            _ => Ok(()),
        }
    }

    /// Fit on `data`; randomized learners draw from `seed`.
    pub fn train<T: Scalar>(&self, data: &MLDataset<T>, seed: u64) -> Result<Box<dyn Model<T>>, MLError> {
        self.fit(data, seed)
    }
}

impl<T: Scalar> Learner<T> for ClassifierSpec {
    fn fit(&self, data: &MLDataset<T>, seed: u64) -> Result<Box<dyn Model<T>>, MLError> {
        self.validate()?;
        if data.is_empty() {
            return Err(MLError::EmptyDataset);
        }
        match *self {
            ClassifierSpec::Knn { k, distance } => Ok(Box::new(Knn::fit(data, k, distance))),
            ClassifierSpec::LogisticRegression { l2 } => Ok(Box::new(LogisticRegression::fit(data, T::of(l2))?)),
            ClassifierSpec::RandomForest { trees, max_depth, max_features } => {
                Ok(Box::new(RandomForest::fit(data, trees, max_depth, max_features, seed)?))
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ClassifierSpec::RandomForest { trees: 50, max_depth: None, max_features: 2 };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"random_forest","trees":50,"max_depth":null,"max_features":2}"#);
        assert_eq!(serde_json::from_str::<ClassifierSpec>(&json).unwrap(), spec);
        assert_eq!(spec.hyperparameter_string(), "max_depth=none;max_features=2;trees=50");
        let knn = ClassifierSpec::Knn { k: 3, distance: Distance::Manhattan };
        assert_eq!(knn.hyperparameter_string(), "distance=manhattan;k=3");
    }

    #[test]
    fn invalid_specs() {
        assert!(ClassifierSpec::Knn { k: 0, distance: Distance::Euclidean }.validate().is_err());
        assert!(ClassifierSpec::LogisticRegression { l2: -1.0 }.validate().is_err());
        assert!(ClassifierSpec::RandomForest { trees: 1, max_depth: None, max_features: 5 }.validate().is_err());
        assert!("svm".parse::<ClassifierKind>().is_err());
        assert_eq!("random-forest".parse::<ClassifierKind>().unwrap(), ClassifierKind::RandomForest);
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let rows = vec![testdata::row([0.0, 0.0, f64::NAN, 0.0], true)];
        assert_eq!(MLDataset::new(rows), Err(MLError::NonFiniteFeature { row: 0 }));
    }
}
