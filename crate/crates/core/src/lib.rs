//! Identify source-code file experts from version-control history.
//!
//! The pipeline mines a branch's non-merge commits ([`history`]), unifies
//! developer aliases ([`identity`]), replays every file lineage to derive
//! line-level change statistics and authorship ([`diff`], [`blame`],
//! [`features`]), and then scores expertise with linear techniques
//! ([`expertise`]) or trained classifiers ([`ml`]). [`analytics`] and
//! [`study`] hold the supporting statistics and survey tooling.
//!
//! Numeric code is generic over [`num::Scalar`]; the aliases below fix it to `f64`.

pub mod analytics;
pub mod blame;
pub mod diff;
pub mod evaluation;
pub mod expertise;
pub mod features;
pub mod history;
pub mod identity;
pub mod lang;
pub mod ml;
pub mod num;
pub mod study;

pub use expertise::{OracleSets, Technique};
pub use features::{FeatureRow, FeatureTable, FeatureVector};
pub use history::{CommitHistory, CommitRecord, FileChangeEvent, RawIdentity};
pub use identity::{DeveloperId, IdentityMap};
pub use ml::{ClassifierKind, ClassifierSpec};

pub type ExpertiseScore = expertise::ExpertiseScore<f64>;
pub type ThresholdCurve = expertise::ThresholdCurve<f64>;
pub type ThresholdPoint = expertise::ThresholdPoint<f64>;
pub type Metrics = evaluation::Metrics<f64>;
pub type MLDataset = ml::MLDataset<f64>;
pub type MLRow = ml::MLRow<f64>;
pub type CVReport = ml::CVReport<f64>;
pub type CorrelationResult = analytics::CorrelationResult<f64>;
pub type CorrelationMatrix = analytics::CorrelationMatrix<f64>;
pub type ProcessedAnswers = study::ProcessedAnswers<f64>;
