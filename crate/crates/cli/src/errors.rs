//! Machine-readable error reports on stderr.

use std::error::Error as StdError;
use std::fmt::Debug;

use file_experts::analytics::AnalyticsError;
use file_experts::blame::BlameError;
use file_experts::diff::DiffError;
use file_experts::expertise::ExpertiseError;
use file_experts::features::FeatureError;
use file_experts::history::HistoryError;
use file_experts::lang::LanguageError;
use file_experts::ml::MLError;
use file_experts::study::StudyError;
use serde::Serialize;
use thiserror::Error;

/// Failures of the command-line layer itself.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
    #[error("at least 2 folds are needed, got {0}")]
    TooFewFolds(usize),
    #[error("no repository given; pass --repo")]
    NoRepository,
    #[error("two repositories share the name `{0}`")]
    DuplicateRepositoryName(String),
    #[error("reference time {reference} precedes the last commit of `{repo}` ({last})")]
    ReferenceTimeTooEarly { repo: String, reference: i64, last: i64 },
    #[error("no features match the selection")]
    NoMatchingPairs,
    #[error("file `{0}` has no developers")]
    UnknownFile(String),
    #[error("invalid alias map: {0}")]
    InvalidAliasMap(String),
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    code: String,
    message: String,
    causes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    module: Option<&'a str>,
}

fn variant<E: Debug>(e: &E) -> String {
    let debug = format!("{e:?}");
    let name: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(c.to_ascii_lowercase());
    }
    out
}

fn classify(e: &(dyn StdError + 'static)) -> Option<(&'static str, String)> {
    macro_rules! try_module {
        ($($ty:ty => $module:literal),+ $(,)?) => {
            $(if let Some(inner) = e.downcast_ref::<$ty>() {
                return Some(($module, variant(inner)));
            })+
        };
    }
    try_module!(
        HistoryError => "history-miner",
        FeatureError => "feature-extractor",
        BlameError => "diff-engine",
        DiffError => "diff-engine",
        LanguageError => "feature-extractor",
        ExpertiseError => "expertise-models",
        MLError => "ml-suite",
        AnalyticsError => "analytics",
        StudyError => "study-toolkit",
        CliError => "cli",
    );
    if e.downcast_ref::<std::io::Error>().is_some() {
        return Some(("cli", "io".into()));
    }
    if e.downcast_ref::<csv::Error>().is_some() {
        return Some(("cli", "csv".into()));
    }
    if e.downcast_ref::<serde_json::Error>().is_some() {
        return Some(("cli", "json".into()));
    }
    None
}

/// One-line JSON description of `err`, its code taken from the outermost
/// library error in the chain.
pub fn render(err: &anyhow::Error) -> String {
    let found = err.chain().find_map(classify);
    let (module, code) = match &found {
        Some((module, variant)) => (Some(*module), format!("{module}/{variant}")),
        None => (None, "cli/internal".to_string()),
    };
    let report = Report { code, message: err.to_string(), causes: err.chain().skip(1).map(ToString::to_string).collect(), module };
    serde_json::to_string(&serde_json::json!({ "error": report })).expect("report serializes")
}
