//! Corpus filtering, bulk-import detection, survey sampling and
//! ground-truth ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blame::file_developers;
use crate::expertise::{ExpertiseError, OracleSets, Pair};
use crate::features::{qualify, FeatureTable};
use crate::history::{ChangeKind, CommitHistory};
use crate::identity::IdentityMap;
use crate::ml::{MLDataset, MLRow};
use crate::num::Scalar;

pub const DEFAULT_FILE_LIMIT: usize = 5;
/// Knowledge strictly above this marks a declared expert.
pub const EXPERT_KNOWLEDGE: u8 = 3;
pub const TUKEY_FENCE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{count} repositories in group `{group}`; at least 4 are needed")]
    TooFewRepos { group: String, count: usize },
    #[error("knowledge value `{value}` for ({developer}, {file}) is not an integer in 1..=5")]
    InvalidKnowledgeValue { developer: String, file: String, value: String },
    #[error("file limit must be at least 1")]
    InvalidFileLimit,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Oracle(#[from] ExpertiseError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Sample quantile by linear interpolation between order statistics
/// (position `(n - 1) * q` in the sorted values). `None` for no values.
pub fn quantile_type7<T: Scalar>(values: &[T], q: T) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let h = T::of_usize(sorted.len() - 1) * q.max(T::zero()).min(T::one());
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0);
    let j = (i + 1).min(sorted.len() - 1);
    Some(sorted[i] + (h - lo) * (sorted[j] - sorted[i]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMetrics {
    pub repo: String,
    pub commits: u64,
    pub files: u64,
    pub developers: u64,
    /// Repositories are filtered within their language when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl RepoMetrics {
    fn values(&self) -> [f64; 3] {
        [self.commits as f64, self.files as f64, self.developers as f64]
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<Self>, StudyError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        Ok(reader.deserialize().collect::<Result<_, _>>()?)
    }
}

/// Repositories not below the first quartile on any metric of their
/// language group.
pub fn quartile_filter(metrics: &[RepoMetrics]) -> Result<BTreeSet<String>, StudyError> {
    let mut groups: BTreeMap<Option<&str>, Vec<&RepoMetrics>> = BTreeMap::new();
    for m in metrics {
        groups.entry(m.language.as_deref()).or_default().push(m);
    }
    let mut kept = BTreeSet::new();
    for (language, group) in groups {
        if group.len() < 4 {
            return Err(StudyError::TooFewRepos { group: language.unwrap_or("all").to_string(), count: group.len() });
        }
        let q1: Vec<f64> = (0..3)
            .map(|c| quantile_type7(&group.iter().map(|m| m.values()[c]).collect::<Vec<_>>(), 0.25).expect("non-empty group"))
            .collect();
        kept.extend(group.iter().filter(|m| m.values().iter().zip(&q1).all(|(v, q)| v >= q)).map(|m| m.repo.clone()));
    }
    Ok(kept)
}

/// First quartile of each metric per language group.
pub fn first_quartiles(metrics: &[RepoMetrics]) -> BTreeMap<Option<String>, [f64; 3]> {
    let mut groups: BTreeMap<Option<String>, Vec<[f64; 3]>> = BTreeMap::new();
    for m in metrics {
        groups.entry(m.language.clone()).or_default().push(m.values());
    }
    groups
        .into_iter()
        .map(|(g, rows)| {
            let q = |c: usize| quantile_type7(&rows.iter().map(|r| r[c]).collect::<Vec<_>>(), 0.25).unwrap_or(0.0);
            (g, [q(0), q(1), q(2)])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkImport {
    pub flag: bool,
    pub outlier_commits: BTreeSet<String>,
    pub files_added_by_outliers: u64,
    pub total_files_added: u64,
    /// Files-added count above which a commit is an outlier.
    pub fence: f64,
}

/// Flag a history whose files were mostly added by a few outlier commits.
/// Outliers are judged among the commits that add at least one file.
pub fn detect_bulk_import(history: &CommitHistory) -> BulkImport {
    let added: Vec<(String, u64)> = history
        .commits
        .iter()
        .map(|c| (c.id.clone(), c.changes.iter().filter(|e| e.change_kind == ChangeKind::Addition).count() as u64))
        .filter(|(_, n)| *n > 0)
        .collect();
    let counts: Vec<f64> = added.iter().map(|(_, n)| *n as f64).collect();
    let (q1, q3) = (quantile_type7(&counts, 0.25).unwrap_or(0.0), quantile_type7(&counts, 0.75).unwrap_or(0.0));
    let fence = q3 + TUKEY_FENCE * (q3 - q1);
    let outliers: Vec<&(String, u64)> = added.iter().filter(|(_, n)| *n as f64 > fence).collect();
    let total: u64 = added.iter().map(|(_, n)| n).sum();
    let by_outliers: u64 = outliers.iter().map(|(_, n)| n).sum();
    BulkImport {
        flag: total > 0 && by_outliers * 2 > total,
        outlier_commits: outliers.into_iter().map(|(id, _)| id.clone()).collect(),
        files_added_by_outliers: by_outliers,
        total_files_added: total,
        fence,
    }
}

/// Survey sample over explicit file→developers sets. Files are visited in a
/// seeded random order; a file is taken only if every one of its developers
/// is still below `file_limit`. Output is sorted by developer, then file.
pub fn sample_files(developers_of: &BTreeMap<String, BTreeSet<String>>, file_limit: usize, seed: u64) -> Result<Vec<Pair>, StudyError> {
    if file_limit == 0 {
        return Err(StudyError::InvalidFileLimit);
    }
    let mut files: Vec<&String> = developers_of.keys().collect();
    files.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assigned: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for file in files {
        let devs = &developers_of[file];
        if devs.is_empty() || devs.iter().any(|d| assigned.get(d.as_str()).map_or(0, Vec::len) >= file_limit) {
            continue;
        }
        for d in devs {
            assigned.entry(d).or_default().push(file);
        }
    }
    let mut pairs: Vec<Pair> =
        assigned.into_iter().flat_map(|(d, fs)| fs.into_iter().map(move |f| (d.to_string(), f.to_string()))).collect();
    pairs.sort();
    Ok(pairs)
}

/// Survey sample over the files present at the reference version of `history`.
pub fn generate_sample(history: &CommitHistory, file_limit: usize, seed: u64) -> Result<Vec<Pair>, StudyError> {
    sample_files(&file_developers(history), file_limit, seed)
}

/// Column names of a ground-truth CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub repo: String,
    pub developer: String,
    pub file: String,
    pub knowledge: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self { repo: "repo".into(), developer: "developer_email".into(), file: "file".into(), knowledge: "knowledge".into() }
    }
}

/// One survey answer as read, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnswer {
    pub repo: String,
    pub developer: String,
    pub file: String,
    pub knowledge: String,
}

pub fn read_answers<R: Read>(input: R, mapping: &ColumnMapping) -> Result<Vec<RawAnswer>, StudyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| StudyError::MissingColumn(name.to_string()));
    let (r, d, f, k) = (column(&mapping.repo)?, column(&mapping.developer)?, column(&mapping.file)?, column(&mapping.knowledge)?);
    let mut answers = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or_default().to_string();
        answers.push(RawAnswer { repo: get(r), developer: get(d), file: get(f), knowledge: get(k) });
    }
    Ok(answers)
}

pub fn write_answers<W: Write>(answers: &[RawAnswer], out: W) -> Result<(), StudyError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["repo", "developer_email", "file", "knowledge"])?;
    for a in answers {
        writer.write_record([&a.repo, &a.developer, &a.file, &a.knowledge])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub repo: String,
    /// Canonical developer key.
    pub developer: String,
    /// `<repo>/<path>` at the reference version.
    pub file: String,
    pub knowledge: u8,
}

impl GroundTruthEntry {
    pub fn is_expert(&self) -> bool {
        self.knowledge > EXPERT_KNOWLEDGE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedPair {
    pub repo: String,
    pub developer: String,
    pub file: String,
    pub reason: String,
}

/// A mined repository that answers can be joined against.
#[derive(Debug, Clone, Copy)]
pub struct TruthSource<'a> {
    pub repo: &'a str,
    pub table: &'a FeatureTable,
    pub identities: &'a IdentityMap,
}

#[derive(Debug, Clone)]
pub struct ProcessedAnswers<T> {
    pub oracle: OracleSets,
    pub entries: Vec<GroundTruthEntry>,
    /// Row `i` belongs to `entries[i]`.
    pub dataset: MLDataset<T>,
    pub unresolved: Vec<UnresolvedPair>,
}

impl<T> ProcessedAnswers<T> {
    pub fn knowledge(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.knowledge).collect()
    }
}

fn parse_knowledge(answer: &RawAnswer) -> Result<u8, StudyError> {
    match answer.knowledge.trim().parse::<u8>() {
        Ok(k @ 1..=5) => Ok(k),
        _ => Err(StudyError::InvalidKnowledgeValue {
            developer: answer.developer.clone(),
            file: answer.file.clone(),
            value: answer.knowledge.clone(),
        }),
    }
}

/// Validate answers, resolve them against mined repositories and split them
/// into declared experts and non-experts. Answers that cannot be joined, and
/// repeated answers for one pair, are reported rather than used.
pub fn process_answers<T: Scalar>(answers: &[RawAnswer], sources: &[TruthSource<'_>]) -> Result<ProcessedAnswers<T>, StudyError> {
    let sources: BTreeMap<&str, &TruthSource<'_>> = sources.iter().map(|s| (s.repo, s)).collect();
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut unresolved = Vec::new();
    for answer in answers {
        let knowledge = parse_knowledge(answer)?;
        let reject = |reason: &str| UnresolvedPair {
            repo: answer.repo.clone(),
            developer: answer.developer.clone(),
            file: answer.file.clone(),
            reason: reason.to_string(),
        };
        let Some(source) = sources.get(answer.repo.as_str()) else {
            unresolved.push(reject("unknown repository"));
            continue;
        };
        let developer = source
            .identities
            .by_email(&answer.developer)
            .map(|d| d.canonical_key.clone())
            .unwrap_or_else(|| answer.developer.trim().to_lowercase());
        let Some(features) = source.table.get(&developer, &answer.file) else {
            unresolved.push(reject("no features for this developer and file"));
            continue;
        };
        let file = qualify(&answer.repo, &answer.file);
        if !seen.insert((developer.clone(), file.clone())) {
            unresolved.push(reject("duplicate answer"));
            continue;
        }
        let entry = GroundTruthEntry { repo: answer.repo.clone(), developer, file, knowledge };
        rows.push(MLRow::from_feature_vector(&entry.developer, &entry.file, features, entry.is_expert()));
        entries.push(entry);
    }
    let oracle = OracleSets::from_labels(entries.iter().map(|e| ((e.developer.clone(), e.file.clone()), e.is_expert())))?;
    let dataset = MLDataset::new(rows).expect("feature vectors are finite");
    Ok(ProcessedAnswers { oracle, entries, dataset, unresolved })
}
