//! The twelve development variables of a (developer, file) pair.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blame::{lineage_of, lineages, BlameError, Lineage};
use crate::diff::{ChangeStats, DEFAULT_MOD_THRESHOLD};
use crate::history::CommitHistory;
use crate::lang::LanguageTable;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Column order of the features CSV.
pub const CSV_HEADER: [&str; 14] = [
    "developer",
    "file",
    "adds",
    "dels",
    "mods",
    "conds",
    "amount",
    "fa",
    "blame",
    "num_commits",
    "num_days",
    "num_mod_devs",
    "size",
    "avg_days_commits",
];

/// Names of the twelve variables, in CSV order.
pub const VARIABLES: [&str; 12] =
    ["adds", "dels", "mods", "conds", "amount", "fa", "blame", "num_commits", "num_days", "num_mod_devs", "size", "avg_days_commits"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("developer `{developer}` has no commits on `{file}`")]
    PairNotInHistory { developer: String, file: String },
    #[error(transparent)]
    Blame(#[from] BlameError),
    #[error("features csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub adds: u64,
    pub dels: u64,
    pub mods: u64,
    pub conds: u64,
    pub amount: u64,
    pub fa: u8,
    pub blame: u64,
    pub num_commits: u64,
    pub num_days: f64,
    pub num_mod_devs: u64,
    pub size: u64,
    pub avg_days_commits: f64,
}

impl FeatureVector {
    /// Values in [`VARIABLES`] order.
    pub fn values(&self) -> [f64; 12] {
        [
            self.adds as f64,
            self.dels as f64,
            self.mods as f64,
            self.conds as f64,
            self.amount as f64,
            f64::from(self.fa),
            self.blame as f64,
            self.num_commits as f64,
            self.num_days,
            self.num_mod_devs as f64,
            self.size as f64,
            self.avg_days_commits,
        ]
    }

    pub fn value(&self, variable: &str) -> Option<f64> {
        VARIABLES.iter().position(|v| *v == variable).map(|i| self.values()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub developer: String,
    pub file: String,
    pub features: FeatureVector,
}

/// CSV shape of a [`FeatureRow`]; the csv crate cannot flatten nested structs.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    developer: String,
    file: String,
    adds: u64,
    dels: u64,
    mods: u64,
    conds: u64,
    amount: u64,
    fa: u8,
    blame: u64,
    num_commits: u64,
    num_days: f64,
    num_mod_devs: u64,
    size: u64,
    avg_days_commits: f64,
}

impl From<&FeatureRow> for CsvRow {
    fn from(r: &FeatureRow) -> Self {
        let f = &r.features;
        Self {
            developer: r.developer.clone(),
            file: r.file.clone(),
            adds: f.adds,
            dels: f.dels,
            mods: f.mods,
            conds: f.conds,
            amount: f.amount,
            fa: f.fa,
            blame: f.blame,
            num_commits: f.num_commits,
            num_days: f.num_days,
            num_mod_devs: f.num_mod_devs,
            size: f.size,
            avg_days_commits: f.avg_days_commits,
        }
    }
}

impl From<CsvRow> for FeatureRow {
    fn from(r: CsvRow) -> Self {
        Self {
            developer: r.developer,
            file: r.file,
            features: FeatureVector {
                adds: r.adds,
                dels: r.dels,
                mods: r.mods,
                conds: r.conds,
                amount: r.amount,
                fa: r.fa,
                blame: r.blame,
                num_commits: r.num_commits,
                num_days: r.num_days,
                num_mod_devs: r.num_mod_devs,
                size: r.size,
                avg_days_commits: r.avg_days_commits,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    /// Sorted by file, then developer.
    pub rows: Vec<FeatureRow>,
    pub reference_time: i64,
}

/// Settings for feature extraction.
#[derive(Debug, Clone)]
pub struct FeatureConfig {
    pub mod_threshold: f64,
    pub languages: LanguageTable,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { mod_threshold: DEFAULT_MOD_THRESHOLD, languages: LanguageTable::default() }
    }
}

fn days_between(later: i64, earlier: i64) -> f64 {
    (later - earlier) as f64 / SECONDS_PER_DAY
}

/// Features of every developer who touched a lineage that exists at the reference version.
fn lineage_features(lineage: &Lineage, reference_time: i64) -> BTreeMap<String, FeatureVector> {
    let size = lineage.blame.loc() as u64;
    let blame = lineage.blame.counts();
    let creator = lineage.creator();
    let mut by_dev: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, event) in lineage.events.iter().enumerate() {
        by_dev.entry(event.author.as_str()).or_default().push(i);
    }
    by_dev
        .iter()
        .map(|(&dev, positions)| {
            let mut stats = ChangeStats::default();
            for &p in positions {
                stats += lineage.events[p].stats;
            }
            let last = *positions.last().expect("non-empty");
            let last_commit = &lineage.events[last];
            let later_devs: BTreeSet<&str> = lineage.events[last + 1..].iter().map(|e| e.author.as_str()).filter(|&a| a != dev).collect();
            let mut times: Vec<i64> = positions.iter().map(|&p| lineage.events[p].timestamp).collect();
            times.sort_unstable();
            let avg_days_commits =
                if times.len() > 1 { days_between(times[times.len() - 1], times[0]) / (times.len() - 1) as f64 } else { 0.0 };
            let features = FeatureVector {
                adds: stats.adds,
                dels: stats.dels,
                mods: stats.mods,
                conds: stats.conds,
                amount: stats.adds + stats.dels,
                fa: u8::from(creator == Some(dev)),
                blame: blame.get(dev).copied().unwrap_or(0) as u64,
                num_commits: positions.len() as u64,
                num_days: days_between(reference_time, last_commit.timestamp).max(0.0).floor(),
                num_mod_devs: later_devs.len() as u64,
                size,
                avg_days_commits,
            };
            (dev.to_string(), features)
        })
        .collect()
}

/// Features of one developer on one file (path at the reference version).
pub fn compute_features(
    history: &CommitHistory,
    developer: &str,
    file: &str,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let not_found = || FeatureError::PairNotInHistory { developer: developer.to_string(), file: file.to_string() };
    let lineage = match lineage_of(history, file, &config.languages, config.mod_threshold) {
        Ok(l) => l,
        Err(BlameError::FileNotInHistory(_)) => return Err(not_found()),
        Err(e) => return Err(e.into()),
    };
    lineage_features(&lineage, history.reference_time).remove(developer).ok_or_else(not_found)
}

/// One row per (developer, file) pair for every file present at the reference version.
pub fn compute_all(history: &CommitHistory, config: &FeatureConfig) -> Result<FeatureTable, FeatureError> {
    let mut rows = Vec::new();
    for lineage in lineages(history, &config.languages, config.mod_threshold)? {
        let Some(file) = lineage.final_path.clone() else { continue };
        for (developer, features) in lineage_features(&lineage, history.reference_time) {
            rows.push(FeatureRow { developer, file: file.clone(), features });
        }
    }
    rows.sort_by(|a, b| a.file.cmp(&b.file).then_with(|| a.developer.cmp(&b.developer)));
    Ok(FeatureTable { rows, reference_time: history.reference_time })
}

impl FeatureTable {
    pub fn get(&self, developer: &str, file: &str) -> Option<&FeatureVector> {
        self.rows
            .binary_search_by(|r| r.file.as_str().cmp(file).then_with(|| r.developer.as_str().cmp(developer)))
            .ok()
            .map(|i| &self.rows[i].features)
    }

    pub fn files(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.file.as_str()).collect()
    }

    pub fn rows_for_file<'a>(&'a self, file: &'a str) -> impl Iterator<Item = &'a FeatureRow> + 'a {
        self.rows.iter().filter(move |r| r.file == file)
    }

    /// Concatenate tables from several repositories, prefixing each file with `<repo>/`.
    pub fn merge_qualified<'a>(tables: impl IntoIterator<Item = (&'a str, &'a FeatureTable)>) -> FeatureTable {
        let mut rows = Vec::new();
        let mut reference_time = i64::MIN;
        for (repo, table) in tables {
            reference_time = reference_time.max(table.reference_time);
            rows.extend(table.rows.iter().map(|r| FeatureRow { file: qualify(repo, &r.file), ..r.clone() }));
        }
        rows.sort_by(|a, b| a.file.cmp(&b.file).then_with(|| a.developer.cmp(&b.developer)));
        FeatureTable { rows, reference_time: if reference_time == i64::MIN { 0 } else { reference_time } }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer.serialize(CsvRow::from(row))?;
        }
        if self.rows.is_empty() {
            writer.write_record(CSV_HEADER)?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, reference_time: i64) -> Result<Self, FeatureError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut rows: Vec<FeatureRow> = reader.deserialize::<CsvRow>().map(|r| r.map(FeatureRow::from)).collect::<Result<_, _>>()?;
        rows.sort_by(|a, b| a.file.cmp(&b.file).then_with(|| a.developer.cmp(&b.developer)));
        Ok(Self { rows, reference_time })
    }
}

/// `<repo>/<path>` key used when several repositories share one table.
pub fn qualify(repo: &str, path: &str) -> String {
    format!("{repo}/{path}")
}
