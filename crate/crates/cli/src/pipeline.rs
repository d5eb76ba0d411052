//! Mining, identity resolution and feature extraction, with an on-disk
//! cache keyed by branch tip and settings.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use file_experts::features::{compute_all, FeatureConfig};
use file_experts::history::{branch_tip, default_branch, extract_history, filter_source_files, read_ndjson, write_ndjson, SCHEMA_VERSION};
use file_experts::identity::{canonicalize_history, AliasConfig};
use file_experts::lang::LanguageTable;
use file_experts::{CommitHistory, FeatureTable, IdentityMap};
use log::{debug, info};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::CliError;
use crate::output::write_atomic;

/// Everything that changes mined output besides the repository itself.
#[derive(Debug, Clone)]
pub struct MiningSettings {
    pub branch: String,
    pub aliases: AliasConfig,
    pub mod_threshold: f64,
    pub languages: LanguageTable,
    /// Raw text of the language table, if one was given; part of the cache key.
    pub languages_source: Option<String>,
    pub reference_time: Option<i64>,
    pub cache_dir: Option<PathBuf>,
}

/// One mined repository.
#[derive(Debug, Clone)]
pub struct Mined {
    pub name: String,
    pub history: CommitHistory,
    pub identities: IdentityMap,
    pub table: FeatureTable,
}

#[derive(Serialize)]
struct CacheKey<'a> {
    tool: &'static str,
    schema: u32,
    tip: &'a str,
    branch: &'a str,
    alias_threshold: f64,
    manual_aliases: &'a [(String, String)],
    mod_threshold: f64,
    languages: Option<&'a str>,
    reference_time: Option<i64>,
}

fn cache_key(tip: &str, branch: &str, settings: &MiningSettings) -> String {
    let key = CacheKey {
        tool: env!("CARGO_PKG_VERSION"),
        schema: SCHEMA_VERSION,
        tip,
        branch,
        alias_threshold: settings.aliases.threshold,
        manual_aliases: &settings.aliases.manual_aliases,
        mod_threshold: settings.mod_threshold,
        languages: settings.languages_source.as_deref(),
        reference_time: settings.reference_time,
    };
    let digest = Sha256::digest(serde_json::to_vec(&key).expect("key serializes"));
    hex::encode(digest)
}

/// Directory name of a repository path, used to qualify its files.
pub fn repo_name(path: &Path) -> Result<String> {
    let absolute = path.canonicalize().with_context(|| format!("resolving {}", path.display()))?;
    Ok(absolute.file_name().map_or_else(|| "repo".to_string(), |n| n.to_string_lossy().into_owned()))
}

fn load_cached(history_path: &Path, features_path: &Path) -> Result<(CommitHistory, FeatureTable)> {
    let history = read_ndjson(BufReader::new(File::open(history_path)?))?;
    let table = FeatureTable::read_csv(BufReader::new(File::open(features_path)?), history.reference_time)?;
    Ok((history, table))
}

fn mine_fresh(repo: &Path, branch: &str, name: &str, settings: &MiningSettings) -> Result<(CommitHistory, FeatureTable)> {
    let raw = extract_history(repo, branch).with_context(|| format!("mining {}", repo.display()))?;
    let filtered = filter_source_files(&raw, &settings.languages);
    let (mut history, _) = canonicalize_history(&filtered, &settings.aliases);
    if let Some(reference) = settings.reference_time {
        let last = history.commits.iter().map(|c| c.timestamp).max().unwrap_or(reference);
        if reference < last {
            return Err(CliError::ReferenceTimeTooEarly { repo: name.to_string(), reference, last }.into());
        }
        history.reference_time = reference;
    }
    let config = FeatureConfig { mod_threshold: settings.mod_threshold, languages: settings.languages.clone() };
    let table = compute_all(&history, &config).with_context(|| format!("computing features of {name}"))?;
    Ok((history, table))
}

/// Mine one repository, reusing a cached result for the same tip and settings.
pub fn mine(repo: &Path, settings: &MiningSettings) -> Result<Mined> {
    let name = repo_name(repo)?;
    let branch = default_branch(repo, &settings.branch).with_context(|| format!("opening {}", repo.display()))?;
    let tip = branch_tip(repo, &branch)?;
    let cached = settings.cache_dir.as_ref().map(|dir| {
        let key = cache_key(&tip, &branch, settings);
        (dir.join(format!("{key}.ndjson")), dir.join(format!("{key}.features.csv")))
    });
    if let Some((history_path, features_path)) = &cached {
        if history_path.is_file() && features_path.is_file() {
            match load_cached(history_path, features_path) {
                Ok((history, table)) => {
                    debug!("{name}: cache hit at {tip}");
                    let identities = IdentityMap::from_developers(history.developers.clone());
                    return Ok(Mined { name, history, identities, table });
                }
                Err(e) => log::warn!("{name}: ignoring unreadable cache entry: {e:#}"),
            }
        }
    }
    info!("{name}: mining {branch} at {tip}");
    let (history, table) = mine_fresh(repo, &branch, &name, settings)?;
    if let Some((history_path, features_path)) = &cached {
        write_atomic(history_path, |w| Ok(write_ndjson(&history, w)?))?;
        write_atomic(features_path, |w| Ok(table.write_csv(w)?))?;
    }
    let identities = IdentityMap::from_developers(history.developers.clone());
    Ok(Mined { name, history, identities, table })
}

pub fn mine_all(repos: &[PathBuf], settings: &MiningSettings) -> Result<Vec<Mined>> {
    if repos.is_empty() {
        return Err(CliError::NoRepository.into());
    }
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for repo in repos {
        let mined = mine(repo, settings)?;
        if !names.insert(mined.name.clone()) {
            return Err(CliError::DuplicateRepositoryName(mined.name).into());
        }
        out.push(mined);
    }
    Ok(out)
}

/// A single table over all repositories. Files are qualified with their
/// repository name when there is more than one repository, or when `qualify` is set.
pub fn combined_table(mined: &[Mined], qualify: bool) -> FeatureTable {
    match mined {
        [one] if !qualify => one.table.clone(),
        _ => FeatureTable::merge_qualified(mined.iter().map(|m| (m.name.as_str(), &m.table))),
    }
}
