//! File lineages and line authorship replay.
//!
//! A lineage is one file followed through renames. Every commit touching it
//! is replayed against the lineage's current content: lines kept by the LCS
//! alignment keep their author, every other line of the new version belongs
//! to the committer.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{align, classify_changes, hunks_from_ops, split_lines, ChangeStats, DiffError, LineOp};
use crate::history::{ChangeKind, CommitHistory};
use crate::lang::LanguageTable;

#[derive(Debug, Error, PartialEq)]
pub enum BlameError {
    #[error("file not present at the reference version: {0}")]
    FileNotInHistory(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlameLine {
    pub text: String,
    /// Developer key (the commit author's e-mail; canonical after alias resolution).
    pub author: String,
}

/// Per-line authorship of one file at one version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlameState {
    pub lines: Vec<BlameLine>,
}

impl BlameState {
    pub fn loc(&self) -> usize {
        self.lines.len()
    }

    /// Surviving line count per developer.
    pub fn counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for line in &self.lines {
            *counts.entry(line.author.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn count_for(&self, developer: &str) -> usize {
        self.lines.iter().filter(|l| l.author == developer).count()
    }

    /// Move to the next version; unmatched lines of `after` go to `author`.
    pub fn advance(&mut self, after: &[&str], author: &str) -> Vec<LineOp> {
        let before: Vec<&str> = self.lines.iter().map(|l| l.text.as_str()).collect();
        let ops = align(&before, after);
        let mut next: Vec<Option<BlameLine>> = vec![None; after.len()];
        let mut old: Vec<Option<BlameLine>> = std::mem::take(&mut self.lines).into_iter().map(Some).collect();
        for op in &ops {
            if let LineOp::Keep(i, j) = *op {
                next[j] = old[i].take();
            }
        }
        self.lines = next
            .into_iter()
            .zip(after)
            .map(|(kept, text)| kept.unwrap_or_else(|| BlameLine { text: (*text).to_string(), author: author.to_string() }))
            .collect();
        ops
    }
}

/// One commit's effect on a lineage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageEvent {
    /// Position of the commit in the history.
    pub commit: usize,
    pub author: String,
    pub timestamp: i64,
    pub kind: ChangeKind,
    pub path: String,
    pub stats: ChangeStats,
}

/// A file followed through its renames, replayed to its latest version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lineage {
    /// Path at the reference version, `None` if the file was deleted.
    pub final_path: Option<String>,
    /// Every path the file had, oldest first.
    pub paths: Vec<String>,
    pub events: Vec<LineageEvent>,
    pub blame: BlameState,
}

impl Lineage {
    /// Developer who added the lineage head.
    pub fn creator(&self) -> Option<&str> {
        self.events.first().map(|e| e.author.as_str())
    }
}

struct PendingLineage {
    paths: Vec<String>,
    alive: bool,
    /// (commit index, event index within commit)
    touches: Vec<(usize, usize)>,
}

/// Group change events into lineages without replaying contents.
fn trace(history: &CommitHistory) -> Vec<PendingLineage> {
    let mut lineages: Vec<PendingLineage> = Vec::new();
    let mut alive: HashMap<String, usize> = HashMap::new();
    for (ci, commit) in history.commits.iter().enumerate() {
        let mut removals = Vec::new();
        let mut insertions = Vec::new();
        for (ei, event) in commit.changes.iter().enumerate() {
            let existing = match event.change_kind {
                // An addition always starts a lineage; its path may be a rename source in this commit.
                ChangeKind::Addition => None,
                ChangeKind::Modification | ChangeKind::Deletion => alive.get(&event.path).copied(),
                ChangeKind::Rename => event.old_path.as_ref().and_then(|old| alive.get(old).copied()),
            };
            if existing.is_none() && event.change_kind == ChangeKind::Deletion {
                continue;
            }
            let id = existing.unwrap_or_else(|| {
                lineages.push(PendingLineage { paths: Vec::new(), alive: true, touches: Vec::new() });
                lineages.len() - 1
            });
            let lineage = &mut lineages[id];
            lineage.touches.push((ci, ei));
            match event.change_kind {
                ChangeKind::Deletion => {
                    removals.push(event.path.clone());
                    lineage.alive = false;
                }
                ChangeKind::Rename => {
                    if let Some(old) = event.old_path.as_ref().filter(|_| existing.is_some()) {
                        removals.push(old.clone());
                    }
                    insertions.push((event.path.clone(), id));
                }
                _ => insertions.push((event.path.clone(), id)),
            }
            if lineage.paths.last() != Some(&event.path) && event.change_kind != ChangeKind::Deletion {
                lineage.paths.push(event.path.clone());
            }
        }
        for path in removals {
            alive.remove(&path);
        }
        for (path, id) in insertions {
            if let Some(previous) = alive.insert(path, id) {
                if previous != id {
                    lineages[previous].alive = false;
                }
            }
        }
    }
    lineages
}

fn replay(history: &CommitHistory, pending: &PendingLineage, languages: &LanguageTable, mod_threshold: f64) -> Result<Lineage, BlameError> {
    let mut blame = BlameState::default();
    let mut events = Vec::with_capacity(pending.touches.len());
    for &(ci, ei) in &pending.touches {
        let commit = &history.commits[ci];
        let event = &commit.changes[ei];
        let stats = match (&event.change_kind, &event.after_content) {
            (ChangeKind::Deletion, _) | (_, None) => {
                let removed = blame.loc() as u64;
                blame = BlameState::default();
                ChangeStats { dels: removed, ..ChangeStats::default() }
            }
            (_, Some(after)) => {
                let after_lines = split_lines(after);
                let before: Vec<String> = blame.lines.iter().map(|l| l.text.clone()).collect();
                let ops = blame.advance(&after_lines, &commit.author.email);
                let hunks = hunks_from_ops(&ops, &before, &after_lines);
                classify_changes(&hunks, mod_threshold, languages.language_of(&event.path))?
            }
        };
        events.push(LineageEvent {
            commit: ci,
            author: commit.author.email.clone(),
            timestamp: commit.timestamp,
            kind: event.change_kind,
            path: event.path.clone(),
            stats,
        });
    }
    Ok(Lineage { final_path: pending.alive.then(|| pending.paths.last().cloned()).flatten(), paths: pending.paths.clone(), events, blame })
}

/// Every lineage of the history, replayed. Lineages are independent and
/// replayed in parallel; output order follows first appearance.
pub fn lineages(history: &CommitHistory, languages: &LanguageTable, mod_threshold: f64) -> Result<Vec<Lineage>, BlameError> {
    trace(history).par_iter().map(|p| replay(history, p, languages, mod_threshold)).collect()
}

/// The lineage whose path at the reference version is `file`.
pub fn lineage_of(history: &CommitHistory, file: &str, languages: &LanguageTable, mod_threshold: f64) -> Result<Lineage, BlameError> {
    let pending = trace(history)
        .into_iter()
        .find(|p| p.alive && p.paths.last().map(String::as_str) == Some(file))
        .ok_or_else(|| BlameError::FileNotInHistory(file.to_string()))?;
    replay(history, &pending, languages, mod_threshold)
}

/// Authors of every file present at the reference version, following renames.
pub fn file_developers(history: &CommitHistory) -> BTreeMap<String, BTreeSet<String>> {
    trace(history)
        .into_iter()
        .filter(|p| p.alive)
        .filter_map(|p| {
            let path = p.paths.last()?.clone();
            let authors = p.touches.iter().map(|&(ci, _)| history.commits[ci].author.email.clone()).collect();
            Some((path, authors))
        })
        .collect()
}

/// Line authorship of `file` at the reference version.
pub fn replay_blame(history: &CommitHistory, file: &str) -> Result<BlameState, BlameError> {
    // Authorship does not depend on the modification threshold or language.
    let pending = trace(history)
        .into_iter()
        .find(|p| p.alive && p.paths.last().map(String::as_str) == Some(file))
        .ok_or_else(|| BlameError::FileNotInHistory(file.to_string()))?;
    let mut blame = BlameState::default();
    for &(ci, ei) in &pending.touches {
        let commit = &history.commits[ci];
        match &commit.changes[ei].after_content {
            Some(after) => {
                blame.advance(&split_lines(after), &commit.author.email);
            }
            None => blame = BlameState::default(),
        }
    }
    Ok(blame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{CommitRecord, FileChangeEvent, RawIdentity};

    fn commit(id: &str, who: &str, ts: i64, changes: Vec<FileChangeEvent>) -> CommitRecord {
        CommitRecord { id: id.into(), author: RawIdentity::new(who, format!("{who}@x.com")), timestamp: ts, changes }
    }

    fn ten_lines() -> String {
        (1..=10).map(|i| format!("line number {i};\n")).collect()
    }

    #[test]
    fn single_author_owns_every_line() {
        let h = CommitHistory::new("main", vec![commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.c", ten_lines())])]);
        let blame = replay_blame(&h, "a.c").unwrap();
        assert_eq!(blame.loc(), 10);
        assert_eq!(blame.count_for("d1@x.com"), 10);
    }

    #[test]
    fn modification_transfers_one_line() {
        let v1 = ten_lines();
        let v2 = v1.replace("line number 3;", "line number 33;");
        let h = CommitHistory::new(
            "main",
            vec![
                commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.c", v1.clone())]),
                commit("c2", "d2", 10, vec![FileChangeEvent::modification("a.c", v1, v2)]),
            ],
        );
        let blame = replay_blame(&h, "a.c").unwrap();
        assert_eq!(blame.count_for("d1@x.com"), 9);
        assert_eq!(blame.count_for("d2@x.com"), 1);
        assert_eq!(blame.lines[2].author, "d2@x.com");
    }

    #[test]
    fn deleted_file_is_not_in_history() {
        let h = CommitHistory::new(
            "main",
            vec![
                commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.c", "x\n")]),
                commit("c2", "d1", 1, vec![FileChangeEvent::deletion("a.c", "x\n")]),
            ],
        );
        assert_eq!(replay_blame(&h, "a.c"), Err(BlameError::FileNotInHistory("a.c".into())));
    }

    #[test]
    fn renames_preserve_lineage() {
        let h = CommitHistory::new(
            "main",
            vec![
                commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.c", "x\ny\n")]),
                commit(
                    "c2",
                    "d2",
                    1,
                    vec![FileChangeEvent::rename("a.c", "b.c", "x\ny\n", "x\ny\n"), FileChangeEvent::addition("a.c", "new\n")],
                ),
                commit("c3", "d2", 2, vec![FileChangeEvent::modification("b.c", "x\ny\n", "x\ny\nz\n")]),
            ],
        );
        let all = lineages(&h, &LanguageTable::default(), 0.4).unwrap();
        assert_eq!(all.len(), 2);
        let b = all.iter().find(|l| l.final_path.as_deref() == Some("b.c")).unwrap();
        assert_eq!(b.paths, ["a.c", "b.c"]);
        assert_eq!(b.events.len(), 3);
        assert_eq!(b.creator(), Some("d1@x.com"));
        assert_eq!(b.blame.count_for("d1@x.com"), 2);
        assert_eq!(b.blame.count_for("d2@x.com"), 1);
        let a = all.iter().find(|l| l.final_path.as_deref() == Some("a.c")).unwrap();
        assert_eq!(a.creator(), Some("d2@x.com"));
        let total: usize = b.events.iter().map(|e| e.stats.adds as usize).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn readded_path_starts_a_new_lineage() {
        let h = CommitHistory::new(
            "main",
            vec![
                commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.c", "x\n")]),
                commit("c2", "d1", 1, vec![FileChangeEvent::deletion("a.c", "x\n")]),
                commit("c3", "d2", 2, vec![FileChangeEvent::addition("a.c", "y\n")]),
            ],
        );
        let all = lineages(&h, &LanguageTable::default(), 0.4).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].final_path, None);
        assert_eq!(all[1].creator(), Some("d2@x.com"));
    }

    #[test]
    fn stats_follow_the_classifier() {
        let h = CommitHistory::new(
            "main",
            vec![
                commit("c1", "d1", 0, vec![FileChangeEvent::addition("a.py", "if a:\n    pass\n")]),
                commit("c2", "d2", 1, vec![FileChangeEvent::modification("a.py", "", "if b:\n    pass\nelif c:\n    x = 1\n")]),
            ],
        );
        let l = lineage_of(&h, "a.py", &LanguageTable::default(), 0.4).unwrap();
        assert_eq!(l.events[0].stats, ChangeStats { adds: 2, dels: 0, mods: 0, conds: 1 });
        // "if a:" -> "if b:" is a modification; "elif c:" and "x = 1" are additions
        assert_eq!(l.events[1].stats, ChangeStats { adds: 2, dels: 0, mods: 1, conds: 1 });
    }
}
