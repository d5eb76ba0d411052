//! Commit history extraction from a local git repository.
//!
//! Shells out to `git log --no-merges --find-renames` and reads file
//! contents through a single `git cat-file --batch` process.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::DeveloperId;
use crate::lang::LanguageTable;

/// Version tag written on every line of the NDJSON history format.
pub const SCHEMA_VERSION: u32 = 1;

/// Similarity (percent) git uses to pair a deletion and an addition as a rename.
pub const RENAME_SIMILARITY: u8 = 50;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("not a git repository: {0}")]
    RepositoryNotFound(PathBuf),
    #[error("branch not found: {0}")]
    BranchNotFound(String),
    #[error("corrupt history: {0}")]
    CorruptHistory(String),
    #[error("unsupported history schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A `(name, email)` pair as recorded by the VCS.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawIdentity {
    pub name: String,
    pub email: String,
}

impl RawIdentity {
    pub fn new(name: impl Into<String>, email: impl Into<String>) -> Self {
        Self { name: name.into(), email: email.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Addition,
    Modification,
    Rename,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChangeEvent {
    pub path: String,
    pub change_kind: ChangeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before_content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_content: Option<String>,
}

impl FileChangeEvent {
    pub fn addition(path: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            change_kind: ChangeKind::Addition,
            old_path: None,
            before_content: None,
            after_content: Some(content.into()),
        }
    }

    pub fn modification(path: impl Into<String>, before: impl Into<String>, after: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            change_kind: ChangeKind::Modification,
            old_path: None,
            before_content: Some(before.into()),
            after_content: Some(after.into()),
        }
    }

    pub fn rename(old_path: impl Into<String>, path: impl Into<String>, before: impl Into<String>, after: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            change_kind: ChangeKind::Rename,
            old_path: Some(old_path.into()),
            before_content: Some(before.into()),
            after_content: Some(after.into()),
        }
    }

    pub fn deletion(path: impl Into<String>, before: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            change_kind: ChangeKind::Deletion,
            old_path: None,
            before_content: Some(before.into()),
            after_content: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub author: RawIdentity,
    /// Author time, seconds since the Unix epoch (UTC).
    pub timestamp: i64,
    pub changes: Vec<FileChangeEvent>,
}

/// Non-merge commits of one branch, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitHistory {
    pub commits: Vec<CommitRecord>,
    pub branch: String,
    /// Hash of the branch tip the history was extracted at.
    pub tip: String,
    /// Seconds since the Unix epoch; never earlier than any commit.
    pub reference_time: i64,
    pub rename_similarity: u8,
    /// Canonical developers, filled in once aliases are resolved.
    pub developers: Vec<DeveloperId>,
}

impl CommitHistory {
    pub fn new(branch: impl Into<String>, commits: Vec<CommitRecord>) -> Self {
        let reference_time = commits.iter().map(|c| c.timestamp).max().unwrap_or(0);
        Self {
            commits,
            branch: branch.into(),
            tip: String::new(),
            reference_time,
            rename_similarity: RENAME_SIMILARITY,
            developers: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }
}

fn git(repo: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(repo).env("GIT_TERMINAL_PROMPT", "0").env("LC_ALL", "C");
    cmd
}

fn git_output(repo: &Path, args: &[&str]) -> Result<Option<Vec<u8>>, HistoryError> {
    let out = git(repo).args(args).stderr(Stdio::null()).output()?;
    Ok(out.status.success().then_some(out.stdout))
}

fn ensure_repository(repo: &Path) -> Result<(), HistoryError> {
    if !repo.is_dir() || git_output(repo, &["rev-parse", "--git-dir"])?.is_none() {
        return Err(HistoryError::RepositoryNotFound(repo.to_path_buf()));
    }
    Ok(())
}

fn resolve_commit(repo: &Path, rev: &str) -> Result<Option<String>, HistoryError> {
    let spec = format!("{rev}^{{commit}}");
    Ok(git_output(repo, &["rev-parse", "--verify", "--quiet", &spec])?.map(|o| String::from_utf8_lossy(&o).trim().to_string()))
}

/// Pick the branch to mine: `preferred` if it exists, otherwise the
/// repository's checked-out default branch.
pub fn default_branch(repo: &Path, preferred: &str) -> Result<String, HistoryError> {
    ensure_repository(repo)?;
    if resolve_commit(repo, preferred)?.is_some() {
        return Ok(preferred.to_string());
    }
    match git_output(repo, &["symbolic-ref", "--short", "HEAD"])? {
        Some(name) => {
            let name = String::from_utf8_lossy(&name).trim().to_string();
            if resolve_commit(repo, &name)?.is_some() {
                Ok(name)
            } else {
                Err(HistoryError::BranchNotFound(preferred.to_string()))
            }
        }
        None => Err(HistoryError::BranchNotFound(preferred.to_string())),
    }
}

/// Hash of the commit `branch` points at.
pub fn branch_tip(repo: &Path, branch: &str) -> Result<String, HistoryError> {
    ensure_repository(repo)?;
    resolve_commit(repo, branch)?.ok_or_else(|| HistoryError::BranchNotFound(branch.to_string()))
}

/// Blob reader over a persistent `git cat-file --batch`.
struct BlobReader {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl BlobReader {
    fn spawn(repo: &Path) -> Result<Self, HistoryError> {
        let mut child =
            git(repo).args(["cat-file", "--batch"]).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { child, stdin, stdout })
    }

    fn read(&mut self, rev: &str, path: &str) -> Result<String, HistoryError> {
        writeln!(self.stdin, "{rev}:{path}")?;
        self.stdin.flush()?;
        let mut header = String::new();
        self.stdout.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        match fields.as_slice() {
            [_, kind, size] if *kind == "blob" => {
                let size: usize = size.parse().map_err(|_| HistoryError::CorruptHistory(format!("bad blob header `{}`", header.trim())))?;
                let mut buf = vec![0u8; size + 1];
                self.stdout.read_exact(&mut buf)?;
                buf.pop();
                Ok(String::from_utf8_lossy(&buf).into_owned())
            }
            _ => Err(HistoryError::CorruptHistory(format!("cannot read {rev}:{path} ({})", header.trim()))),
        }
    }
}

impl Drop for BlobReader {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct LogEntry {
    id: String,
    parent: Option<String>,
    author: RawIdentity,
    timestamp: i64,
    changes: Vec<(String, Vec<String>)>,
}

fn parse_log(raw: &[u8]) -> Result<Vec<LogEntry>, HistoryError> {
    let text = String::from_utf8_lossy(raw);
    let mut entries = Vec::new();
    for record in text.split('\x1e').filter(|r| !r.is_empty()) {
        let (header, body) = record.split_once('\0').unwrap_or((record, ""));
        let fields: Vec<&str> = header.split('\x1f').collect();
        let [id, parents, name, email, time] = fields.as_slice() else {
            return Err(HistoryError::CorruptHistory(format!("malformed log header `{header}`")));
        };
        let parents: Vec<&str> = parents.split_whitespace().collect();
        if parents.len() > 1 {
            continue;
        }
        let timestamp = time.parse().map_err(|_| HistoryError::CorruptHistory(format!("bad timestamp `{time}` in {id}")))?;
        let mut tokens = body.trim_start_matches('\n').split('\0').filter(|t| !t.is_empty());
        let mut changes = Vec::new();
        while let Some(status) = tokens.next() {
            let arity = if status.starts_with('R') || status.starts_with('C') { 2 } else { 1 };
            let paths: Vec<String> = tokens.by_ref().take(arity).map(str::to_string).collect();
            if paths.len() != arity {
                return Err(HistoryError::CorruptHistory(format!("truncated change list in {id}")));
            }
            changes.push((status.to_string(), paths));
        }
        let email = if email.trim().is_empty() { name.trim().to_lowercase() } else { email.trim().to_string() };
        entries.push(LogEntry {
            id: id.to_string(),
            parent: parents.first().map(|p| p.to_string()),
            author: RawIdentity::new(name.trim(), email),
            timestamp,
            changes,
        });
    }
    Ok(entries)
}

/// All non-merge commits reachable from `branch`, parents before children,
/// with rename detection at git's default similarity.
pub fn extract_history(repo: &Path, branch: &str) -> Result<CommitHistory, HistoryError> {
    let tip = branch_tip(repo, branch)?;
    let tip_time: i64 = git_output(repo, &["show", "-s", "--format=%at", &tip])?
        .and_then(|o| String::from_utf8_lossy(&o).trim().parse().ok())
        .ok_or_else(|| HistoryError::CorruptHistory(format!("cannot read tip commit {tip}")))?;

    let log = git(repo)
        .args([
            "-c",
            "diff.renameLimit=0",
            "log",
            "--no-merges",
            "--reverse",
            "--topo-order",
            "--find-renames",
            "--name-status",
            "--no-color",
            "-z",
            "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at",
            &tip,
        ])
        .stderr(Stdio::piped())
        .output()?;
    if !log.status.success() {
        return Err(HistoryError::CorruptHistory(String::from_utf8_lossy(&log.stderr).trim().to_string()));
    }

    let mut blobs = BlobReader::spawn(repo)?;
    let mut commits = Vec::new();
    for entry in parse_log(&log.stdout)? {
        let mut changes = Vec::with_capacity(entry.changes.len());
        for (status, paths) in &entry.changes {
            let parent = entry.parent.as_deref();
            let before = |blobs: &mut BlobReader, path: &str| -> Result<String, HistoryError> {
                let parent = parent.ok_or_else(|| HistoryError::CorruptHistory(format!("{status} without parent in {}", entry.id)))?;
                blobs.read(parent, path)
            };
            let event = match status.chars().next() {
                Some('A') | Some('C') => {
                    let path = paths.last().expect("arity checked");
                    FileChangeEvent::addition(path.clone(), blobs.read(&entry.id, path)?)
                }
                Some('M') | Some('T') => {
                    let path = &paths[0];
                    FileChangeEvent::modification(path.clone(), before(&mut blobs, path)?, blobs.read(&entry.id, path)?)
                }
                Some('R') => {
                    let (old, new) = (&paths[0], &paths[1]);
                    FileChangeEvent::rename(old.clone(), new.clone(), before(&mut blobs, old)?, blobs.read(&entry.id, new)?)
                }
                Some('D') => {
                    let path = &paths[0];
                    FileChangeEvent::deletion(path.clone(), before(&mut blobs, path)?)
                }
                _ => continue,
            };
            changes.push(event);
        }
        commits.push(CommitRecord { id: entry.id, author: entry.author, timestamp: entry.timestamp, changes });
    }

    let latest = commits.iter().map(|c| c.timestamp).max().unwrap_or(tip_time);
    Ok(CommitHistory {
        commits,
        branch: branch.to_string(),
        tip,
        reference_time: tip_time.max(latest),
        rename_similarity: RENAME_SIMILARITY,
        developers: Vec::new(),
    })
}

/// Keep only source-code change events; drop commits left empty.
///
/// A rename that leaves the source set becomes a deletion of the old path,
/// one that enters it becomes an addition of the new path.
pub fn filter_source_files(history: &CommitHistory, languages: &LanguageTable) -> CommitHistory {
    let mut out = history.clone();
    out.commits = history
        .commits
        .iter()
        .filter_map(|commit| {
            let changes: Vec<FileChangeEvent> = commit
                .changes
                .iter()
                .filter_map(|event| {
                    let keep_new = languages.is_source(&event.path);
                    match (&event.change_kind, &event.old_path) {
                        (ChangeKind::Rename, Some(old)) => match (languages.is_source(old), keep_new) {
                            (true, true) => Some(event.clone()),
                            (true, false) => Some(FileChangeEvent::deletion(old.clone(), event.before_content.clone().unwrap_or_default())),
                            (false, true) => {
                                Some(FileChangeEvent::addition(event.path.clone(), event.after_content.clone().unwrap_or_default()))
                            }
                            (false, false) => None,
                        },
                        _ => keep_new.then(|| event.clone()),
                    }
                })
                .collect();
            (!changes.is_empty()).then(|| CommitRecord { changes, ..commit.clone() })
        })
        .collect();
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header {
        v: u32,
        branch: String,
        tip: String,
        reference_time: i64,
        rename_similarity: u8,
        #[serde(default)]
        developers: Vec<DeveloperId>,
    },
    Commit {
        v: u32,
        #[serde(flatten)]
        record: CommitRecord,
    },
}

/// Write a history as newline-delimited JSON: one header line, then one line per commit.
pub fn write_ndjson<W: Write>(history: &CommitHistory, mut out: W) -> Result<(), HistoryError> {
    let header = Line::Header {
        v: SCHEMA_VERSION,
        branch: history.branch.clone(),
        tip: history.tip.clone(),
        reference_time: history.reference_time,
        rename_similarity: history.rename_similarity,
        developers: history.developers.clone(),
    };
    serde_json::to_writer(&mut out, &header).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    for record in &history.commits {
        serde_json::to_writer(&mut out, &Line::Commit { v: SCHEMA_VERSION, record: record.clone() }).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ndjson<R: BufRead>(input: R) -> Result<CommitHistory, HistoryError> {
    let mut history: Option<CommitHistory> = None;
    let mut commits = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| HistoryError::Schema(format!("line {}: {e}", n + 1)))?;
        match parsed {
            Line::Header { v, branch, tip, reference_time, rename_similarity, developers } => {
                check_version(v, n)?;
                history = Some(CommitHistory { commits: Vec::new(), branch, tip, reference_time, rename_similarity, developers });
            }
            Line::Commit { v, record } => {
                check_version(v, n)?;
                commits.push(record);
            }
        }
    }
    let mut history = history.ok_or_else(|| HistoryError::Schema("missing header line".into()))?;
    history.commits = commits;
    Ok(history)
}

fn check_version(v: u32, line: usize) -> Result<(), HistoryError> {
    if v != SCHEMA_VERSION {
        return Err(HistoryError::Schema(format!("line {}: version {v}, expected {SCHEMA_VERSION}", line + 1)));
    }
    Ok(())
}
