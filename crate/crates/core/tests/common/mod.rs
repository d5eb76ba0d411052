//! Fixture repositories built with `git fast-import`, plus a naive feature
//! oracle that replays the generator's own file model.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use file_experts::FeatureVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DAY: i64 = 86_400;
pub const EPOCH: i64 = 1_600_000_000;

#[derive(Debug, Clone)]
pub enum Op {
    Write { path: String, content: String },
    Delete { path: String },
    Rename { from: String, to: String },
}

#[derive(Debug, Clone)]
pub struct FixtureCommit {
    pub name: String,
    pub email: String,
    pub time: i64,
    pub ops: Vec<Op>,
    /// Indices of earlier commits; the first is the mainline parent.
    pub parents: Vec<usize>,
}

impl FixtureCommit {
    pub fn new(name: &str, email: &str, time: i64, ops: Vec<Op>) -> Self {
        Self { name: name.into(), email: email.into(), time, ops, parents: Vec::new() }
    }
}

pub fn write(path: &str, content: &str) -> Op {
    Op::Write { path: path.into(), content: content.into() }
}

/// Give each commit the previous one as its parent.
pub fn linear(mut commits: Vec<FixtureCommit>) -> Vec<FixtureCommit> {
    for (i, c) in commits.iter_mut().enumerate() {
        c.parents = if i == 0 { vec![] } else { vec![i - 1] };
    }
    commits
}

fn data(out: &mut Vec<u8>, bytes: &[u8]) {
    writeln!(out, "data {}", bytes.len()).unwrap();
    out.extend_from_slice(bytes);
    out.push(b'\n');
}

/// Initialize a repository in `dir` and import `commits`; `branch` points at the last one.
pub fn build_repo(dir: &Path, branch: &str, commits: &[FixtureCommit]) {
    let status = Command::new("git").arg("init").arg("-q").arg(dir).status().unwrap();
    assert!(status.success());
    let mut stream = Vec::new();
    for (i, c) in commits.iter().enumerate() {
        if i > 0 && c.parents.is_empty() {
            writeln!(stream, "reset refs/heads/{branch}\n").unwrap();
        }
        writeln!(stream, "commit refs/heads/{branch}").unwrap();
        writeln!(stream, "mark :{}", i + 1).unwrap();
        writeln!(stream, "author {} <{}> {} +0000", c.name, c.email, c.time).unwrap();
        writeln!(stream, "committer {} <{}> {} +0000", c.name, c.email, c.time).unwrap();
        data(&mut stream, format!("commit {i}").as_bytes());
        if let Some((first, rest)) = c.parents.split_first() {
            writeln!(stream, "from :{}", first + 1).unwrap();
            for p in rest {
                writeln!(stream, "merge :{}", p + 1).unwrap();
            }
        }
        for op in &c.ops {
            match op {
                Op::Write { path, content } => {
                    writeln!(stream, "M 100644 inline {path}").unwrap();
                    data(&mut stream, content.as_bytes());
                }
                Op::Delete { path } => writeln!(stream, "D {path}").unwrap(),
                Op::Rename { from, to } => writeln!(stream, "R {from} {to}").unwrap(),
            }
        }
        stream.push(b'\n');
    }
    let mut child =
        Command::new("git").arg("-C").arg(dir).args(["fast-import", "--quiet", "--force"]).stdin(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(&stream).unwrap();
    assert!(child.wait().unwrap().success());
    let status = Command::new("git").arg("-C").arg(dir).args(["symbolic-ref", "HEAD", &format!("refs/heads/{branch}")]).status().unwrap();
    assert!(status.success());
}

pub const NAMES: [&str; 8] = [
    "Alice Zephyr",
    "Bruno Quillfeather",
    "Chandra Voss",
    "Dmitri Okonkwo",
    "Esperanza Lind",
    "Farouk Baptiste",
    "Gwen Takahashi",
    "Hiro Mbeki",
];

pub fn email_of(dev: usize) -> String {
    format!("{}@dev{dev}.example", NAMES[dev].split(' ').next().unwrap().to_lowercase())
}

/// One version of a modeled file; `None` content means deleted.
#[derive(Debug, Clone)]
pub struct Version {
    pub dev: usize,
    pub time: i64,
    pub content: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default)]
pub struct FileTruth {
    pub paths: Vec<String>,
    pub versions: Vec<Version>,
}

impl FileTruth {
    pub fn alive(&self) -> bool {
        self.versions.last().is_some_and(|v| v.content.is_some())
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub commits: Vec<FixtureCommit>,
    pub files: Vec<FileTruth>,
    pub devs: usize,
}

impl Generated {
    pub fn reference_time(&self) -> i64 {
        self.commits.iter().map(|c| c.time).max().unwrap_or(0)
    }

    /// Developers who touched each file alive at the end, by final path.
    pub fn developers_by_file(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.files
            .iter()
            .filter(|f| f.alive())
            .map(|f| (f.paths.last().unwrap().clone(), f.versions.iter().map(|v| email_of(v.dev)).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub commits: usize,
    pub files: usize,
    pub devs: usize,
    pub max_initial_lines: usize,
}

struct ModelFile {
    id: usize,
    path: String,
    /// (line id, value, is conditional)
    lines: Vec<(usize, u32, bool)>,
    next_line: usize,
    renames: usize,
}

impl ModelFile {
    fn render_line(&self, (line, value, cond): (usize, u32, bool)) -> String {
        if cond {
            format!("if (f{}_l{} > {}) {{", self.id, line, value)
        } else {
            format!("int f{}_l{} = {};", self.id, line, value)
        }
    }

    fn lines(&self) -> Vec<String> {
        self.lines.iter().map(|&l| self.render_line(l)).collect()
    }

    fn new_line(&mut self, rng: &mut ChaCha8Rng) -> (usize, u32, bool) {
        self.next_line += 1;
        (self.next_line, rng.gen_range(0..50), rng.gen_bool(0.25))
    }
}

fn text(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// A random history of C files over `params`. Every line carries its file's
/// id so git never pairs unrelated files as renames, renames happen in
/// commits that do not edit the file, lines are never reordered, and
/// every write changes its file.
pub fn generate(seed: u64, params: GenParams) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model: Vec<ModelFile> = Vec::new();
    let mut truth: Vec<FileTruth> = Vec::new();
    let mut commits = Vec::new();
    let mut time = EPOCH;
    for _ in 0..params.commits {
        time += rng.gen_range(DAY / 10..5 * DAY);
        let dev = rng.gen_range(0..params.devs);
        let mut ops = Vec::new();
        let alive: Vec<usize> = (0..model.len()).filter(|&i| truth[i].alive()).collect();
        let touches = rng.gen_range(1..=2.min(alive.len() + 1));
        let mut touched = BTreeSet::new();
        for _ in 0..touches {
            let candidates: Vec<usize> = alive.iter().copied().filter(|i| !touched.contains(i)).collect();
            let create = model.len() < params.files && (candidates.is_empty() || rng.gen_bool(0.3));
            if create {
                let id = model.len();
                let mut f = ModelFile { id, path: format!("src/m{}/file{id}.c", id % 3), lines: Vec::new(), next_line: 0, renames: 0 };
                for _ in 0..rng.gen_range(1..=params.max_initial_lines) {
                    let l = f.new_line(&mut rng);
                    f.lines.push(l);
                }
                ops.push(Op::Write { path: f.path.clone(), content: text(&f.lines()) });
                truth.push(FileTruth { paths: vec![f.path.clone()], versions: vec![Version { dev, time, content: Some(f.lines()) }] });
                touched.insert(id);
                model.push(f);
                continue;
            }
            let Some(&i) = candidates.choose(&mut rng) else { continue };
            touched.insert(i);
            let f = &mut model[i];
            let roll: f64 = rng.gen();
            if roll < 0.12 {
                f.renames += 1;
                let to = format!("src/moved/file{}_r{}.c", f.id, f.renames);
                ops.push(Op::Rename { from: f.path.clone(), to: to.clone() });
                f.path = to.clone();
                truth[i].paths.push(to);
                truth[i].versions.push(Version { dev, time, content: Some(f.lines()) });
            } else if roll < 0.17 {
                ops.push(Op::Delete { path: f.path.clone() });
                truth[i].versions.push(Version { dev, time, content: None });
            } else {
                let before = f.lines.clone();
                for _ in 0..rng.gen_range(1..=3) {
                    let n = f.lines.len();
                    match rng.gen_range(0..4) {
                        0 => {
                            let k = rng.gen_range(0..n);
                            f.lines[k].1 += 1;
                        }
                        1 => {
                            let k = rng.gen_range(0..n);
                            f.lines[k] = f.new_line(&mut rng);
                        }
                        2 if n > 1 => {
                            f.lines.remove(rng.gen_range(0..n));
                        }
                        _ => {
                            let l = f.new_line(&mut rng);
                            f.lines.insert(rng.gen_range(0..=n), l);
                        }
                    }
                }
                if f.lines == before {
                    let l = f.new_line(&mut rng);
                    f.lines.push(l);
                }
                ops.push(Op::Write { path: f.path.clone(), content: text(&f.lines()) });
                truth[i].versions.push(Version { dev, time, content: Some(f.lines()) });
            }
        }
        if ops.is_empty() {
            continue;
        }
        commits.push(FixtureCommit::new(NAMES[dev], &email_of(dev), time, ops));
    }
    Generated { commits: linear(commits), files: truth, devs: params.devs }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// (kept pairs) of a longest common subsequence by the textbook table.
fn lcs_pairs(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if t[i + 1][j] >= t[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// (adds, dels, mods, conds) and new authorship for one version step.
fn naive_step(before: &[(String, usize)], after: &[String], dev: usize) -> ([u64; 4], Vec<(String, usize)>) {
    let old: Vec<String> = before.iter().map(|(l, _)| l.clone()).collect();
    let kept = lcs_pairs(&old, after);
    let mut counts = [0u64; 4];
    let mut authors: Vec<(String, usize)> = after.iter().map(|l| (l.clone(), dev)).collect();
    let mut bounds = kept.clone();
    bounds.push((old.len(), after.len()));
    let (mut pa, mut pb) = (0, 0);
    for (ki, kj) in bounds {
        let removed = &old[pa..ki];
        let added = &after[pb..kj];
        for k in 0..removed.len().max(added.len()) {
            match (removed.get(k), added.get(k)) {
                (Some(r), Some(a)) if (edit_distance(r, a) as f64) < 0.4 * r.chars().count() as f64 => counts[2] += 1,
                (r, a) => {
                    if r.is_some() {
                        counts[1] += 1;
                    }
                    if let Some(a) = a {
                        counts[0] += 1;
                        counts[3] += u64::from(a.starts_with("if ("));
                    }
                }
            }
        }
        if ki < old.len() {
            authors[kj].1 = before[ki].1;
        }
        pa = ki + 1;
        pb = kj + 1;
    }
    (counts, authors)
}

/// Features of every (developer e-mail, final path) pair, by brute replay
/// of the modeled versions.
pub fn naive_features(generated: &Generated) -> BTreeMap<(String, String), FeatureVector> {
    let reference = generated.reference_time();
    let mut out = BTreeMap::new();
    for file in generated.files.iter().filter(|f| f.alive()) {
        let path = file.paths.last().unwrap().clone();
        let mut blame: Vec<(String, usize)> = Vec::new();
        let mut per_dev: BTreeMap<usize, ([u64; 4], Vec<i64>, usize)> = BTreeMap::new();
        for (pos, v) in file.versions.iter().enumerate() {
            let after = v.content.as_ref().expect("alive lineages have no deletions");
            let (counts, next) = naive_step(&blame, after, v.dev);
            blame = next;
            let entry = per_dev.entry(v.dev).or_insert(([0; 4], Vec::new(), 0));
            for (total, c) in entry.0.iter_mut().zip(counts) {
                *total += c;
            }
            entry.1.push(v.time);
            entry.2 = pos;
        }
        for (&dev, (counts, times, last)) in &per_dev {
            let later: BTreeSet<usize> = file.versions[last + 1..].iter().map(|v| v.dev).filter(|&d| d != dev).collect();
            let last_time = file.versions[*last].time;
            let span = (times.iter().max().unwrap() - times.iter().min().unwrap()) as f64 / DAY as f64;
            out.insert(
                (email_of(dev), path.clone()),
                FeatureVector {
                    adds: counts[0],
                    dels: counts[1],
                    mods: counts[2],
                    conds: counts[3],
                    amount: counts[0] + counts[1],
                    fa: u8::from(file.versions[0].dev == dev),
                    blame: blame.iter().filter(|(_, a)| *a == dev).count() as u64,
                    num_commits: times.len() as u64,
                    num_days: ((reference - last_time) as f64 / DAY as f64).floor(),
                    num_mod_devs: later.len() as u64,
                    size: blame.len() as u64,
                    avg_days_commits: if times.len() > 1 { span / (times.len() - 1) as f64 } else { 0.0 },
                },
            );
        }
    }
    out
}
