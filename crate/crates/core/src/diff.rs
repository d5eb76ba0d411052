//! Line diffs and the added/deleted/modified line classification.
//!
//! Alignment is a longest common subsequence over whole lines. Inside each
//! hunk, removed and added lines are paired positionally; a pair whose edit
//! distance is below `mod_threshold * len(removed)` is one modification,
//! otherwise it is one deletion plus one addition.

use std::collections::HashMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::levenshtein_chars;
use crate::lang::{conditionals_in_line, LanguageSpec};

/// Default fraction of the removed line's length below which a pair is a modification.
pub const DEFAULT_MOD_THRESHOLD: f64 = 0.40;

/// Above this many DP cells a sub-problem is split in linear space first.
const DP_CELL_LIMIT: usize = 1 << 22;

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("modification threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
}

/// A maximal run of non-matching lines between two versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    /// Index in the old version of the first removed line (or the insertion point).
    pub before_start: usize,
    /// Index in the new version of the first added line (or the deletion point).
    pub after_start: usize,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeStats {
    pub adds: u64,
    pub dels: u64,
    pub mods: u64,
    pub conds: u64,
}

impl AddAssign for ChangeStats {
    fn add_assign(&mut self, rhs: Self) {
        self.adds += rhs.adds;
        self.dels += rhs.dels;
        self.mods += rhs.mods;
        self.conds += rhs.conds;
    }
}

/// One step of a line alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineOp {
    /// `before[i] == after[j]`, kept.
    Keep(usize, usize),
    Delete(usize),
    Insert(usize),
}

/// Split text into lines the way the rest of the crate counts them.
pub fn split_lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

/// LCS alignment of two line sequences. Deletions are emitted before
/// insertions inside a changed region.
pub fn align<A: AsRef<str>, B: AsRef<str>>(before: &[A], after: &[B]) -> Vec<LineOp> {
    fn intern<'a>(ids: &mut HashMap<&'a str, u32>, line: &'a str) -> u32 {
        let next = ids.len() as u32;
        *ids.entry(line).or_insert(next)
    }
    let mut ids = HashMap::new();
    let a: Vec<u32> = before.iter().map(|s| intern(&mut ids, s.as_ref())).collect();
    let b: Vec<u32> = after.iter().map(|s| intern(&mut ids, s.as_ref())).collect();

    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..].iter().rev().zip(b[prefix..].iter().rev()).take_while(|(x, y)| x == y).count();

    let mut ops = Vec::with_capacity(a.len().max(b.len()));
    ops.extend((0..prefix).map(|i| LineOp::Keep(i, i)));
    lcs_ops(&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix], prefix, prefix, &mut ops);
    let (sa, sb) = (a.len() - suffix, b.len() - suffix);
    ops.extend((0..suffix).map(|k| LineOp::Keep(sa + k, sb + k)));
    ops
}

fn lcs_ops(a: &[u32], b: &[u32], off_a: usize, off_b: usize, ops: &mut Vec<LineOp>) {
    if a.is_empty() {
        ops.extend((0..b.len()).map(|j| LineOp::Insert(off_b + j)));
        return;
    }
    if b.is_empty() {
        ops.extend((0..a.len()).map(|i| LineOp::Delete(off_a + i)));
        return;
    }
    if (a.len() + 1).saturating_mul(b.len() + 1) <= DP_CELL_LIMIT || a.len() == 1 {
        dp_ops(a, b, off_a, off_b, ops);
        return;
    }
    // Hirschberg split: best column for the middle row.
    let mid = a.len() / 2;
    let forward = lcs_row(a[..mid].iter(), b.iter());
    let backward = lcs_row(a[mid..].iter().rev(), b.iter().rev());
    let m = b.len();
    let split = (0..=m).max_by_key(|&k| (forward[k] + backward[m - k], std::cmp::Reverse(k))).unwrap_or(0);
    lcs_ops(&a[..mid], &b[..split], off_a, off_b, ops);
    lcs_ops(&a[mid..], &b[split..], off_a + mid, off_b + split, ops);
}

/// Last row of the LCS length table for `a` against every prefix of `b`.
fn lcs_row<'a>(a: impl Iterator<Item = &'a u32>, b: impl Iterator<Item = &'a u32> + Clone) -> Vec<usize> {
    let b: Vec<u32> = b.copied().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

fn dp_ops(a: &[u32], b: &[u32], off_a: usize, off_b: usize, ops: &mut Vec<LineOp>) {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    // suffix[i * w + j] = LCS length of a[i..] and b[j..]
    let mut suffix = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * w + j] =
                if a[i] == b[j] { suffix[(i + 1) * w + j + 1] + 1 } else { suffix[(i + 1) * w + j].max(suffix[i * w + j + 1]) };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            ops.push(LineOp::Keep(off_a + i, off_b + j));
            i += 1;
            j += 1;
        } else if suffix[(i + 1) * w + j] >= suffix[i * w + j + 1] {
            ops.push(LineOp::Delete(off_a + i));
            i += 1;
        } else {
            ops.push(LineOp::Insert(off_b + j));
            j += 1;
        }
    }
    ops.extend((i..n).map(|i| LineOp::Delete(off_a + i)));
    ops.extend((j..m).map(|j| LineOp::Insert(off_b + j)));
}

/// Hunks between two texts.
pub fn line_diff(before: &str, after: &str) -> Vec<DiffHunk> {
    diff_lines(&split_lines(before), &split_lines(after))
}

/// Hunks between two line sequences.
pub fn diff_lines<S: AsRef<str>>(before: &[S], after: &[S]) -> Vec<DiffHunk> {
    hunks_from_ops(&align(before, after), before, after)
}

pub(crate) fn hunks_from_ops<A: AsRef<str>, B: AsRef<str>>(ops: &[LineOp], before: &[A], after: &[B]) -> Vec<DiffHunk> {
    let mut hunks = Vec::new();
    let mut current: Option<DiffHunk> = None;
    let (mut pos_a, mut pos_b) = (0, 0);
    for op in ops {
        match *op {
            LineOp::Keep(i, j) => {
                hunks.extend(current.take());
                pos_a = i + 1;
                pos_b = j + 1;
            }
            LineOp::Delete(i) => {
                let hunk = current.get_or_insert_with(|| empty_hunk(pos_a, pos_b));
                hunk.removed.push(before[i].as_ref().to_string());
                pos_a = i + 1;
            }
            LineOp::Insert(j) => {
                let hunk = current.get_or_insert_with(|| empty_hunk(pos_a, pos_b));
                hunk.added.push(after[j].as_ref().to_string());
                pos_b = j + 1;
            }
        }
    }
    hunks.extend(current);
    hunks
}

fn empty_hunk(before_start: usize, after_start: usize) -> DiffHunk {
    DiffHunk { before_start, after_start, removed: Vec::new(), added: Vec::new() }
}

/// Apply hunks produced from `before` to reconstruct the new version.
pub fn apply_hunks<S: AsRef<str>>(before: &[S], hunks: &[DiffHunk]) -> Vec<String> {
    let mut out = Vec::with_capacity(before.len());
    let mut pos = 0;
    for hunk in hunks {
        out.extend(before[pos..hunk.before_start].iter().map(|s| s.as_ref().to_string()));
        out.extend(hunk.added.iter().cloned());
        pos = hunk.before_start + hunk.removed.len();
    }
    out.extend(before[pos..].iter().map(|s| s.as_ref().to_string()));
    out
}

/// True when replacing `removed` by `added` counts as a modification.
pub fn is_modification(removed: &str, added: &str, mod_threshold: f64) -> bool {
    let r: Vec<char> = removed.chars().collect();
    let a: Vec<char> = added.chars().collect();
    let budget = mod_threshold * r.len() as f64;
    if r.len().abs_diff(a.len()) as f64 >= budget {
        return false;
    }
    (levenshtein_chars(&r, &a) as f64) < budget
}

/// Count additions, deletions and modifications in a set of hunks, plus the
/// conditionals on lines counted as additions when a language is given.
pub fn classify_changes(hunks: &[DiffHunk], mod_threshold: f64, language: Option<&LanguageSpec>) -> Result<ChangeStats, DiffError> {
    if !(0.0..=1.0).contains(&mod_threshold) {
        return Err(DiffError::InvalidThreshold(mod_threshold));
    }
    let mut stats = ChangeStats::default();
    let count_added = |line: &str, stats: &mut ChangeStats| {
        stats.adds += 1;
        if let Some(spec) = language {
            stats.conds += conditionals_in_line(line, spec) as u64;
        }
    };
    for hunk in hunks {
        let paired = hunk.removed.len().min(hunk.added.len());
        for (removed, added) in hunk.removed.iter().zip(&hunk.added) {
            if is_modification(removed, added, mod_threshold) {
                stats.mods += 1;
            } else {
                stats.dels += 1;
                count_added(added, &mut stats);
            }
        }
        stats.dels += (hunk.removed.len() - paired) as u64;
        for added in &hunk.added[paired..] {
            count_added(added, &mut stats);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageTable;
    use proptest::prelude::*;

    fn hunk(removed: &[&str], added: &[&str]) -> DiffHunk {
        DiffHunk {
            before_start: 0,
            after_start: 0,
            removed: removed.iter().map(|s| s.to_string()).collect(),
            added: added.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn identical_texts_have_no_hunks() {
        assert!(line_diff("a\nb\nc\n", "a\nb\nc\n").is_empty());
        assert!(line_diff("", "").is_empty());
    }

    #[test]
    fn pure_addition_is_one_hunk() {
        let hunks = line_diff("", "x\ny\nz\n");
        assert_eq!(
            hunks,
            vec![DiffHunk { before_start: 0, after_start: 0, removed: vec![], added: vec!["x".into(), "y".into(), "z".into()] }]
        );
    }

    #[test]
    fn single_line_replacement() {
        let hunks = line_diff("1\n2\n3\n4\n5\n", "1\n2\nthree\n4\n5\n");
        assert_eq!(hunks, vec![DiffHunk { before_start: 2, after_start: 2, removed: vec!["3".into()], added: vec!["three".into()] }]);
    }

    #[test]
    fn modification_threshold_examples() {
        let s = classify_changes(&[hunk(&["int x = 0;"], &["int x = 1;"])], DEFAULT_MOD_THRESHOLD, None).unwrap();
        assert_eq!(s, ChangeStats { adds: 0, dels: 0, mods: 1, conds: 0 });
        let s = classify_changes(&[hunk(&["alpha"], &["zzzzz"])], DEFAULT_MOD_THRESHOLD, None).unwrap();
        assert_eq!(s, ChangeStats { adds: 1, dels: 1, mods: 0, conds: 0 });
        let s = classify_changes(&[hunk(&[], &["a", "b"])], DEFAULT_MOD_THRESHOLD, None).unwrap();
        assert_eq!(s, ChangeStats { adds: 2, dels: 0, mods: 0, conds: 0 });
    }

    #[test]
    fn empty_removed_line_is_never_a_modification() {
        assert!(!is_modification("", "", 1.0));
        assert!(!is_modification("", "x", 1.0));
    }

    #[test]
    fn threshold_is_strict() {
        // distance 2 against a budget of exactly 0.4 * 5 = 2
        assert!(!is_modification("abcde", "abcxy", 0.4));
        assert!(is_modification("abcde", "abcdx", 0.4));
    }

    #[test]
    fn leftover_lines_are_pure_adds_and_dels() {
        let s = classify_changes(&[hunk(&["int a = 1;", "gone"], &["int a = 2;"])], 0.4, None).unwrap();
        assert_eq!(s, ChangeStats { adds: 0, dels: 1, mods: 1, conds: 0 });
    }

    #[test]
    fn conditionals_only_on_added_lines() {
        let table = LanguageTable::default();
        let c = table.get("C");
        let s = classify_changes(&[hunk(&["if (a) {"], &["if (b) {", "if (c) {"])], 0.4, c).unwrap();
        // first pair is a modification; only the leftover addition is scanned
        assert_eq!(s, ChangeStats { adds: 1, dels: 0, mods: 1, conds: 1 });
    }

    #[test]
    fn rejects_out_of_range_threshold() {
        assert_eq!(classify_changes(&[], 1.5, None), Err(DiffError::InvalidThreshold(1.5)));
        assert!(classify_changes(&[], -0.1, None).is_err());
    }

    #[test]
    fn hirschberg_path_matches_dp_length() {
        let before: Vec<String> = (0..3000).map(|i| format!("l{}", i % 97)).collect();
        let after: Vec<String> = (0..2500).map(|i| format!("l{}", (i * 7) % 101)).collect();
        let ops = align(&before, &after);
        assert_eq!(apply_hunks(&before, &hunks_from_ops(&ops, &before, &after)), after);
        let kept = ops.iter().filter(|o| matches!(o, LineOp::Keep(..))).count();
        let a: Vec<u32> = before.iter().map(|s| s[1..].parse().unwrap()).collect();
        let b: Vec<u32> = after.iter().map(|s| s[1..].parse().unwrap()).collect();
        assert_eq!(kept, *lcs_row(a.iter(), b.iter()).last().unwrap());
    }

    fn lines() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[abc]{0,2}", 0..12)
    }

    proptest! {
        #[test]
        fn hunks_reconstruct_both_versions(before in lines(), after in lines()) {
            let hunks = diff_lines(&before, &after);
            prop_assert_eq!(apply_hunks(&before, &hunks), after.clone());
            for h in &hunks {
                prop_assert!(!(h.removed.is_empty() && h.added.is_empty()));
                prop_assert_eq!(&before[h.before_start..h.before_start + h.removed.len()], &h.removed[..]);
                prop_assert_eq!(&after[h.after_start..h.after_start + h.added.len()], &h.added[..]);
            }
            // kept lines form a common subsequence of maximal length
            let kept = align(&before, &after).iter().filter(|o| matches!(o, LineOp::Keep(..))).count();
            prop_assert_eq!(kept, brute_lcs(&before, &after));
        }

        #[test]
        fn classification_conserves_lines(before in lines(), after in lines(), t in 0.0f64..=1.0) {
            let hunks = diff_lines(&before, &after);
            let s = classify_changes(&hunks, t, None).unwrap();
            let total: usize = hunks.iter().map(|h| h.removed.len() + h.added.len()).sum();
            prop_assert_eq!((s.adds + s.dels + 2 * s.mods) as usize, total);
        }
    }

    fn brute_lcs(a: &[String], b: &[String]) -> usize {
        fn go(a: &[String], b: &[String], memo: &mut HashMap<(usize, usize), usize>) -> usize {
            if a.is_empty() || b.is_empty() {
                return 0;
            }
            if let Some(&v) = memo.get(&(a.len(), b.len())) {
                return v;
            }
            let v = if a[0] == b[0] { 1 + go(&a[1..], &b[1..], memo) } else { go(&a[1..], b, memo).max(go(a, &b[1..], memo)) };
            memo.insert((a.len(), b.len()), v);
            v
        }
        go(a, b, &mut HashMap::new())
    }
}
