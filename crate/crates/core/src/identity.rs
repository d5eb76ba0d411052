//! Developer alias unification.
//!
//! Identities are merged in two stages: equal e-mail addresses (compared
//! case-insensitively) first, then names whose normalized edit distance is
//! within a fraction of the longer name's length. Merging is a union-find
//! closure, so the resulting partition does not depend on input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::history::{CommitHistory, RawIdentity};

/// Default fraction of the longer normalized name allowed as edit distance.
pub const DEFAULT_ALIAS_THRESHOLD: f64 = 0.30;

/// A canonical developer: the union of every raw identity judged to be one person.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeveloperId {
    /// Smallest lowercased e-mail in the group.
    pub canonical_key: String,
    /// Longest name in the group.
    pub display_name: String,
    pub emails: BTreeSet<String>,
    pub names: BTreeSet<String>,
}

impl DeveloperId {
    pub fn canonical_identity(&self) -> RawIdentity {
        RawIdentity::new(self.display_name.clone(), self.canonical_key.clone())
    }
}

/// Minimum number of single-character insertions, deletions and
/// substitutions turning `a` into `b`. Operates on `char`s.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Lowercase, strip accents and punctuation, collapse whitespace.
pub fn normalize_name(name: &str) -> String {
    let stripped: String = name
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_email(email: &str) -> String {
    email.trim().to_lowercase()
}

/// True when two normalized names are close enough to be the same person.
pub fn names_similar(a: &str, b: &str, threshold: f64) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longer = a.len().max(b.len());
    // Skip the quadratic distance when the length gap alone exceeds the budget.
    let budget = threshold * longer as f64;
    if (a.len().abs_diff(b.len())) as f64 > budget {
        return false;
    }
    levenshtein_chars(&a, &b) as f64 <= budget
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut node = x;
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Alias-merging settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasConfig {
    pub threshold: f64,
    /// Pairs of e-mail addresses known to belong to one person; applied
    /// before automatic merging.
    pub manual_aliases: Vec<(String, String)>,
}

impl Default for AliasConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_ALIAS_THRESHOLD, manual_aliases: Vec::new() }
    }
}

/// Result of identity resolution: every raw identity mapped to its developer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityMap {
    developers: Vec<DeveloperId>,
    by_identity: BTreeMap<RawIdentity, usize>,
    by_email: BTreeMap<String, usize>,
}

impl IdentityMap {
    pub fn developers(&self) -> &[DeveloperId] {
        &self.developers
    }

    pub fn get(&self, identity: &RawIdentity) -> Option<&DeveloperId> {
        self.by_identity.get(identity).map(|&i| &self.developers[i])
    }

    /// Look up a developer by any of their e-mail addresses or canonical key.
    pub fn by_email(&self, email: &str) -> Option<&DeveloperId> {
        self.by_email.get(&normalize_email(email)).map(|&i| &self.developers[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RawIdentity, &DeveloperId)> {
        self.by_identity.iter().map(|(k, &i)| (k, &self.developers[i]))
    }

    /// Rebuild the lookup tables from a list of developers, e.g. after
    /// deserializing a history header.
    pub fn from_developers(developers: Vec<DeveloperId>) -> Self {
        let mut by_identity = BTreeMap::new();
        let mut by_email = BTreeMap::new();
        for (i, dev) in developers.iter().enumerate() {
            for email in &dev.emails {
                by_email.insert(normalize_email(email), i);
                for name in &dev.names {
                    by_identity.insert(RawIdentity::new(name.clone(), email.clone()), i);
                }
            }
            by_email.insert(normalize_email(&dev.canonical_key), i);
            by_identity.insert(dev.canonical_identity(), i);
        }
        Self { developers, by_identity, by_email }
    }
}

/// Partition raw identities into developers.
pub fn resolve_identities(identities: &[RawIdentity], config: &AliasConfig) -> IdentityMap {
    let unique: Vec<RawIdentity> = identities.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = unique.len();
    let mut uf = UnionFind::new(n);

    let emails: Vec<String> = unique.iter().map(|id| normalize_email(&id.email)).collect();
    let mut first_with_email: HashMap<&str, usize> = HashMap::new();
    for (i, email) in emails.iter().enumerate() {
        if email.is_empty() {
            continue;
        }
        match first_with_email.get(email.as_str()) {
            Some(&j) => uf.union(i, j),
            None => {
                first_with_email.insert(email, i);
            }
        }
    }
    for (a, b) in &config.manual_aliases {
        let (a, b) = (normalize_email(a), normalize_email(b));
        if let (Some(&i), Some(&j)) = (first_with_email.get(a.as_str()), first_with_email.get(b.as_str())) {
            uf.union(i, j);
        }
    }

    // Compare each distinct normalized name once.
    let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, id) in unique.iter().enumerate() {
        by_name.entry(normalize_name(&id.name)).or_default().push(i);
    }
    let names: Vec<(&String, &Vec<usize>)> = by_name.iter().filter(|(name, _)| !name.is_empty()).collect();
    for (_, members) in &names {
        for &m in members.iter().skip(1) {
            uf.union(members[0], m);
        }
    }
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            if names_similar(names[i].0, names[j].0, config.threshold) {
                uf.union(names[i].1[0], names[j].1[0]);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut developers: Vec<(DeveloperId, Vec<usize>)> = groups
        .into_values()
        .map(|members| {
            let emails: BTreeSet<String> = members.iter().map(|&i| emails[i].clone()).filter(|e| !e.is_empty()).collect();
            let names: BTreeSet<String> = members.iter().map(|&i| unique[i].name.clone()).collect();
            let canonical_key = emails.iter().next().cloned().unwrap_or_else(|| normalize_name(&unique[members[0]].name));
            let display_name =
                names.iter().max_by(|a, b| a.chars().count().cmp(&b.chars().count()).then_with(|| b.cmp(a))).cloned().unwrap_or_default();
            (DeveloperId { canonical_key, display_name, emails, names }, members)
        })
        .collect();
    developers.sort_by(|a, b| a.0.canonical_key.cmp(&b.0.canonical_key));

    let mut by_identity = BTreeMap::new();
    let mut by_email = BTreeMap::new();
    for (d, (dev, members)) in developers.iter().enumerate() {
        for &m in members {
            by_identity.insert(unique[m].clone(), d);
        }
        for email in &dev.emails {
            by_email.insert(email.clone(), d);
        }
        by_email.insert(normalize_email(&dev.canonical_key), d);
    }
    IdentityMap { developers: developers.into_iter().map(|(d, _)| d).collect(), by_identity, by_email }
}

/// Replace every commit author by the canonical identity of its developer.
pub fn canonicalize_history(history: &CommitHistory, config: &AliasConfig) -> (CommitHistory, IdentityMap) {
    let identities: Vec<RawIdentity> = history.commits.iter().map(|c| c.author.clone()).collect();
    let map = resolve_identities(&identities, config);
    let mut out = history.clone();
    for commit in &mut out.commits {
        if let Some(dev) = map.get(&commit.author) {
            commit.author = dev.canonical_identity();
        }
    }
    out.developers = map.developers().to_vec();
    (out, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(name: &str, email: &str) -> RawIdentity {
        RawIdentity::new(name, email)
    }

    /// Textbook full-matrix edit distance, kept separate from the rolling-row version.
    fn dp_oracle(a: &str, b: &str) -> usize {
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

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(dp_oracle("kitten", "sitting"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("int x = 0;", "int x = 1;"), 1);
    }

    #[test]
    fn normalization_strips_accents_and_punctuation() {
        assert_eq!(normalize_name("José  Álvarez-Ñúñez"), "jose alvareznunez");
        assert_eq!(normalize_name("Ana S."), "ana s");
        assert_eq!(normalize_name("j smith"), "j smith");
    }

    #[test]
    fn same_email_merges() {
        let map = resolve_identities(&[id("Ana S.", "ana@x.com"), id("Ana Silva", "ANA@x.com ")], &AliasConfig::default());
        assert_eq!(map.developers().len(), 1);
        assert_eq!(map.developers()[0].display_name, "Ana Silva");
        assert_eq!(map.developers()[0].canonical_key, "ana@x.com");
    }

    #[test]
    fn similar_names_merge() {
        assert_eq!(levenshtein("jsmith", "j smith"), 1);
        let map = resolve_identities(&[id("jsmith", "a@x.com"), id("j smith", "b@y.com")], &AliasConfig::default());
        assert_eq!(map.developers().len(), 1);
        assert_eq!(map.developers()[0].canonical_key, "a@x.com");
    }

    #[test]
    fn distinct_people_stay_apart() {
        let map = resolve_identities(&[id("Alice", "a@x.com"), id("Bob", "b@y.com")], &AliasConfig::default());
        assert_eq!(map.developers().len(), 2);
    }

    #[test]
    fn manual_aliases_apply() {
        let config = AliasConfig { manual_aliases: vec![("a@x.com".into(), "zz@y.com".into())], ..AliasConfig::default() };
        let map = resolve_identities(&[id("Alice", "a@x.com"), id("Qwerty", "zz@y.com")], &config);
        assert_eq!(map.developers().len(), 1);
        assert_eq!(map.by_email("ZZ@y.com").unwrap().canonical_key, "a@x.com");
    }

    #[test]
    fn empty_names_never_merge_by_name() {
        let map = resolve_identities(&[id("...", "a@x.com"), id("", "b@y.com")], &AliasConfig::default());
        assert_eq!(map.developers().len(), 2);
    }

    #[test]
    fn canonical_output_is_a_fixed_point() {
        let input = vec![id("Ana S.", "ana@x.com"), id("Ana Silva", "ana@x.com"), id("Bob", "bob@y.com"), id("bobby", "b2@y.com")];
        let map = resolve_identities(&input, &AliasConfig::default());
        let canon: Vec<RawIdentity> = map.developers().iter().map(DeveloperId::canonical_identity).collect();
        let again = resolve_identities(&canon, &AliasConfig::default());
        assert_eq!(again.developers().len(), map.developers().len());
        for dev in map.developers() {
            assert_eq!(again.get(&dev.canonical_identity()).unwrap().canonical_key, dev.canonical_key);
        }
    }

    fn partition(map: &IdentityMap, input: &[RawIdentity]) -> BTreeSet<BTreeSet<RawIdentity>> {
        let mut groups: BTreeMap<String, BTreeSet<RawIdentity>> = BTreeMap::new();
        for identity in input {
            groups.entry(map.get(identity).unwrap().canonical_key.clone()).or_default().insert(identity.clone());
        }
        groups.into_values().collect()
    }

    fn arb_identity() -> impl Strategy<Value = RawIdentity> {
        ("[abc]{1,2}( [ab])?", "[xyz]{1}@[pq]\\.com").prop_map(|(n, e)| RawIdentity::new(n, e))
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle_and_is_a_metric(a in "[ab ]{0,8}", b in "[ab ]{0,8}", c in "[ab ]{0,8}") {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, dp_oracle(&a, &b));
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!(ab <= levenshtein(&a, &c) + levenshtein(&c, &b));
            let (la, lb) = (a.chars().count(), b.chars().count());
            prop_assert!(la.abs_diff(lb) <= ab && ab <= la.max(lb));
        }

        #[test]
        fn merging_is_order_independent(mut ids in proptest::collection::vec(arb_identity(), 1..8), seed in any::<u64>()) {
            let map = resolve_identities(&ids, &AliasConfig::default());
            let before = partition(&map, &ids);
            let len = ids.len();
            ids.rotate_left((seed as usize) % len);
            ids.reverse();
            let map2 = resolve_identities(&ids, &AliasConfig::default());
            prop_assert_eq!(before, partition(&map2, &ids));
        }
    }
}
