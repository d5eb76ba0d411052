//! Language table: which paths count as source code, and how conditional
//! statements are recognised in each language.

use std::collections::BTreeMap;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED: &str = include_str!("../data/languages.toml");

#[derive(Debug, Error)]
pub enum LanguageError {
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid language table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TernaryStyle {
    C,
    Ruby,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub name: String,
    pub extensions: Vec<String>,
    pub keywords: Vec<String>,
    pub ternary: TernaryStyle,
    #[serde(default)]
    pub line_comments: Vec<String>,
    #[serde(default)]
    pub quotes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableFile {
    #[serde(default)]
    vendor_globs: Vec<String>,
    #[serde(rename = "language")]
    languages: Vec<LanguageSpec>,
}

/// Extension → language map plus the vendored-path exclusion list.
#[derive(Debug, Clone)]
pub struct LanguageTable {
    languages: Vec<LanguageSpec>,
    by_extension: BTreeMap<String, usize>,
    vendor_globs: Vec<String>,
    vendor: GlobSet,
}

impl Default for LanguageTable {
    fn default() -> Self {
        Self::from_toml(BUNDLED).expect("bundled language table is valid")
    }
}

impl LanguageTable {
    pub fn from_toml(text: &str) -> Result<Self, LanguageError> {
        let file: TableFile = toml::from_str(text).map_err(|e| LanguageError::InvalidTable(e.to_string()))?;
        Self::new(file.languages, file.vendor_globs)
    }

    pub fn new(languages: Vec<LanguageSpec>, vendor_globs: Vec<String>) -> Result<Self, LanguageError> {
        if languages.is_empty() {
            return Err(LanguageError::InvalidTable("no languages configured".into()));
        }
        let mut by_extension = BTreeMap::new();
        for (i, lang) in languages.iter().enumerate() {
            for ext in &lang.extensions {
                by_extension.insert(ext.trim_start_matches('.').to_lowercase(), i);
            }
        }
        let mut builder = GlobSetBuilder::new();
        for glob in &vendor_globs {
            builder.add(Glob::new(glob).map_err(|e| LanguageError::InvalidTable(e.to_string()))?);
        }
        let vendor = builder.build().map_err(|e| LanguageError::InvalidTable(e.to_string()))?;
        Ok(Self { languages, by_extension, vendor_globs, vendor })
    }

    /// Replace the vendored-path globs.
    pub fn with_vendor_globs(self, globs: Vec<String>) -> Result<Self, LanguageError> {
        Self::new(self.languages, globs)
    }

    pub fn vendor_globs(&self) -> &[String] {
        &self.vendor_globs
    }

    pub fn languages(&self) -> &[LanguageSpec] {
        &self.languages
    }

    pub fn get(&self, name: &str) -> Option<&LanguageSpec> {
        self.languages.iter().find(|l| l.name.eq_ignore_ascii_case(name))
    }

    /// Language of a path by extension, or `None` if it is not source code.
    pub fn language_of(&self, path: &str) -> Option<&LanguageSpec> {
        let ext = Path::new(path).extension()?.to_str()?.to_lowercase();
        self.by_extension.get(&ext).map(|&i| &self.languages[i])
    }

    pub fn is_vendored(&self, path: &str) -> bool {
        self.vendor.is_match(path)
    }

    /// Source file in a configured language and outside vendored trees.
    pub fn is_source(&self, path: &str) -> bool {
        self.language_of(path).is_some() && !self.is_vendored(path)
    }
}

/// Count conditional statements in `lines` for the named language.
pub fn count_conditionals<S: AsRef<str>>(lines: &[S], language: &str, table: &LanguageTable) -> Result<usize, LanguageError> {
    let spec = table.get(language).ok_or_else(|| LanguageError::UnknownLanguage(language.to_string()))?;
    Ok(lines.iter().map(|l| conditionals_in_line(l.as_ref(), spec)).sum())
}

/// Conditional count of one line with comments and string literals removed.
pub fn conditionals_in_line(line: &str, spec: &LanguageSpec) -> usize {
    let code = strip_comments_and_strings(line, spec);
    let keywords = words(&code).filter(|w| spec.keywords.iter().any(|k| k == w)).count();
    keywords + ternaries(&code, spec.ternary)
}

fn strip_comments_and_strings(line: &str, spec: &LanguageSpec) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < chars.len() {
        if starts_with_at(&chars, i, "/*") && spec.line_comments.iter().any(|c| c == "//") {
            match find_from(&chars, i + 2, "*/") {
                Some(end) => {
                    out.push(' ');
                    i = end + 2;
                    continue;
                }
                None => break,
            }
        }
        if spec.line_comments.iter().any(|c| starts_with_at(&chars, i, c)) {
            break;
        }
        if let Some(q) = spec.quotes.iter().find(|q| starts_with_at(&chars, i, q)) {
            let q: Vec<char> = q.chars().collect();
            let mut j = i + q.len();
            while j < chars.len() {
                if chars[j] == '\\' {
                    j += 2;
                    continue;
                }
                if chars[j..].starts_with(&q) {
                    break;
                }
                j += 1;
            }
            out.push(' ');
            i = j + q.len();
            continue;
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn starts_with_at(chars: &[char], at: usize, pat: &str) -> bool {
    pat.chars().enumerate().all(|(k, p)| chars.get(at + k) == Some(&p))
}

fn find_from(chars: &[char], from: usize, pat: &str) -> Option<usize> {
    (from..chars.len()).find(|&i| starts_with_at(chars, i, pat))
}

fn words(code: &str) -> impl Iterator<Item = &str> {
    code.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|w| !w.is_empty())
}

fn ternaries(code: &str, style: TernaryStyle) -> usize {
    let chars: Vec<char> = code.chars().collect();
    let mut count = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c != '?' {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| chars[p]);
        let next = chars.get(i + 1).copied();
        match style {
            TernaryStyle::None => {}
            TernaryStyle::C => {
                // Skip `??`, `?.`, `?->`, generic wildcards and `<?php`.
                let excluded = matches!(prev, Some('?') | Some('<'))
                    || matches!(next, Some('?') | Some('.') | Some('-') | Some('>') | Some(',') | Some(')'));
                if !excluded {
                    count += 1;
                }
            }
            TernaryStyle::Ruby => {
                if prev.is_some_and(char::is_whitespace) && next.is_none_or(char::is_whitespace) {
                    count += 1;
                }
            }
        }
    }
    count
}
