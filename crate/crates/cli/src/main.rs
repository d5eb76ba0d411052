mod commands;
mod errors;
mod output;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use file_experts::analytics::PValueMethod;
use file_experts::diff::DEFAULT_MOD_THRESHOLD;
use file_experts::expertise::DEFAULT_FOLDS;
use file_experts::identity::{AliasConfig, DEFAULT_ALIAS_THRESHOLD};
use file_experts::lang::LanguageTable;
use file_experts::study::{ColumnMapping, DEFAULT_FILE_LIMIT};
use file_experts::{ClassifierKind, Technique};

use crate::errors::CliError;
use crate::output::Format;
use crate::pipeline::MiningSettings;

/// Identify source-code file experts from git history.
#[derive(Debug, Parser)]
#[command(name = "file-experts", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Repository to mine; repeat for several.
    #[arg(long = "repo", global = true, value_name = "PATH")]
    repos: Vec<PathBuf>,
    /// Branch to mine; falls back to the repository default when absent.
    #[arg(long, global = true, default_value = "master")]
    branch: String,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; written atomically. Defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Maximum normalized name distance for merging identities.
    #[arg(long, global = true, default_value_t = DEFAULT_ALIAS_THRESHOLD)]
    alias_threshold: f64,
    /// Relative edit distance below which a removed/added line pair is a modification.
    #[arg(long, global = true, default_value_t = DEFAULT_MOD_THRESHOLD)]
    mod_threshold: f64,
    /// Reference time in seconds since the Unix epoch; defaults to the last commit.
    #[arg(long, global = true, value_name = "SECONDS")]
    reference_time: Option<i64>,
    /// CSV of `email_a,email_b` pairs known to be one developer.
    #[arg(long, global = true, value_name = "PATH")]
    aliases: Option<PathBuf>,
    /// TOML language table replacing the built-in one.
    #[arg(long, global = true, value_name = "PATH")]
    languages: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Cache directory for mined histories and features.
    #[arg(long, global = true, value_name = "PATH")]
    cache_dir: Option<PathBuf>,
    /// Always re-mine.
    #[arg(long, global = true)]
    no_cache: bool,
}

/// Ground-truth CSV column names.
#[derive(Debug, Clone, Args)]
struct ColumnArgs {
    #[arg(long, default_value = "repo")]
    repo_column: String,
    #[arg(long, default_value = "developer_email")]
    developer_column: String,
    #[arg(long, default_value = "file")]
    file_column: String,
    #[arg(long, default_value = "knowledge")]
    knowledge_column: String,
}

impl ColumnArgs {
    fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            repo: self.repo_column.clone(),
            developer: self.developer_column.clone(),
            file: self.file_column.clone(),
            knowledge: self.knowledge_column.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum PValueArg {
    T,
    Permutation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine repositories and write the features table.
    Mine {
        /// Also write each canonical history to `<repo>.ndjson` in this directory.
        #[arg(long, value_name = "DIR")]
        history_dir: Option<PathBuf>,
    },
    /// Feature vectors of selected (developer, file) pairs.
    Features {
        #[arg(long)]
        developer: Option<String>,
        #[arg(long)]
        file: Option<String>,
    },
    /// Rank the developers of a file by one technique.
    Rank {
        #[arg(long, default_value = "doa")]
        technique: Technique,
        /// Restrict to one file; all files otherwise.
        #[arg(long)]
        file: Option<String>,
        /// Mark developers at or above this normalized score as experts.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Sweep the threshold grid against a ground truth.
    Calibrate {
        /// One technique; all three when omitted.
        #[arg(long)]
        technique: Option<Technique>,
        #[arg(long, required = true, value_name = "PATH")]
        truth: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Cross-validate classifiers over a hyperparameter grid.
    Evaluate {
        /// One classifier family; all three when omitted.
        #[arg(long)]
        classifier: Option<ClassifierKind>,
        #[arg(long, required = true, value_name = "PATH")]
        truth: PathBuf,
        /// `default`, or a JSON file holding a list of classifier specs.
        #[arg(long, default_value = "default")]
        grid: String,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Spearman correlation of each variable with declared knowledge.
    Correlate {
        /// Ground-truth CSV; repeat for several datasets, which are also pooled.
        #[arg(long, required = true, value_name = "PATH")]
        truth: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = PValueArg::T)]
        p_value: PValueArg,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Draw a survey sample of (developer, file) pairs.
    Sample {
        #[arg(long, default_value_t = DEFAULT_FILE_LIMIT)]
        limit: usize,
    },
    /// Keep corpus repositories at or above the first quartile of every metric.
    FilterCorpus {
        /// CSV with columns repo, commits, files, developers and optional language.
        metrics: PathBuf,
    },
    /// Validate survey answers and join them with mined features.
    IngestTruth {
        truth: PathBuf,
        /// Write answers that could not be joined to this CSV.
        #[arg(long, value_name = "PATH")]
        unresolved: Option<PathBuf>,
        #[command(flatten)]
        columns: ColumnArgs,
    },
}

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub repos: Vec<PathBuf>,
    pub seed: u64,
    pub folds: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub mining: MiningSettings,
}

fn read_aliases(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let (Some(a), Some(b)) = (record.get(0), record.get(1)) else {
            return Err(CliError::InvalidAliasMap(format!("line {} needs two columns", i + 1)).into());
        };
        if i == 0 && a == "email_a" {
            continue;
        }
        pairs.push((a.to_string(), b.to_string()));
    }
    Ok(pairs)
}

fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .map(|d| d.join("file-experts"))
}

impl GlobalArgs {
    fn config(&self) -> Result<RunConfig> {
        for (name, value) in [("--alias-threshold", self.alias_threshold), ("--mod-threshold", self.mod_threshold)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CliError::ThresholdOutOfRange { name, value }.into());
            }
        }
        if self.folds < 2 {
            return Err(CliError::TooFewFolds(self.folds).into());
        }
        let manual_aliases = self.aliases.as_deref().map(read_aliases).transpose()?.unwrap_or_default();
        let languages_source =
            self.languages.as_ref().map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))).transpose()?;
        let languages = match &languages_source {
            Some(text) => LanguageTable::from_toml(text)?,
            None => LanguageTable::default(),
        };
        let cache_dir = if self.no_cache { None } else { self.cache_dir.clone().or_else(default_cache_dir) };
        Ok(RunConfig {
            repos: self.repos.clone(),
            seed: self.seed,
            folds: self.folds,
            format: self.format,
            out: self.out.clone(),
            mining: MiningSettings {
                branch: self.branch.clone(),
                aliases: AliasConfig { threshold: self.alias_threshold, manual_aliases },
                mod_threshold: self.mod_threshold,
                languages,
                languages_source,
                reference_time: self.reference_time,
                cache_dir,
            },
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.global.config()?;
    match cli.command {
        Command::Mine { history_dir } => commands::mine(&config, history_dir.as_deref()),
        Command::Features { developer, file } => commands::features(&config, developer.as_deref(), file.as_deref()),
        Command::Rank { technique, file, k } => commands::rank(&config, technique, file.as_deref(), k),
        Command::Calibrate { technique, truth, columns } => commands::calibrate(&config, technique, &truth, &columns.mapping()),
        Command::Evaluate { classifier, truth, grid, columns } => {
            commands::evaluate(&config, classifier, &truth, &grid, &columns.mapping())
        }
        Command::Correlate { truth, p_value, columns } => {
            let method = match p_value {
                PValueArg::T => PValueMethod::TApproximation,
                PValueArg::Permutation => PValueMethod::Permutation,
            };
            commands::correlate(&config, &truth, method, &columns.mapping())
        }
        Command::Sample { limit } => commands::sample(&config, limit),
        Command::FilterCorpus { metrics } => commands::filter_corpus(&config, &metrics),
        Command::IngestTruth { truth, unresolved, columns } => {
            commands::ingest_truth(&config, &truth, unresolved.as_deref(), &columns.mapping())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", errors::render(&e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("file-experts").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_follow_the_subcommand() {
        let cli = parse(&["rank", "--technique", "blame", "--repo", "a", "--repo", "b", "--k", "0.7", "--format", "json"]);
        assert_eq!(cli.global.repos, [PathBuf::from("a"), PathBuf::from("b")]);
        assert_eq!(cli.global.format, Format::Json);
        assert!(matches!(cli.command, Command::Rank { technique: Technique::Blame, k: Some(k), .. } if k == 0.7));
    }

    #[test]
    fn config_rejects_bad_settings() {
        let err = parse(&["--alias-threshold", "1.5", "sample"]).global.config().unwrap_err();
        assert!(matches!(err.downcast_ref::<CliError>(), Some(CliError::ThresholdOutOfRange { .. })));
        let err = parse(&["--folds", "1", "sample"]).global.config().unwrap_err();
        assert!(matches!(err.downcast_ref::<CliError>(), Some(CliError::TooFewFolds(1))));
        let ok = parse(&["--no-cache", "sample"]).global.config().unwrap();
        assert!(ok.mining.cache_dir.is_none());
    }

    #[test]
    fn alias_csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aliases.csv");
        std::fs::write(&path, "email_a,email_b\na@x.org, b@y.org\n").unwrap();
        assert_eq!(read_aliases(&path).unwrap(), [("a@x.org".to_string(), "b@y.org".to_string())]);
        std::fs::write(&path, "a@x.org,b@y.org\nc@x.org\n").unwrap();
        assert!(read_aliases(&path).is_err());
    }
}
