//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use file_experts::analytics::{knowledge_correlations_with, PValueMethod};
use file_experts::blame::file_developers;
use file_experts::expertise::{calibrate as calibrate_curve, classify, technique_scores};
use file_experts::features::{qualify, VARIABLES};
use file_experts::history::write_ndjson;
use file_experts::ml::{cross_validate, default_grid, standardize};
use file_experts::study::{
    detect_bulk_import, first_quartiles, process_answers, quartile_filter, read_answers, sample_files, ColumnMapping, RepoMetrics,
    TruthSource, UnresolvedPair,
};
use file_experts::{CVReport, ClassifierKind, ClassifierSpec, FeatureTable, FeatureVector, ProcessedAnswers, Technique};
use log::{info, warn};
use serde::Serialize;

use crate::errors::CliError;
use crate::output::{csv_records, emit, json, write_atomic, Format};
use crate::pipeline::{combined_table, mine_all, Mined};
use crate::RunConfig;

fn emit_table(config: &RunConfig, table: &FeatureTable) -> Result<()> {
    emit(config.out.as_deref(), |w| match config.format {
        Format::Csv => Ok(table.write_csv(w)?),
        Format::Json => json(w, &table.rows),
    })
}

fn emit_records<S: Serialize>(config: &RunConfig, records: &[S], header: &[&str]) -> Result<()> {
    emit(config.out.as_deref(), |w| match config.format {
        Format::Csv => csv_records(w, records, header),
        Format::Json => json(w, records),
    })
}

pub fn mine(config: &RunConfig, history_dir: Option<&Path>) -> Result<()> {
    let mined = mine_all(&config.repos, &config.mining)?;
    if let Some(dir) = history_dir {
        for m in &mined {
            write_atomic(&dir.join(format!("{}.ndjson", m.name)), |w| Ok(write_ndjson(&m.history, w)?))?;
        }
    }
    emit_table(config, &combined_table(&mined, false))
}

fn canonical_developer(mined: &[Mined], developer: &str) -> String {
    mined.iter().find_map(|m| m.identities.by_email(developer)).map_or_else(|| developer.trim().to_lowercase(), |d| d.canonical_key.clone())
}

pub fn features(config: &RunConfig, developer: Option<&str>, file: Option<&str>) -> Result<()> {
    let mined = mine_all(&config.repos, &config.mining)?;
    let mut table = combined_table(&mined, false);
    let developer = developer.map(|d| canonical_developer(&mined, d));
    table.rows.retain(|r| developer.as_ref().is_none_or(|d| &r.developer == d) && file.is_none_or(|f| r.file == f));
    if table.rows.is_empty() {
        return Err(CliError::NoMatchingPairs.into());
    }
    emit_table(config, &table)
}

#[derive(Serialize)]
struct RankRow<'a> {
    file: &'a str,
    developer: &'a str,
    technique: Technique,
    raw: f64,
    normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expert: Option<bool>,
}

pub fn rank(config: &RunConfig, technique: Technique, file: Option<&str>, k: Option<f64>) -> Result<()> {
    let mined = mine_all(&config.repos, &config.mining)?;
    let table = combined_table(&mined, false);
    let mut scores = technique_scores::<f64>(&table, technique);
    if let Some(file) = file {
        scores.retain(|s| s.file == file);
        if scores.is_empty() {
            return Err(CliError::UnknownFile(file.to_string()).into());
        }
    }
    let experts = k.map(|k| classify(&scores, k)).transpose()?;
    scores.sort_by(|a, b| a.file.cmp(&b.file).then(b.normalized.total_cmp(&a.normalized)).then(a.developer.cmp(&b.developer)));
    let rows: Vec<RankRow> = scores
        .iter()
        .map(|s| RankRow {
            file: &s.file,
            developer: &s.developer,
            technique,
            raw: s.raw,
            normalized: s.normalized,
            expert: experts.as_ref().map(|e| e.contains(&(s.developer.clone(), s.file.clone()))),
        })
        .collect();
    emit_records(config, &rows, &["file", "developer", "technique", "raw", "normalized"])
}

/// Mined repositories, their table with `<repo>/<path>` keys, and processed answers.
struct Truth {
    mined: Vec<Mined>,
    table: FeatureTable,
}

impl Truth {
    fn load(config: &RunConfig) -> Result<Self> {
        let mined = mine_all(&config.repos, &config.mining)?;
        let table = combined_table(&mined, true);
        Ok(Self { mined, table })
    }

    fn process(&self, paths: &[&Path], mapping: &ColumnMapping) -> Result<ProcessedAnswers> {
        let mut answers = Vec::new();
        for path in paths {
            let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
            answers.extend(read_answers(BufReader::new(file), mapping).with_context(|| format!("parsing {}", path.display()))?);
        }
        let sources: Vec<TruthSource> =
            self.mined.iter().map(|m| TruthSource { repo: &m.name, table: &m.table, identities: &m.identities }).collect();
        let processed = process_answers(&answers, &sources)?;
        if !processed.unresolved.is_empty() {
            warn!("{} of {} answers could not be joined with mined features", processed.unresolved.len(), answers.len());
        }
        Ok(processed)
    }

    fn features_of(&self, processed: &ProcessedAnswers) -> Vec<&FeatureVector> {
        processed.entries.iter().map(|e| self.table.get(&e.developer, &e.file).expect("joined answers have features")).collect()
    }
}

#[derive(Serialize)]
struct CurveRow {
    technique: Technique,
    k: f64,
    precision: f64,
    recall: f64,
    f: f64,
    best: bool,
}

pub fn calibrate(config: &RunConfig, technique: Option<Technique>, truth: &Path, mapping: &ColumnMapping) -> Result<()> {
    let data = Truth::load(config)?;
    let processed = data.process(&[truth], mapping)?;
    let techniques = technique.map_or_else(|| Technique::ALL.to_vec(), |t| vec![t]);
    let mut curves = Vec::new();
    for t in techniques {
        let scores = technique_scores::<f64>(&data.table, t);
        let mut curve =
            calibrate_curve(&scores, &processed.oracle, config.folds, config.seed).with_context(|| format!("calibrating {t}"))?;
        curve.technique = Some(t);
        info!("{t}: best k = {} with F = {:.3}", curve.best_k, curve.best().f_measure);
        curves.push(curve);
    }
    match config.format {
        Format::Json => emit(config.out.as_deref(), |w| json(w, &curves)),
        Format::Csv => {
            let rows: Vec<CurveRow> = curves
                .iter()
                .flat_map(|c| {
                    c.points.iter().map(move |p| CurveRow {
                        technique: c.technique.expect("set above"),
                        k: p.k,
                        precision: p.precision,
                        recall: p.recall,
                        f: p.f_measure,
                        best: p.k == c.best_k,
                    })
                })
                .collect();
            emit_records(config, &rows, &["technique", "k", "precision", "recall", "f", "best"])
        }
    }
}

fn load_grid(grid: &str, classifier: Option<ClassifierKind>) -> Result<Vec<ClassifierSpec>> {
    let specs: Vec<ClassifierSpec> = if grid == "default" {
        classifier.map_or_else(|| ClassifierKind::ALL.to_vec(), |k| vec![k]).into_iter().flat_map(default_grid).collect()
    } else {
        let text = std::fs::read_to_string(grid).with_context(|| format!("reading grid {grid}"))?;
        let specs: Vec<ClassifierSpec> = serde_json::from_str(&text).with_context(|| format!("parsing grid {grid}"))?;
        specs.into_iter().filter(|s| classifier.is_none_or(|k| s.kind() == k)).collect()
    };
    for spec in &specs {
        spec.validate()?;
    }
    Ok(specs)
}

#[derive(Serialize)]
struct Evaluation {
    classifier: ClassifierKind,
    selected: ClassifierSpec,
    reports: Vec<CVReport>,
}

#[derive(Serialize)]
struct EvaluationRow {
    classifier: ClassifierKind,
    hyperparams: String,
    mean_p: f64,
    mean_r: f64,
    mean_f: f64,
    selected: bool,
}

pub fn evaluate(config: &RunConfig, classifier: Option<ClassifierKind>, truth: &Path, grid: &str, mapping: &ColumnMapping) -> Result<()> {
    let specs = load_grid(grid, classifier)?;
    let data = Truth::load(config)?;
    let processed = data.process(&[truth], mapping)?;
    let dataset = &processed.dataset;
    for zero in standardize(dataset)?.warnings {
        warn!("feature `{}` is constant and left unscaled", zero.feature);
    }
    let mut by_kind: BTreeMap<ClassifierKind, Vec<ClassifierSpec>> = BTreeMap::new();
    for spec in specs {
        by_kind.entry(spec.kind()).or_default().push(spec);
    }
    let mut evaluations = Vec::new();
    for (kind, specs) in by_kind {
        let reports: Vec<CVReport> = specs
            .iter()
            .map(|s| {
                cross_validate(s, dataset, config.folds, config.seed)
                    .with_context(|| format!("cross-validating {kind} {}", s.hyperparameter_string()))
            })
            .collect::<Result<_>>()?;
        let selected = reports.iter().reduce(|best, r| if r.mean_f > best.mean_f { r } else { best }).expect("non-empty group");
        info!("{kind}: {} with F = {:.3}", selected.spec.hyperparameter_string(), selected.mean_f);
        evaluations.push(Evaluation { classifier: kind, selected: selected.spec.clone(), reports });
    }
    match config.format {
        Format::Json => emit(config.out.as_deref(), |w| json(w, &evaluations)),
        Format::Csv => {
            let rows: Vec<EvaluationRow> = evaluations
                .iter()
                .flat_map(|e| {
                    e.reports.iter().map(|r| EvaluationRow {
                        classifier: e.classifier,
                        hyperparams: r.spec.hyperparameter_string(),
                        mean_p: r.mean_precision,
                        mean_r: r.mean_recall,
                        mean_f: r.mean_f,
                        selected: r.spec == e.selected,
                    })
                })
                .collect();
            emit_records(config, &rows, &["classifier", "hyperparams", "mean_p", "mean_r", "mean_f", "selected"])
        }
    }
}

#[derive(Serialize)]
struct CorrelationRow {
    dataset: String,
    variable: String,
    rho: Option<f64>,
    p: Option<f64>,
    n: usize,
    error: Option<String>,
}

fn dataset_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn correlate(config: &RunConfig, truths: &[std::path::PathBuf], method: PValueMethod, mapping: &ColumnMapping) -> Result<()> {
    let data = Truth::load(config)?;
    let mut datasets: Vec<(String, Vec<&Path>)> = truths.iter().map(|p| (dataset_label(p), vec![p.as_path()])).collect();
    if truths.len() > 1 {
        datasets.push(("pooled".to_string(), truths.iter().map(|p| p.as_path()).collect()));
    }
    let mut rows = Vec::new();
    for (label, paths) in datasets {
        let processed = data.process(&paths, mapping)?;
        let features = data.features_of(&processed);
        let knowledge: Vec<f64> = processed.knowledge().into_iter().map(f64::from).collect();
        for (variable, result) in knowledge_correlations_with(&features, &knowledge, method) {
            rows.push(match result {
                Ok(r) => CorrelationRow { dataset: label.clone(), variable, rho: Some(r.rho), p: Some(r.p_value), n: r.n, error: None },
                Err(e) => {
                    CorrelationRow { dataset: label.clone(), variable, rho: None, p: None, n: knowledge.len(), error: Some(e.to_string()) }
                }
            });
        }
    }
    emit_records(config, &rows, &["dataset", "variable", "rho", "p", "n", "error"])
}

#[derive(Serialize)]
struct SampleRow<'a> {
    developer_email: &'a str,
    file: &'a str,
}

pub fn sample(config: &RunConfig, limit: usize) -> Result<()> {
    let mined = mine_all(&config.repos, &config.mining)?;
    let mut developers_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for m in &mined {
        for (file, devs) in file_developers(&m.history) {
            let key = if mined.len() > 1 { qualify(&m.name, &file) } else { file };
            developers_of.insert(key, devs);
        }
    }
    let pairs = sample_files(&developers_of, limit, config.seed)?;
    let rows: Vec<SampleRow> = pairs.iter().map(|(d, f)| SampleRow { developer_email: d, file: f }).collect();
    emit_records(config, &rows, &["developer_email", "file"])
}

#[derive(Serialize)]
struct CorpusRow {
    repo: String,
    language: Option<String>,
    commits: u64,
    files: u64,
    developers: u64,
    kept: bool,
    reason: &'static str,
}

pub fn filter_corpus(config: &RunConfig, metrics: &Path) -> Result<()> {
    let file = File::open(metrics).with_context(|| format!("reading {}", metrics.display()))?;
    let metrics = RepoMetrics::read_csv(BufReader::new(file))?;
    let kept = quartile_filter(&metrics)?;
    for (group, q1) in first_quartiles(&metrics) {
        info!("{}: first quartiles commits={} files={} developers={}", group.as_deref().unwrap_or("all"), q1[0], q1[1], q1[2]);
    }
    let bulk: BTreeSet<String> = if config.repos.is_empty() {
        BTreeSet::new()
    } else {
        mine_all(&config.repos, &config.mining)?.into_iter().filter(|m| detect_bulk_import(&m.history).flag).map(|m| m.name).collect()
    };
    let rows: Vec<CorpusRow> = metrics
        .into_iter()
        .map(|m| {
            let (kept, reason) = if !kept.contains(&m.repo) {
                (false, "below_first_quartile")
            } else if bulk.contains(&m.repo) {
                (false, "bulk_import")
            } else {
                (true, "kept")
            };
            CorpusRow { repo: m.repo, language: m.language, commits: m.commits, files: m.files, developers: m.developers, kept, reason }
        })
        .collect();
    emit_records(config, &rows, &["repo", "language", "commits", "files", "developers", "kept", "reason"])
}

#[derive(Serialize)]
struct TruthRow<'a> {
    repo: &'a str,
    developer: &'a str,
    file: &'a str,
    knowledge: u8,
    expert: bool,
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

#[derive(Serialize)]
struct IngestReport<'a> {
    entries: Vec<TruthRow<'a>>,
    unresolved: &'a [UnresolvedPair],
}

pub fn ingest_truth(config: &RunConfig, truth: &Path, unresolved: Option<&Path>, mapping: &ColumnMapping) -> Result<()> {
    let data = Truth::load(config)?;
    let processed = data.process(&[truth], mapping)?;
    let features = data.features_of(&processed);
    let entries: Vec<TruthRow> = processed
        .entries
        .iter()
        .zip(features)
        .map(|(e, f)| TruthRow {
            repo: &e.repo,
            developer: &e.developer,
            file: &e.file,
            knowledge: e.knowledge,
            expert: e.is_expert(),
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
        })
        .collect();
    if let Some(path) = unresolved {
        write_atomic(path, |w| csv_records(w, &processed.unresolved, &["repo", "developer", "file", "reason"]))?;
    }
    match config.format {
        Format::Json => emit(config.out.as_deref(), |w| json(w, &IngestReport { entries, unresolved: &processed.unresolved })),
        Format::Csv => {
            let header: Vec<&str> = ["repo", "developer", "file", "knowledge", "expert"].into_iter().chain(VARIABLES).collect();
            emit_records(config, &entries, &header)
        }
    }
}
