//! Cross-validated classification: `clonescope run`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clonescope::manifest::Manifest;
use clonescope::mil::{
    argmax, evaluate, grid_search, instance_scores, make_folds, metrics_from_predictions, train, validation_split,
    Checkpoint, FoldSplit, GridSearch, Method, MetricsReport, MetricsSummary, TrainParams,
};
use clonescope::stats::{wilcoxon_signed_rank, TestResult};
use clonescope::synth::derive_seed;
use clonescope::tiling::NormStats;
use clonescope::{Bag, FeatureScaler, MilModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{embed_images, imported_bags, norm_stats, tile_manifest, TiledImage};
use crate::exit::{CliError, CliResult, ExitKind};
use crate::io::{create_dir, write_json, write_text};
use crate::report::{confusion_csv, format_table};

const NORM_STREAM: u32 = 20;
const INIT_STREAM: u32 = 30;
const TRAIN_STREAM: u32 = 31;
const SPLIT_STREAM: u32 = 32;

/// Title of the per-patch row of the results table.
pub const PATCH_LEVEL: &str = "instance (per patch)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldError {
    pub fold: usize,
    pub method: Option<Method>,
    pub kind: String,
    pub message: String,
}

impl FoldError {
    fn new(fold: usize, method: Option<Method>, e: &CliError) -> Self {
        Self { fold, method, kind: format!("{:?}", e.kind).to_lowercase(), message: e.message.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Option<Method>,
    pub title: String,
    /// One entry per fold; `None` where the fold failed.
    pub folds: Vec<Option<MetricsReport>>,
    pub summary: Option<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub best: String,
    pub other: String,
    pub folds: usize,
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub classes: Vec<String>,
    pub splits: Vec<FoldSplit>,
    pub rows: Vec<MethodResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<FoldError>,
}

pub fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.workdir.join("run")
}

pub fn fold_dir(cfg: &ExperimentConfig, fold: usize) -> PathBuf {
    run_dir(cfg).join(format!("fold{fold}"))
}

pub fn method_index(m: Method) -> u64 {
    Method::ALL.iter().position(|&x| x == m).expect("listed") as u64
}

/// Seeds for model initialisation and training of `method` in `fold`.
pub fn method_seeds(cfg: &ExperimentConfig, fold: usize, method: Method) -> (u64, u64) {
    let k = fold as u64 * 16 + method_index(method);
    (derive_seed(cfg.seed, INIT_STREAM, k), derive_seed(cfg.seed, TRAIN_STREAM, k))
}

pub fn norm_seed(cfg: &ExperimentConfig, fold: usize) -> u64 {
    derive_seed(cfg.seed, NORM_STREAM, fold as u64)
}

/// Inputs shared by every fold.
pub struct Prepared {
    pub manifest: Manifest,
    pub classes: Vec<String>,
    pub tiled: Vec<TiledImage>,
    pub imported: Option<Vec<Bag>>,
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let classes = manifest.classes();
    if classes.len() < 2 {
        return Err(CliError::data("manifest needs at least two clones"));
    }
    let imported = imported_bags(cfg, &manifest)?;
    let tiled = if imported.is_some() { Vec::new() } else { tile_manifest(&manifest, cfg)? };
    Ok(Prepared { manifest, classes, tiled, imported })
}

/// Train and test bags of one fold, standardized with a scaler fitted on
/// the training instances.
pub struct FoldData {
    pub train: Vec<Bag>,
    pub test: Vec<Bag>,
    pub scaler: FeatureScaler,
    pub norm: Option<NormStats>,
}

pub fn fold_data(cfg: &ExperimentConfig, prep: &Prepared, split: &FoldSplit) -> CliResult<FoldData> {
    let train_ids: HashSet<String> = split.train.iter().cloned().collect();
    let (bags, norm) = match &prep.imported {
        Some(b) => (b.clone(), None),
        None => {
            let stats = norm_stats(&prep.tiled, &train_ids, cfg, norm_seed(cfg, split.fold))?;
            (embed_images(&prep.tiled, &stats, &prep.classes)?, Some(stats))
        }
    };
    let (train, test): (Vec<Bag>, Vec<Bag>) = bags.into_iter().partition(|b| train_ids.contains(&b.image_id));
    let test_ids: HashSet<&String> = split.test.iter().collect();
    let test: Vec<Bag> = test.into_iter().filter(|b| test_ids.contains(&b.image_id)).collect();
    if train.is_empty() || test.is_empty() {
        return Err(CliError::data(format!("fold {} has no usable train or test images", split.fold)));
    }
    let scaler = FeatureScaler::fit(train.iter().flat_map(|b| b.instances.iter()))
        .ok_or_else(|| CliError::data("no training instances"))?;
    let train = train.iter().map(|b| scaler.transform_bag(b)).collect();
    let test = test.iter().map(|b| scaler.transform_bag(b)).collect();
    Ok(FoldData { train, test, scaler, norm })
}

pub struct Trained {
    pub model: MilModel,
    pub params: TrainParams,
    pub loss_history: Vec<f64>,
    pub grid: Option<GridSearch>,
}

pub fn train_method(cfg: &ExperimentConfig, classes: &[String], data: &FoldData, fold: usize, method: Method) -> CliResult<Trained> {
    let (init_seed, train_seed) = method_seeds(cfg, fold, method);
    let dim = data.train[0].dim();
    let model = MilModel::new(method, classes.to_vec(), dim, cfg.model, init_seed)?;
    let mut params = TrainParams { seed: train_seed, ..cfg.train };
    let mut grid = None;
    if cfg.grid.enabled {
        let (tr, val) = validation_split(&data.train, cfg.grid.validation_fraction, derive_seed(cfg.seed, SPLIT_STREAM, fold as u64));
        let pick = |idx: &[usize]| idx.iter().map(|&i| data.train[i].clone()).collect::<Vec<_>>();
        let g = grid_search(&model, &pick(&tr), &pick(&val), &cfg.grid.lr, &cfg.grid.wd, &params)?;
        params.lr = g.best_lr;
        params.wd = g.best_wd;
        grid = Some(g);
    }
    let out = train(model, &data.train, &params)?;
    Ok(Trained { model: out.model, params, loss_history: out.loss_history, grid })
}

/// Per-patch metrics of an instance model, every patch carrying its image's label.
pub fn patch_level_metrics(model: &MilModel, bags: &[Bag]) -> MetricsReport {
    let (mut labels, mut predicted, mut scores) = (Vec::new(), Vec::new(), Vec::new());
    for b in bags {
        for row in instance_scores(&b.instances, model) {
            labels.push(b.label);
            predicted.push(argmax(&row));
            scores.push(row);
        }
    }
    metrics_from_predictions(&model.classes, &labels, &predicted, Some(&scores))
}

struct FoldOutcome {
    reports: Vec<(Method, CliResult<MetricsReport>)>,
    patch_level: Option<MetricsReport>,
    error: Option<CliError>,
}

fn run_fold(cfg: &ExperimentConfig, prep: &Prepared, split: &FoldSplit) -> FoldOutcome {
    let dir = fold_dir(cfg, split.fold);
    let data = match fold_data(cfg, prep, split) {
        Ok(d) => d,
        Err(e) => return FoldOutcome { reports: Vec::new(), patch_level: None, error: Some(e) },
    };
    if let Some(n) = &data.norm {
        if let Err(e) = write_json(&dir.join("norm.json"), n) {
            return FoldOutcome { reports: Vec::new(), patch_level: None, error: Some(e) };
        }
    }
    let mut patch_level = None;
    let mut reports = Vec::new();
    for &method in &cfg.methods {
        let result = (|| -> CliResult<MetricsReport> {
            let t = train_method(cfg, &prep.classes, &data, split.fold, method)?;
            let report = evaluate(&t.model, &data.test, method)?;
            if method.is_instance() && patch_level.is_none() {
                patch_level = Some(patch_level_metrics(&t.model, &data.test));
            }
            let mdir = dir.join(method.key());
            create_dir(&mdir)?;
            Checkpoint::from_model(&t.model, Some(t.params), Some(&data.scaler)).save(&mdir.join("checkpoint.json"))?;
            write_json(&mdir.join("metrics.json"), &report)?;
            write_text(&mdir.join("confusion.csv"), &confusion_csv(&report))?;
            let loss: String = t.loss_history.iter().enumerate().map(|(i, l)| format!("{i},{l}\n")).collect();
            write_text(&mdir.join("loss.csv"), &format!("step,loss\n{loss}"))?;
            if let Some(g) = &t.grid {
                write_json(&mdir.join("grid.json"), g)?;
            }
            Ok(report)
        })();
        if let Err(e) = &result {
            log::error!("fold {} {method}: {e}", split.fold);
        }
        reports.push((method, result));
    }
    FoldOutcome { reports, patch_level, error: None }
}

pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<RunSummary> {
    let prep = prepare(cfg)?;
    let splits = make_folds(&prep.manifest.records, cfg.folds, cfg.seed)?;
    let dir = run_dir(cfg);
    create_dir(&dir)?;
    cfg.write(&dir.join("config.json"))?;
    write_json(&dir.join("folds.json"), &splits)?;
    let outcomes: Vec<FoldOutcome> = splits.par_iter().map(|s| run_fold(cfg, &prep, s)).collect();

    let mut errors = Vec::new();
    let mut rows: Vec<MethodResult> = cfg
        .methods
        .iter()
        .map(|&m| MethodResult { method: Some(m), title: m.title().into(), folds: Vec::new(), summary: None })
        .collect();
    let mut patch_row =
        MethodResult { method: None, title: PATCH_LEVEL.into(), folds: Vec::new(), summary: None };
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        if let Some(e) = &outcome.error {
            log::error!("fold {fold}: {e}");
            errors.push(FoldError::new(fold, None, e));
            rows.iter_mut().for_each(|r| r.folds.push(None));
            patch_row.folds.push(None);
            continue;
        }
        for (row, (method, result)) in rows.iter_mut().zip(outcome.reports) {
            match result {
                Ok(r) => row.folds.push(Some(r)),
                Err(e) => {
                    errors.push(FoldError::new(fold, Some(method), &e));
                    row.folds.push(None);
                }
            }
        }
        patch_row.folds.push(outcome.patch_level);
    }
    if cfg.methods.iter().any(|m| m.is_instance()) {
        rows.push(patch_row);
    }
    for r in &mut rows {
        let ok: Vec<MetricsReport> = r.folds.iter().flatten().cloned().collect();
        r.summary = MetricsSummary::from_reports(&ok);
    }
    let comparisons = if cfg.methods.len() >= 2 { compare_methods(&rows) } else { Vec::new() };
    let summary = RunSummary { classes: prep.classes.clone(), splits, rows, comparisons, errors };
    write_json(&dir.join("summary.json"), &summary)?;
    let table = format_table(&summary);
    write_text(&dir.join("table.txt"), &table)?;
    if summary.rows.iter().all(|r| r.summary.is_none()) {
        let numeric = !summary.errors.is_empty() && summary.errors.iter().all(|e| e.kind == "numeric");
        let kind = if numeric { ExitKind::Numeric } else { ExitKind::Data };
        let first = summary.errors.first().map(|e| e.message.as_str()).unwrap_or("no results");
        return Err(CliError { kind, message: format!("every fold failed ({first})") });
    }
    Ok(summary)
}

type MetricFn = fn(&MetricsReport) -> Option<f64>;

const METRICS: [(&str, MetricFn); 5] = [
    ("accuracy", |r| Some(r.accuracy)),
    ("precision", |r| Some(r.precision)),
    ("recall", |r| Some(r.recall)),
    ("f1", |r| Some(r.f1)),
    ("auc", |r| r.auc),
];

/// Paired Wilcoxon tests over folds between the best image-level method of
/// each metric and every other image-level method.
pub fn compare_methods(rows: &[MethodResult]) -> Vec<Comparison> {
    let rows: Vec<&MethodResult> = rows.iter().filter(|r| r.method.is_some()).collect();
    let mut out = Vec::new();
    for (name, f) in METRICS {
        let mean = |r: &MethodResult| {
            let v: Vec<f64> = r.folds.iter().flatten().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let Some(best) = rows
            .iter()
            .filter_map(|r| mean(r).map(|m| (r, m)))
            .min_by(|a, b| b.1.total_cmp(&a.1))
            .map(|(r, _)| *r)
        else {
            continue;
        };
        for other in rows.iter().filter(|r| r.title != best.title) {
            let pairs: Vec<(f64, f64)> = best
                .folds
                .iter()
                .zip(&other.folds)
                .filter_map(|(a, b)| Some((f(a.as_ref()?)?, f(b.as_ref()?)?)))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let (result, note) = match wilcoxon_signed_rank(&x, &y) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(Comparison {
                metric: name.into(),
                best: best.title.clone(),
                other: other.title.clone(),
                folds: pairs.len(),
                result,
                note,
            });
        }
    }
    out
}

pub fn load_summary(workdir: &Path) -> CliResult<RunSummary> {
    crate::io::read_json(&workdir.join("run").join("summary.json"))
}
