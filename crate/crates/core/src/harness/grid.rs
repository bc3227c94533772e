use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{prepare_dataset, DatasetManifest, Page};
use super::experiment::{run_experiment, ExperimentSpec, Predictor, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};
use super::folds::{make_folds, nested_subsets, FoldPlan, SubsetSchedule, DEFAULT_FOLD_COUNT};
use crate::error::{Error, Result};
use crate::label::Task;
use crate::metrics::{Cell, MetricName, MetricReport, RankingTable, ReportRow};
use crate::tiling::builtin_config;

/// The cross product to run, plus the settings shared by every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPlan {
    pub tasks: Vec<Task>,
    pub configs: Vec<String>,
    pub predictors: Vec<Predictor>,
    pub fold: usize,
    pub fold_count: usize,
    pub seed: u64,
    pub with_warp: bool,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    /// Upper bound on concurrently running cells.
    pub jobs: usize,
}

impl GridPlan {
    pub fn new(tasks: Vec<Task>, configs: Vec<String>, predictors: Vec<Predictor>, seed: u64) -> Self {
        GridPlan {
            tasks,
            configs,
            predictors,
            fold: 0,
            fold_count: DEFAULT_FOLD_COUNT,
            seed,
            with_warp: true,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            jobs: 1,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.tasks.len() * self.configs.len() * self.predictors.len()
    }

    pub fn spec(&self, task: Task, config: &str, predictor: &Predictor) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(task, config, predictor.clone(), self.fold, self.seed)?;
        spec.epochs = self.epochs;
        spec.batch_size = self.batch_size;
        spec.learning_rate = self.learning_rate;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        for c in &self.configs {
            builtin_config(c)?;
        }
        if self.fold >= self.fold_count {
            return Err(Error::Config(format!(
                "fold {} out of range for {} folds",
                self.fold, self.fold_count
            )));
        }
        let mut names: Vec<&str> = self.predictors.iter().map(Predictor::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate predictor name {:?}", w[0])));
        }
        Ok(())
    }
}

/// MCC table for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub task: Task,
    pub table: RankingTable,
}

impl GridReport {
    pub fn to_markdown(&self) -> String {
        self.table.to_markdown(Some(self.task.name()))
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub reports: Vec<GridReport>,
    /// Every cell in task, predictor, configuration order.
    pub rows: Vec<ReportRow>,
    pub failures: Vec<(ExperimentSpec, String)>,
    /// Cells whose predictor actually ran.
    pub executed: usize,
    /// Cells answered from the cache.
    pub cached: usize,
}

impl GridOutcome {
    pub fn markdown(&self) -> String {
        self.reports
            .iter()
            .map(GridReport::to_markdown)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Cache key: hash of the serialized spec and the dataset content digest.
pub fn cell_key(spec: &ExperimentSpec, manifest_digest: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("spec serializes"));
    h.update([0]);
    h.update(manifest_digest.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    spec: ExperimentSpec,
    digest: String,
    report: MetricReport<f64>,
}

/// On-disk store of finished cells, one JSON file per cell.
#[derive(Debug, Clone)]
pub struct CellCache {
    dir: PathBuf,
}

impl CellCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CellCache { dir: dir.into() }
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Unreadable or mismatching entries count as absent.
    pub fn get(&self, key: &str, spec: &ExperimentSpec, digest: &str) -> Option<MetricReport<f64>> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        (entry.spec == *spec && entry.digest == digest).then_some(entry.report)
    }

    /// Writes through a temporary file so readers never see partial entries.
    pub fn put(&self, key: &str, spec: &ExperimentSpec, digest: &str, report: &MetricReport<f64>) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let entry = CacheEntry {
            spec: spec.clone(),
            digest: digest.to_string(),
            report: report.clone(),
        };
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        let dest = self.path(key);
        fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))
    }
}

pub fn config_slug(config: &str) -> String {
    config.replace('/', "_")
}

/// Folds shared by every task, over the union of page ids.
pub fn grid_folds(pages: &[(Task, Vec<Page>)], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    let mut ids: Vec<String> = pages
        .iter()
        .flat_map(|(_, ps)| ps.iter().map(|p| p.id.clone()))
        .collect();
    ids.sort();
    ids.dedup();
    make_folds(&ids, fold_count, seed)
}

struct GridCell {
    task: Task,
    config: String,
    spec: Result<ExperimentSpec>,
}

/// Runs the cross product of tasks, configurations and predictors.
///
/// Datasets are prepared once per (task, configuration) under
/// `work/datasets`, finished cells are cached under `work/cache`, and a
/// failing cell is reported as failed without stopping the others.
pub fn run_grid(plan: &GridPlan, pages: &[(Task, Vec<Page>)], work: &Path) -> Result<GridOutcome> {
    plan.validate()?;
    let folds = grid_folds(pages, plan.fold_count, plan.seed)?;
    let cache = CellCache::new(work.join("cache"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;

    let pairs: Vec<(Task, &String)> = plan
        .tasks
        .iter()
        .flat_map(|&t| plan.configs.iter().map(move |c| (t, c)))
        .collect();
    let datasets: Vec<Result<(PathBuf, DatasetManifest)>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(task, config)| {
                let task_pages = pages
                    .iter()
                    .find(|(t, _)| *t == task)
                    .map(|(_, p)| p.as_slice())
                    .ok_or_else(|| Error::Config(format!("no pages for task {task}")))?;
                let dir = work.join("datasets").join(task.name()).join(config_slug(config));
                let cfg = builtin_config(config)?;
                let manifest = prepare_dataset(task_pages, &cfg, &folds, plan.with_warp, plan.seed, &dir)?;
                Ok((dir, manifest))
            })
            .collect()
    });

    let mut cells = Vec::with_capacity(plan.cell_count());
    for &task in &plan.tasks {
        for predictor in &plan.predictors {
            for config in &plan.configs {
                cells.push(GridCell {
                    task,
                    config: config.clone(),
                    spec: plan.spec(task, config, predictor),
                });
            }
        }
    }

    let executed = AtomicUsize::new(0);
    let cached = AtomicUsize::new(0);
    let results: Vec<Result<MetricReport<f64>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let spec = cell.spec.as_ref().map_err(|e| Error::Config(e.to_string()))?;
                let at = pairs
                    .iter()
                    .position(|&(t, c)| t == cell.task && *c == cell.config)
                    .expect("pair exists");
                let (dir, manifest) = datasets[at].as_ref().map_err(|e| Error::Config(e.to_string()))?;
                let key = cell_key(spec, &manifest.digest);
                if let Some(report) = cache.get(&key, spec, &manifest.digest) {
                    cached.fetch_add(1, Ordering::Relaxed);
                    return Ok(report);
                }
                executed.fetch_add(1, Ordering::Relaxed);
                let request_dir = work.join("requests").join(&key);
                let report = run_experiment(spec, dir, manifest, &request_dir)?;
                cache.put(&key, spec, &manifest.digest, &report)?;
                Ok(report)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for &task in &plan.tasks {
        let mut entries = Vec::new();
        for (cell, result) in cells.iter().zip(&results).filter(|(c, _)| c.task == task) {
            let spec = cell.spec.as_ref().ok();
            let predictor = spec.map(|s| s.predictor.name().to_string()).unwrap_or_default();
            let value = match result {
                Ok(r) => Cell::Value(r.mcc),
                Err(e) => {
                    if let Some(s) = spec {
                        failures.push((s.clone(), e.to_string()));
                    }
                    Cell::Failed(e.to_string())
                }
            };
            entries.push((predictor.clone(), cell.config.clone(), value));
            rows.push(ReportRow {
                predictor,
                config: cell.config.clone(),
                task: task.name().to_string(),
                fold: plan.fold,
                report: result.as_ref().ok().cloned(),
            });
        }
        reports.push(GridReport {
            task,
            table: RankingTable::from_cells(MetricName::Mcc, entries),
        });
    }
    Ok(GridOutcome {
        reports,
        rows,
        failures,
        executed: executed.into_inner(),
        cached: cached.into_inner(),
    })
}

/// One point of a training-size curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub page_count: usize,
    pub train_pages: Vec<String>,
    pub validation_pages: Vec<String>,
    pub report: MetricReport<f64>,
}

/// Scores `spec` with growing, nested training subsets against a fixed
/// validation fold. The schedule is clipped to the available pages.
pub fn subset_curve(
    spec: &ExperimentSpec,
    schedule: &SubsetSchedule,
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    work: &Path,
) -> Result<Vec<CurvePoint>> {
    let mut training: Vec<String> = manifest.training(spec.fold).map(|e| e.page.clone()).collect();
    training.sort();
    training.dedup();
    let mut validation: Vec<String> = manifest.validation(spec.fold).map(|e| e.page.clone()).collect();
    validation.dedup();
    let schedule = schedule.clip(training.len())?;
    let subsets = nested_subsets(&training, schedule.page_counts(), spec.seed)?;
    subsets
        .into_iter()
        .map(|subset| {
            let mut point_spec = spec.clone();
            point_spec.train_pages = Some(subset.clone());
            let request_dir = work.join(format!("pages-{:03}", subset.len()));
            let report = run_experiment(&point_spec, dataset_dir, manifest, &request_dir)?;
            Ok(CurvePoint {
                page_count: subset.len(),
                train_pages: subset,
                validation_pages: validation.clone(),
                report,
            })
        })
        .collect()
}

/// Named axes of the experiment space. Backbones and s-models are opaque
/// labels for whatever the external predictors implement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationSpace {
    pub tasks: Vec<Task>,
    pub configs: Vec<String>,
    pub backbones: Vec<String>,
    pub smodels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpacePoint {
    pub task: Task,
    pub config: String,
    pub backbone: String,
    pub smodel: String,
}

impl ConfigurationSpace {
    pub fn len(&self) -> usize {
        self.tasks.len() * self.configs.len() * self.backbones.len() * self.smodels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<SpacePoint> {
        let mut out = Vec::with_capacity(self.len());
        for smodel in &self.smodels {
            for &task in &self.tasks {
                for backbone in &self.backbones {
                    for config in &self.configs {
                        out.push(SpacePoint {
                            task,
                            config: config.clone(),
                            backbone: backbone.clone(),
                            smodel: smodel.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}
