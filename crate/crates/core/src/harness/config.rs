use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use super::dataset::Page;
use super::experiment::{Predictor, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};
use super::folds::DEFAULT_FOLD_COUNT;
use super::grid::GridPlan;
use crate::error::{Error, Result};
use crate::label::{load_gray, load_indexed, LabelSchema, Task};
use crate::tiling::builtin_configs;

/// Experiment definition file (TOML).
///
/// ```toml
/// data_dir = "pages"
/// work_dir = "work"
/// seed = 7
/// tasks = ["blk", "sep"]
/// configs = ["0.3/-", "1.1/hv"]
///
/// [[predictors]]
/// kind = "command"
/// name = "unet-vgg16"
/// program = "./train.sh"
///
/// [[predictors]]
/// kind = "baseline"
/// mode = "majority"
/// ```
///
/// `data_dir` holds `scans/<page>.png` and `labels/<task>/<page>.png`.
/// Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "all_tasks")]
    pub tasks: Vec<Task>,
    /// Defaults to every built-in configuration.
    #[serde(default)]
    pub configs: Vec<String>,
    pub predictors: Vec<Predictor>,
    #[serde(default)]
    pub fold: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "yes")]
    pub warp: bool,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch")]
    pub batch_size: u32,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Per-task schema files; built-in schemas otherwise.
    #[serde(default)]
    pub schemas: BTreeMap<Task, PathBuf>,
}

fn all_tasks() -> Vec<Task> {
    Task::ALL.to_vec()
}
fn default_folds() -> usize {
    DEFAULT_FOLD_COUNT
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_epochs() -> u32 {
    DEFAULT_EPOCHS
}
fn default_batch() -> u32 {
    DEFAULT_BATCH_SIZE
}
fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        file.data_dir = base.join(&file.data_dir);
        file.work_dir = base.join(&file.work_dir);
        for p in file.schemas.values_mut() {
            *p = base.join(&*p);
        }
        Ok(file)
    }

    pub fn grid_plan(&self) -> GridPlan {
        let configs = if self.configs.is_empty() {
            builtin_configs().into_iter().map(|c| c.name).collect()
        } else {
            self.configs.clone()
        };
        GridPlan {
            tasks: self.tasks.clone(),
            configs,
            predictors: self.predictors.clone(),
            fold: self.fold,
            fold_count: self.folds,
            seed: self.seed,
            with_warp: self.warp,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            jobs: self.jobs,
        }
    }

    pub fn schema(&self, task: Task) -> Result<Arc<LabelSchema>> {
        match self.schemas.get(&task) {
            Some(path) => Ok(Arc::new(LabelSchema::load_config(path)?)),
            None => Ok(Arc::new(LabelSchema::builtin(task))),
        }
    }

    pub fn load_pages(&self) -> Result<Vec<(Task, Vec<Page>)>> {
        self.tasks
            .iter()
            .map(|&task| Ok((task, load_pages(&self.data_dir, &self.schema(task)?)?)))
            .collect()
    }
}

/// Loads every `scans/<page>.png` with its `labels/<task>/<page>.png`.
pub fn load_pages(data_dir: &Path, schema: &Arc<LabelSchema>) -> Result<Vec<Page>> {
    let scans = data_dir.join("scans");
    let mut names: Vec<String> = fs::read_dir(&scans)
        .map_err(|e| Error::io(&scans, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    let labels = data_dir.join("labels").join(schema.task().name());
    names
        .iter()
        .map(|name| {
            let id = name.trim_end_matches(".png");
            Page::new(
                id,
                load_gray(&scans.join(name))?,
                load_indexed(&labels.join(name), schema)?,
            )
        })
        .collect()
}
