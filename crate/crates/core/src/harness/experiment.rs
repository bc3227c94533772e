use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset_schema, DatasetManifest, TileEntry, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::label::{load_indexed, save_indexed, IndexedLabelImage, LabelSchema, Task, BACKGROUND};
use crate::metrics::{ConfusionMatrix, MetricReport};
use crate::tiling::{builtin_config, compute_grid, stitch_tiles, TileConfig};

pub const DEFAULT_EPOCHS: u32 = 50;
pub const DEFAULT_BATCH_SIZE: u32 = 3;
pub const DEFAULT_LEARNING_RATE: f64 = 2.5e-3;

/// Built-in predictors that need no training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    /// Copies the ground truth.
    Oracle,
    /// Emits the most frequent training class everywhere.
    Majority,
    /// Emits BACKGROUND everywhere.
    Background,
}

impl BaselineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::Oracle => "oracle",
            BaselineMode::Majority => "majority",
            BaselineMode::Background => "background",
        }
    }
}

impl FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(BaselineMode::Oracle),
            "majority" => Ok(BaselineMode::Majority),
            "background" => Ok(BaselineMode::Background),
            _ => Err(Error::Config(format!("unknown baseline {s:?}"))),
        }
    }
}

/// How predictions are produced for a request directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictor {
    /// Runs `program [args..] <request-dir>`.
    Command {
        name: String,
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
    /// Answers the request in-process.
    Baseline { mode: BaselineMode },
}

impl Predictor {
    pub fn baseline(mode: BaselineMode) -> Self {
        Predictor::Baseline { mode }
    }

    pub fn name(&self) -> &str {
        match self {
            Predictor::Command { name, .. } => name,
            Predictor::Baseline { mode } => mode.as_str(),
        }
    }
}

/// One point of the configuration space.
///
/// The training hyperparameters are passed through to the predictor as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub task: Task,
    pub config: String,
    pub predictor: Predictor,
    pub fold: usize,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub seed: u64,
    /// Restricts training to these pages; `None` uses the whole training fold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_pages: Option<Vec<String>>,
}

impl ExperimentSpec {
    pub fn new(task: Task, config: &str, predictor: Predictor, fold: usize, seed: u64) -> Result<Self> {
        builtin_config(config)?;
        Ok(ExperimentSpec {
            task,
            config: config.to_string(),
            predictor,
            fold,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed,
            train_pages: None,
        })
    }

    pub fn tile_config(&self) -> Result<TileConfig> {
        builtin_config(&self.config)
    }
}

/// Files making up a predictor request.
pub const SPEC_FILE: &str = "spec.json";
pub const TRAIN_LIST: &str = "train.txt";
pub const VALIDATE_LIST: &str = "validate.txt";
pub const SCHEMA_FILE: &str = "schema.toml";
pub const PRED_DIR: &str = "pred";

/// A predictor request as seen from inside the request directory.
#[derive(Debug, Clone)]
pub struct Request {
    pub dir: PathBuf,
    pub spec: ExperimentSpec,
    /// Entries carry absolute file paths.
    pub manifest: DatasetManifest,
    pub schema: Arc<LabelSchema>,
    pub train: Vec<String>,
    pub validate: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn id_list(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

impl Request {
    pub fn load(dir: &Path) -> Result<Self> {
        let spec_path = dir.join(SPEC_FILE);
        let spec = serde_json::from_str(&read(&spec_path)?).map_err(|e| Error::Parse {
            path: spec_path,
            line: e.line(),
            reason: e.to_string(),
        })?;
        Ok(Request {
            dir: dir.to_path_buf(),
            spec,
            manifest: DatasetManifest::load(dir)?,
            schema: Arc::new(LabelSchema::load_config(&dir.join(SCHEMA_FILE))?),
            train: id_list(&read(&dir.join(TRAIN_LIST))?),
            validate: id_list(&read(&dir.join(VALIDATE_LIST))?),
        })
    }

    pub fn entry(&self, tile_id: &str) -> Option<&TileEntry> {
        self.manifest.entries.iter().find(|e| e.tile_id == tile_id)
    }

    pub fn prediction_path(&self, tile_id: &str) -> PathBuf {
        prediction_path(&self.dir, tile_id)
    }
}

pub fn prediction_path(request_dir: &Path, tile_id: &str) -> PathBuf {
    request_dir.join(PRED_DIR).join(format!("{tile_id}.png"))
}

/// Writes the request directory for `spec` and returns the validation tiles.
fn write_request(
    spec: &ExperimentSpec,
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    request_dir: &Path,
) -> Result<Vec<TileEntry>> {
    let root = std::path::absolute(dataset_dir).map_err(|e| Error::io(dataset_dir, e))?;
    let validation: Vec<TileEntry> = manifest.validation(spec.fold).cloned().collect();
    if validation.is_empty() {
        return Err(Error::Config(format!(
            "fold {} has no validation pages in this dataset",
            spec.fold
        )));
    }
    let allowed: Option<BTreeSet<&str>> = spec
        .train_pages
        .as_ref()
        .map(|pages| pages.iter().map(String::as_str).collect());
    if let Some(allowed) = &allowed {
        if let Some(bad) = validation.iter().find(|e| allowed.contains(e.page.as_str())) {
            return Err(Error::Config(format!(
                "training subset contains validation page {}",
                bad.page
            )));
        }
    }
    let training: Vec<&TileEntry> = manifest
        .training(spec.fold)
        .filter(|e| allowed.as_ref().is_none_or(|a| a.contains(e.page.as_str())))
        .collect();

    let pred = request_dir.join(PRED_DIR);
    if pred.exists() {
        fs::remove_dir_all(&pred).map_err(|e| Error::io(&pred, e))?;
    }
    fs::create_dir_all(&pred).map_err(|e| Error::io(&pred, e))?;

    let absolute = |e: &TileEntry| TileEntry {
        scan: root.join(&e.scan),
        label: root.join(&e.label),
        ..e.clone()
    };
    let mut entries: Vec<TileEntry> = training.iter().map(|e| absolute(e)).collect();
    entries.extend(validation.iter().map(absolute));
    entries.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
    let request_manifest = DatasetManifest {
        entries,
        ..manifest.clone()
    };
    let spec_json = serde_json::to_string_pretty(spec).expect("spec serializes");
    write(&request_dir.join(SPEC_FILE), &(spec_json + "\n"))?;
    write(&request_dir.join(MANIFEST_FILE), &request_manifest.to_text())?;
    let schema = load_dataset_schema(dataset_dir)?;
    write(&request_dir.join(SCHEMA_FILE), &schema.to_config_string())?;
    let lines = |ids: Vec<&str>| ids.iter().map(|id| format!("{id}\n")).collect::<String>();
    write(
        &request_dir.join(TRAIN_LIST),
        &lines(training.iter().map(|e| e.tile_id.as_str()).collect()),
    )?;
    write(
        &request_dir.join(VALIDATE_LIST),
        &lines(validation.iter().map(|e| e.tile_id.as_str()).collect()),
    )?;
    Ok(validation)
}

fn invoke(predictor: &Predictor, request_dir: &Path) -> Result<()> {
    match predictor {
        Predictor::Baseline { mode } => baseline_predict(request_dir, *mode),
        Predictor::Command { name, program, args } => {
            let failure = |reason: String| Error::PredictorFailure {
                predictor: name.clone(),
                reason,
            };
            let output = Command::new(program)
                .args(args)
                .arg(request_dir)
                .output()
                .map_err(|e| failure(format!("cannot start {program}: {e}")))?;
            if output.status.success() {
                return Ok(());
            }
            let stderr = String::from_utf8_lossy(&output.stderr);
            let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            Err(failure(format!("{} ({})", output.status, tail.join(" | "))))
        }
    }
}

fn load_prediction(
    predictor: &Predictor,
    request_dir: &Path,
    entry: &TileEntry,
    schema: &Arc<LabelSchema>,
) -> Result<IndexedLabelImage> {
    let path = prediction_path(request_dir, &entry.tile_id);
    if !path.exists() {
        return Err(Error::PredictorFailure {
            predictor: predictor.name().to_string(),
            reason: format!("no prediction for tile {}", entry.tile_id),
        });
    }
    let malformed = |reason: String| Error::MalformedPrediction {
        tile: entry.tile_id.clone(),
        reason,
    };
    let img = load_indexed(&path, schema).map_err(|e| match e {
        Error::Io { .. } => e,
        other => malformed(other.to_string()),
    })?;
    if (img.width(), img.height()) != (entry.width, entry.height) {
        return Err(malformed(format!(
            "size {}x{}, expected {}x{}",
            img.width(),
            img.height(),
            entry.width,
            entry.height
        )));
    }
    Ok(img)
}

/// Runs one predictor on one prepared dataset and scores the validation fold.
///
/// Predictions are stitched back to full pages before scoring, so every
/// configuration is measured on the same page area.
pub fn run_experiment(
    spec: &ExperimentSpec,
    dataset_dir: &Path,
    manifest: &DatasetManifest,
    request_dir: &Path,
) -> Result<MetricReport<f64>> {
    if manifest.task != spec.task || manifest.config != spec.config {
        return Err(Error::Config(format!(
            "dataset is {} {}, experiment wants {} {}",
            manifest.task, manifest.config, spec.task, spec.config
        )));
    }
    let grid = compute_grid(&spec.tile_config()?)?;
    let validation = write_request(spec, dataset_dir, manifest, request_dir)?;
    invoke(&spec.predictor, request_dir)?;

    let schema = load_dataset_schema(dataset_dir)?;
    let mut by_page: BTreeMap<&str, Vec<&TileEntry>> = BTreeMap::new();
    for e in &validation {
        by_page.entry(&e.page).or_default().push(e);
    }
    let mut cm = ConfusionMatrix::new(schema.len());
    for tiles in by_page.values_mut() {
        tiles.sort_by_key(|e| e.index);
        let truth: Vec<IndexedLabelImage> = tiles
            .iter()
            .map(|e| load_indexed(&dataset_dir.join(&e.label), &schema))
            .collect::<Result<_>>()?;
        let pred: Vec<IndexedLabelImage> = tiles
            .iter()
            .map(|e| load_prediction(&spec.predictor, request_dir, e, &schema))
            .collect::<Result<_>>()?;
        cm.accumulate(&stitch_tiles(&truth, &grid)?, &stitch_tiles(&pred, &grid)?)?;
    }
    MetricReport::from_confusion(&cm)
}

/// Answers a request directory with one of the built-in baselines.
pub fn baseline_predict(request_dir: &Path, mode: BaselineMode) -> Result<()> {
    let req = Request::load(request_dir)?;
    let majority = if mode == BaselineMode::Majority {
        let mut hist = vec![0u64; req.schema.len()];
        for id in &req.train {
            let entry = req
                .entry(id)
                .ok_or_else(|| Error::Config(format!("training tile {id} not in manifest")))?;
            for (h, n) in hist.iter_mut().zip(load_indexed(&entry.label, &req.schema)?.histogram()) {
                *h += n;
            }
        }
        // first maximum wins, so ties go to the lower class index
        hist.iter()
            .enumerate()
            .fold((BACKGROUND as usize, 0), |best, (i, &n)| if n > best.1 { (i, n) } else { best })
            .0 as u8
    } else {
        BACKGROUND
    };
    fs::create_dir_all(request_dir.join(PRED_DIR)).map_err(|e| Error::io(request_dir, e))?;
    for id in &req.validate {
        let entry = req
            .entry(id)
            .ok_or_else(|| Error::Config(format!("validation tile {id} not in manifest")))?;
        let out = req.prediction_path(id);
        match mode {
            BaselineMode::Oracle => {
                fs::copy(&entry.label, &out).map_err(|e| Error::io(&entry.label, e))?;
            }
            BaselineMode::Majority | BaselineMode::Background => {
                let img = IndexedLabelImage::filled(entry.width, entry.height, majority, req.schema.clone())?;
                save_indexed(&img, &out)?;
            }
        }
    }
    Ok(())
}
