//! Experiment harness: folds, dataset preparation, the predictor protocol,
//! grid runs with a resumable cache, and training-size curves.
//!
//! A predictor is any program invoked as `program [args..] <request-dir>`.
//! The request directory holds `spec.json`, `manifest.tsv` (absolute tile
//! paths), `schema.toml`, `train.txt` and `validate.txt`; the predictor must
//! write one indexed PNG per validation tile to `pred/<tile-id>.png` and exit 0.

mod config;
mod dataset;
mod experiment;
mod folds;
mod grid;

pub use config::{load_pages, ExperimentFile};
pub use dataset::{
    check_page_id, load_dataset_schema, load_label_tile, page_seed, plan_dataset, prepare_dataset,
    tile_id, DatasetManifest, Page, TileEntry, Variant, MANIFEST_FILE,
};
pub use experiment::{
    baseline_predict, prediction_path, run_experiment, BaselineMode, ExperimentSpec, Predictor,
    Request, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, PRED_DIR, SCHEMA_FILE,
    SPEC_FILE, TRAIN_LIST, VALIDATE_LIST,
};
pub use folds::{
    make_folds, nested_subsets, FoldPlan, SubsetSchedule, DEFAULT_FOLD_COUNT, DEFAULT_SUBSET_COUNTS,
};
pub use grid::{
    cell_key, config_slug, grid_folds, run_grid, subset_curve, CellCache, ConfigurationSpace,
    CurvePoint, GridOutcome, GridPlan, GridReport, SpacePoint,
};
