//! `newsseg`: command-line front end for the page segmentation toolkit.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use newsseg::harness::BaselineMode;
use newsseg::label::Task;

use settings::{parse_weight, CliConfig, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] newsseg::Error),
    #[error("{0}")]
    Incomplete(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use newsseg::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(E::Config(_) | E::UnknownConfig(_)) => 1,
            CliError::Core(E::PredictorFailure { .. } | E::MalformedPrediction { .. }) => 3,
            CliError::Incomplete(_) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "newsseg", version, about = "Page segmentation ground truth, tiling, evaluation and grid search")]
struct Cli {
    /// TOML file with default seed, output directory, schemas and weights.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Label schema file; overrides the built-in schema of the task.
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<PathBuf>,
    /// Class weight override, e.g. `--weight H=6`. Repeatable.
    #[arg(long = "weight", global = true, value_name = "CLASS=WEIGHT", value_parser = parse_weight)]
    weights: Vec<(String, f64)>,
    /// Seed for randomized commands. Required by those commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for relative output paths.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    /// Annotated pixels on black scan pixels become BACKGROUND.
    IgnoreOnBlack,
    /// Use annotation colors as drawn.
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PoolingArg {
    /// One confusion matrix over all pixels.
    Pixels,
    /// Mean of per-page scores.
    PageMean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    /// Copy the ground truth.
    Oracle,
    /// Fill with the most frequent training class.
    Majority,
    /// Fill with BACKGROUND.
    Background,
}

impl From<BaselineArg> for BaselineMode {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Oracle => BaselineMode::Oracle,
            BaselineArg::Majority => BaselineMode::Majority,
            BaselineArg::Background => BaselineMode::Background,
        }
    }
}

/// Image kind for commands that accept either labels or scans.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ImageKind {
    /// Treat the image as an indexed label raster of this task.
    #[arg(long)]
    task: Option<Task>,
    /// Treat the image as a grayscale scan.
    #[arg(long)]
    gray: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PredictorArgs {
    /// Built-in predictor answering in-process.
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// External predictor program, called with the request directory appended.
    #[arg(long, value_name = "PROGRAM")]
    command: Option<String>,
}

#[derive(Debug, Args)]
struct PredictorExtra {
    /// Extra argument for --command, placed before the request directory. Repeatable.
    #[arg(long = "arg", value_name = "ARG", allow_hyphen_values = true)]
    args: Vec<String>,
    /// Name of the external predictor in reports (default: program file name).
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
struct TrainingArgs {
    /// Validation fold.
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Passed through to the predictor.
    #[arg(long, default_value_t = newsseg::harness::DEFAULT_EPOCHS)]
    epochs: u32,
    /// Passed through to the predictor.
    #[arg(long, default_value_t = newsseg::harness::DEFAULT_BATCH_SIZE)]
    batch_size: u32,
    /// Passed through to the predictor.
    #[arg(long, default_value_t = newsseg::harness::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert an RGB annotation layer into an indexed label PNG.
    Ingest {
        /// Task whose label schema applies.
        #[arg(long)]
        task: Task,
        /// RGB annotation image.
        #[arg(long, value_name = "FILE")]
        rgb: PathBuf,
        /// Binarized scan used by the mask policy.
        #[arg(long, value_name = "FILE")]
        scan: Option<PathBuf>,
        /// How the scan masks the annotation.
        #[arg(long, value_enum, default_value_t = MaskArg::IgnoreOnBlack)]
        mask_policy: MaskArg,
        /// Output indexed PNG.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Clean up ground truth: close text blocks and reconnect separators.
    Postprocess {
        /// Task whose label schema applies.
        #[arg(long)]
        task: Task,
        /// Indexed label PNG.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Line-height records `page block height x0 y0 x1 y1`.
        #[arg(long, value_name = "FILE")]
        stats: Option<PathBuf>,
        /// Page id in the stats file (default: input file stem).
        #[arg(long)]
        page: Option<String>,
        /// Closing radius in pixels.
        #[arg(long, default_value_t = 3)]
        radius: u32,
        /// Largest line-height ratio of blocks allowed to merge.
        #[arg(long, default_value_t = 1.25)]
        height_ratio: f64,
        /// Largest separator gap to bridge (default: 1% of the diagonal).
        #[arg(long)]
        max_gap: Option<f64>,
        /// Largest direction difference of bridged separators, in degrees.
        #[arg(long, default_value_t = 10.0)]
        angle_tol: f64,
        /// Output indexed PNG.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Downscale labels (weighted area) or a scan (area mean).
    Scale {
        #[command(flatten)]
        kind: ImageKind,
        /// Image to downscale.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Target width.
        #[arg(long)]
        width: u32,
        /// Target height.
        #[arg(long)]
        height: u32,
        /// Output PNG.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Apply one seeded spline warp to a scan and its labels.
    Warp {
        /// Task whose label schema applies.
        #[arg(long)]
        task: Task,
        /// Grayscale scan.
        #[arg(long, value_name = "FILE")]
        scan: PathBuf,
        /// Indexed label PNG of the same size.
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
        /// Largest displacement in pixels (default: 2% of the shorter side).
        #[arg(long)]
        amplitude: Option<f64>,
        /// Control grid as COLSxROWS.
        #[arg(long, default_value = "4x4", value_parser = parse_size)]
        grid: (u32, u32),
        /// Warped scan output.
        #[arg(long, value_name = "FILE")]
        out_scan: PathBuf,
        /// Warped labels output.
        #[arg(long, value_name = "FILE")]
        out_labels: PathBuf,
        /// Also store the displacement field.
        #[arg(long, value_name = "FILE")]
        field: Option<PathBuf>,
    },
    /// Largest multiple-of-64 resolution within a pixel budget.
    PlanBudget {
        /// Pixel budget per tile.
        #[arg(long)]
        pixels: u64,
        /// Target height/width ratio.
        #[arg(long, default_value_t = newsseg::tiling::DEFAULT_ASPECT)]
        aspect: f64,
        /// Allowed deviation from the aspect ratio.
        #[arg(long, default_value_t = newsseg::tiling::DEFAULT_ASPECT_TOLERANCE)]
        tolerance: f64,
    },
    /// Split an image into the tiles of a configuration.
    Tile {
        /// Configuration name, e.g. 0.9/v.
        #[arg(long = "tiling", value_name = "NAME")]
        tiling: String,
        #[command(flatten)]
        kind: ImageKind,
        /// Image to split.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Directory for the tiles and tiles.tsv.
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Reassemble tiles listed in a tile manifest.
    Stitch {
        #[command(flatten)]
        kind: ImageKind,
        /// tiles.tsv written by `tile`.
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Stitched PNG.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// Task whose label schema applies.
        #[arg(long)]
        task: Task,
        /// Ground-truth PNG, or a directory matched to --pred by file name. Repeatable.
        #[arg(long, value_name = "PATH", required = true)]
        truth: Vec<PathBuf>,
        /// Prediction PNG or directory, paired with --truth in order. Repeatable.
        #[arg(long, value_name = "PATH", required = true)]
        pred: Vec<PathBuf>,
        /// How scores combine across pages.
        #[arg(long, value_enum, default_value_t = PoolingArg::Pixels)]
        pooling: PoolingArg,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Assign pages to cross-validation folds.
    Folds {
        /// Page ids, comma separated.
        #[arg(long, value_delimiter = ',', required_unless_present = "data")]
        pages: Vec<String>,
        /// Data directory; page ids are the file stems under scans/.
        #[arg(long, value_name = "DIR", conflicts_with = "pages")]
        data: Option<PathBuf>,
        /// Number of folds.
        #[arg(long, default_value_t = newsseg::harness::DEFAULT_FOLD_COUNT)]
        folds: usize,
    },
    /// Build a tiled dataset for one task and configuration.
    Prepare {
        /// Task whose label schema applies.
        #[arg(long)]
        task: Task,
        /// Directory with scans/<page>.png and labels/<task>/<page>.png.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Configuration name, e.g. 0.9/v.
        #[arg(long = "tiling", value_name = "NAME")]
        tiling: String,
        /// Number of folds.
        #[arg(long, default_value_t = newsseg::harness::DEFAULT_FOLD_COUNT)]
        folds: usize,
        /// Skip the warped variant of each page.
        #[arg(long)]
        no_warp: bool,
        /// Dataset output directory.
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
    },
    /// Run one predictor on a prepared dataset and print its scores.
    Run {
        /// Dataset directory written by `prepare`.
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        extra: PredictorExtra,
        #[command(flatten)]
        training: TrainingArgs,
        /// Request directory handed to the predictor.
        #[arg(long, value_name = "DIR")]
        request: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment file's full grid and write CSV and Markdown reports.
    Grid {
        /// Experiment definition (TOML).
        #[arg(long, value_name = "FILE")]
        experiment: PathBuf,
        /// Cells run concurrently (overrides the file).
        #[arg(long)]
        jobs: Option<usize>,
        /// Validation fold (overrides the file).
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Scores for growing training subsets against a fixed validation fold.
    Curve {
        /// Dataset directory written by `prepare`.
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        extra: PredictorExtra,
        #[command(flatten)]
        training: TrainingArgs,
        /// Training page counts (default 8,16,24,33,41,49,58,66,74,83).
        #[arg(long, value_delimiter = ',')]
        schedule: Vec<usize>,
        /// Directory for the per-point request directories.
        #[arg(long, value_name = "DIR")]
        work: PathBuf,
    },
    /// Render ranking tables from a grid CSV.
    Report {
        /// CSV written by `grid`.
        #[arg(long, value_name = "FILE")]
        csv: PathBuf,
        /// Score to rank by.
        #[arg(long, default_value = "mcc")]
        metric: newsseg::metrics::MetricName,
    },
    /// Answer a request directory with a built-in baseline (predictor protocol).
    Baseline {
        /// Which baseline answers the request.
        #[arg(long, value_enum)]
        mode: BaselineArg,
        /// Request directory.
        request: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once('x').ok_or("expected WxH")?;
    let a = a.parse().map_err(|_| format!("bad number {a:?}"))?;
    let b = b.parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = settings(&cli).and_then(|s| commands::run(cli.command, &s));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("newsseg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(p) = &cli.schema {
        if !p.exists() {
            return Err(CliError::Usage(format!("schema file {} does not exist", p.display())));
        }
    }
    Ok(Settings {
        config,
        schema_flag: cli.schema.clone(),
        weight_flags: cli.weights.clone(),
        seed_flag: cli.seed,
        out_dir_flag: cli.out_dir.clone(),
    })
}
