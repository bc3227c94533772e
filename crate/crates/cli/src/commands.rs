use std::fs;
use std::path::{Path, PathBuf};

use newsseg::harness::{
    baseline_predict, load_dataset_schema, load_pages, make_folds, prepare_dataset, run_experiment, run_grid,
    subset_curve, DatasetManifest, ExperimentFile, ExperimentSpec, Predictor, SubsetSchedule,
};
use newsseg::label::{
    load_gray, load_indexed, load_rgb, rgb_to_indexed, save_gray, save_indexed, MaskPolicy, ScanImage, Task,
};
use newsseg::metrics::{format_percent, read_csv, tables_by_task, write_csv, MetricName, MetricReport, Pooling};
use newsseg::postprocess::{load_block_stats, postprocess_page, PostprocessParams};
use newsseg::rescale::{downscale_gray, downscale_labels};
use newsseg::tiling::{
    builtin_config, compute_grid, parse_tile_manifest, plan_budget, split_image, stitch_tiles, write_tile_manifest,
    TileRecord,
};
use newsseg::warp::{apply_warp_gray, apply_warp_labels, default_amplitude, make_warp_field};

use crate::settings::Settings;
use crate::{BaselineArg, CliError, Command, ImageKind, MaskArg, PoolingArg, PredictorArgs, PredictorExtra, TrainingArgs};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command, s: &Settings) -> Result<()> {
    match command {
        Command::Ingest {
            task,
            rgb,
            scan,
            mask_policy,
            output,
        } => {
            let schema = s.schema(task)?;
            let mask = scan.as_deref().map(load_gray).transpose()?;
            let policy = match mask_policy {
                MaskArg::IgnoreOnBlack => MaskPolicy::IgnoreOnBlack,
                MaskArg::None => MaskPolicy::None,
            };
            let img = rgb_to_indexed(&load_rgb(&rgb)?, &schema, mask.as_ref(), policy)?;
            save_indexed(&img, &s.output(&output))?;
            print_histogram(&img);
        }
        Command::Postprocess {
            task,
            input,
            stats,
            page,
            radius,
            height_ratio,
            max_gap,
            angle_tol,
            output,
        } => {
            let schema = s.schema(task)?;
            let img = load_indexed(&input, &schema)?;
            let page = page.unwrap_or_else(|| stem(&input));
            let blocks = match stats {
                Some(path) => load_block_stats(&path)?.remove(&page).unwrap_or_default(),
                None => Vec::new(),
            };
            let params = PostprocessParams {
                radius,
                height_ratio_limit: height_ratio,
                max_gap,
                angle_tol_deg: angle_tol,
            };
            let out = postprocess_page(&img, &blocks, &params)?;
            save_indexed(&out, &s.output(&output))?;
            print_histogram(&out);
        }
        Command::Scale {
            kind,
            input,
            width,
            height,
            output,
        } => match image_kind(&kind) {
            Some(task) => {
                let img = load_indexed(&input, &s.schema(task)?)?;
                save_indexed(&downscale_labels(&img, width, height)?, &s.output(&output))?;
            }
            None => save_gray(&downscale_gray(&load_gray(&input)?, width, height)?, &s.output(&output))?,
        },
        Command::Warp {
            task,
            scan,
            labels,
            amplitude,
            grid,
            out_scan,
            out_labels,
            field,
        } => {
            let seed = s.seed()?;
            let scan = load_gray(&scan)?;
            let labels = load_indexed(&labels, &s.schema(task)?)?;
            let (w, h) = (labels.width(), labels.height());
            let amplitude = amplitude.unwrap_or_else(|| default_amplitude(w, h));
            let f = make_warp_field::<f32>(w, h, grid, amplitude as f32, seed)?;
            save_gray(&apply_warp_gray(&scan, &f)?, &s.output(&out_scan))?;
            save_indexed(&apply_warp_labels(&labels, &f)?, &s.output(&out_labels))?;
            if let Some(path) = field {
                f.save(&s.output(&path))?;
            }
        }
        Command::PlanBudget {
            pixels,
            aspect,
            tolerance,
        } => {
            let (w, h) = plan_budget(pixels, aspect, tolerance)?;
            println!("{w}x{h}");
        }
        Command::Tile {
            tiling,
            kind,
            input,
            output,
        } => {
            let cfg = builtin_config(&tiling)?;
            let grid = compute_grid(&cfg)?;
            let dir = s.output(&output);
            let name = stem(&input);
            let records: Vec<TileRecord> = grid
                .placements
                .iter()
                .map(|p| TileRecord {
                    config: cfg.name.clone(),
                    index: p.index,
                    x0: p.x0,
                    y0: p.y0,
                    width: cfg.tile_w,
                    height: cfg.tile_h,
                    path: PathBuf::from(format!("{name}-{:02}.png", p.index)),
                })
                .collect();
            match image_kind(&kind) {
                Some(task) => {
                    let tiles = split_image(&load_indexed(&input, &s.schema(task)?)?, &grid)?;
                    for (t, r) in tiles.iter().zip(&records) {
                        save_indexed(t, &dir.join(&r.path))?;
                    }
                }
                None => {
                    let tiles = split_image(&load_gray(&input)?, &grid)?;
                    for (t, r) in tiles.iter().zip(&records) {
                        save_gray(t, &dir.join(&r.path))?;
                    }
                }
            }
            let manifest = dir.join("tiles.tsv");
            write_text(&manifest, &write_tile_manifest(&records))?;
            println!("{}", manifest.display());
        }
        Command::Stitch { kind, manifest, output } => {
            let text = fs::read_to_string(&manifest).map_err(|e| io_error(&manifest, e))?;
            let mut records = parse_tile_manifest(&text, &manifest)?;
            records.sort_by_key(|r| r.index);
            let first = records
                .first()
                .ok_or_else(|| CliError::Usage(format!("{} lists no tiles", manifest.display())))?;
            let cfg = builtin_config(&first.config)?;
            let grid = compute_grid(&cfg)?;
            for (r, p) in records.iter().zip(&grid.placements) {
                if r.config != cfg.name || (r.index, r.x0, r.y0) != (p.index, p.x0, p.y0) {
                    return Err(newsseg::Error::Config(format!(
                        "tile {} does not match the {} grid",
                        r.index, cfg.name
                    ))
                    .into());
                }
            }
            let base = manifest.parent().unwrap_or(Path::new("."));
            match image_kind(&kind) {
                Some(task) => {
                    let schema = s.schema(task)?;
                    let tiles = records
                        .iter()
                        .map(|r| load_indexed(&base.join(&r.path), &schema))
                        .collect::<newsseg::Result<Vec<_>>>()?;
                    save_indexed(&stitch_tiles(&tiles, &grid)?, &s.output(&output))?;
                }
                None => {
                    let tiles = records
                        .iter()
                        .map(|r| load_gray(&base.join(&r.path)))
                        .collect::<newsseg::Result<Vec<ScanImage>>>()?;
                    save_gray(&stitch_tiles(&tiles, &grid)?, &s.output(&output))?;
                }
            }
        }
        Command::Evaluate {
            task,
            truth,
            pred,
            pooling,
            json,
        } => {
            let schema = s.schema(task)?;
            if truth.len() != pred.len() {
                return Err(CliError::Usage(format!(
                    "{} --truth but {} --pred paths",
                    truth.len(),
                    pred.len()
                )));
            }
            let mut pairs = Vec::new();
            for (t, p) in truth.iter().zip(&pred) {
                for (tf, pf) in expand_pair(t, p)? {
                    pairs.push((load_indexed(&tf, &schema)?, load_indexed(&pf, &schema)?));
                }
            }
            let pooling = match pooling {
                PoolingArg::Pixels => Pooling::Pixels,
                PoolingArg::PageMean => Pooling::PageMean,
            };
            print_report(&MetricReport::<f64>::evaluate(&pairs, pooling)?, json);
        }
        Command::Folds { pages, data, folds } => {
            let seed = s.seed()?;
            let ids = match data {
                Some(dir) => scan_ids(&dir)?,
                None => pages,
            };
            let plan = make_folds(&ids, folds, seed)?;
            for (page, fold) in plan.assignment() {
                println!("{page}\t{fold}");
            }
        }
        Command::Prepare {
            task,
            data,
            tiling,
            folds,
            no_warp,
            output,
        } => {
            let seed = s.seed()?;
            let cfg = builtin_config(&tiling)?;
            let pages = load_pages(&data, &s.schema(task)?)?;
            let ids: Vec<String> = pages.iter().map(|p| p.id.clone()).collect();
            let plan = make_folds(&ids, folds, seed)?;
            let out = s.output(&output);
            let manifest = prepare_dataset(&pages, &cfg, &plan, !no_warp, seed, &out)?;
            println!(
                "{} tiles from {} pages in {}",
                manifest.entries.len(),
                pages.len(),
                out.display()
            );
        }
        Command::Run {
            dataset,
            predictor,
            extra,
            training,
            request,
            json,
        } => {
            let manifest = DatasetManifest::load(&dataset)?;
            load_dataset_schema(&dataset)?;
            let spec = spec(s, &manifest, predictor, extra, &training)?;
            let report = run_experiment(&spec, &dataset, &manifest, &s.output(&request))?;
            print_report(&report, json);
        }
        Command::Grid { experiment, jobs, fold } => {
            let file = ExperimentFile::load(&experiment)?;
            let mut plan = file.grid_plan();
            if let Some(seed) = s.seed_flag {
                plan.seed = seed;
            }
            if let Some(jobs) = jobs {
                plan.jobs = jobs;
            }
            if let Some(fold) = fold {
                plan.fold = fold;
            }
            let pages = file.load_pages()?;
            let outcome = run_grid(&plan, &pages, &file.work_dir)?;
            write_text(&file.work_dir.join("report.csv"), &write_csv(&outcome.rows))?;
            let markdown = outcome.markdown();
            write_text(&file.work_dir.join("report.md"), &markdown)?;
            print!("{markdown}");
            eprintln!(
                "{} cells: {} executed, {} cached, {} failed",
                outcome.rows.len(),
                outcome.executed,
                outcome.cached,
                outcome.failures.len()
            );
            for (spec, reason) in &outcome.failures {
                eprintln!("  {} {} {}: {reason}", spec.task, spec.predictor.name(), spec.config);
            }
            if !outcome.failures.is_empty() {
                return Err(CliError::Incomplete(format!("{} grid cells failed", outcome.failures.len())));
            }
        }
        Command::Curve {
            dataset,
            predictor,
            extra,
            training,
            schedule,
            work,
        } => {
            let manifest = DatasetManifest::load(&dataset)?;
            let spec = spec(s, &manifest, predictor, extra, &training)?;
            let schedule = if schedule.is_empty() {
                SubsetSchedule::default()
            } else {
                SubsetSchedule::new(schedule)?
            };
            let curve = subset_curve(&spec, &schedule, &dataset, &manifest, &s.output(&work))?;
            println!("pages,{}", MetricName::ALL.map(|m| m.as_str()).join(","));
            for p in curve {
                let values: Vec<String> = p.report.values().iter().map(|v| format_percent(*v)).collect();
                println!("{},{}", p.page_count, values.join(","));
            }
        }
        Command::Report { csv, metric } => {
            let text = fs::read_to_string(&csv).map_err(|e| io_error(&csv, e))?;
            let rows = read_csv(&text, &csv)?;
            let tables: Vec<String> = tables_by_task(&rows, metric)
                .iter()
                .map(|(task, table)| table.to_markdown(Some(task)))
                .collect();
            print!("{}", tables.join("\n"));
        }
        Command::Baseline { mode, request } => baseline_predict(&request, mode.into())?,
    }
    Ok(())
}

fn image_kind(kind: &ImageKind) -> Option<Task> {
    if kind.gray {
        None
    } else {
        kind.task
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    newsseg::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn scan_ids(data: &Path) -> Result<Vec<String>> {
    let scans = data.join("scans");
    let mut ids: Vec<String> = fs::read_dir(&scans)
        .map_err(|e| io_error(&scans, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix(".png").map(str::to_string))
        .collect();
    ids.sort();
    Ok(ids)
}

/// A file pair, or every `.png` in `truth` matched by name in `pred`.
fn expand_pair(truth: &Path, pred: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    if !truth.is_dir() {
        return Ok(vec![(truth.to_path_buf(), pred.to_path_buf())]);
    }
    let mut names: Vec<_> = fs::read_dir(truth)
        .map_err(|e| io_error(truth, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .filter(|n| n.to_string_lossy().ends_with(".png"))
        .collect();
    names.sort();
    Ok(names.into_iter().map(|n| (truth.join(&n), pred.join(&n))).collect())
}

fn print_histogram(img: &newsseg::label::IndexedLabelImage) {
    let parts: Vec<String> = img
        .schema()
        .classes()
        .iter()
        .zip(img.histogram())
        .map(|(c, n)| format!("{}={n}", c.name))
        .collect();
    println!("{}x{} {}", img.width(), img.height(), parts.join(" "));
}

fn print_report(report: &MetricReport<f64>, json: bool) {
    if json {
        let rounded: serde_json::Map<String, serde_json::Value> = MetricName::ALL
            .iter()
            .map(|m| (m.as_str().to_string(), serde_json::Value::String(format_percent(report.get(*m)))))
            .collect();
        println!("{}", serde_json::Value::Object(rounded));
    } else {
        for m in MetricName::ALL {
            println!("{:<15}{}", m.as_str(), format_percent(report.get(m)));
        }
    }
}

fn spec(
    s: &Settings,
    manifest: &DatasetManifest,
    predictor: PredictorArgs,
    extra: PredictorExtra,
    training: &TrainingArgs,
) -> Result<ExperimentSpec> {
    let seed = s.seed()?;
    let predictor = match (predictor.baseline, predictor.command) {
        (Some(mode), _) => Predictor::baseline(BaselineArg::into(mode)),
        (None, Some(program)) => Predictor::Command {
            name: extra.name.unwrap_or_else(|| stem(Path::new(&program))),
            program,
            args: extra.args,
        },
        (None, None) => return Err(CliError::Usage("pass --baseline or --command".into())),
    };
    let mut spec = ExperimentSpec::new(manifest.task, &manifest.config, predictor, training.fold, seed)?;
    spec.epochs = training.epochs;
    spec.batch_size = training.batch_size;
    spec.learning_rate = training.learning_rate;
    Ok(spec)
}
