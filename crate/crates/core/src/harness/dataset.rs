use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::folds::FoldPlan;
use crate::error::{Error, Result};
use crate::label::{encode_gray, encode_indexed, load_indexed, IndexedLabelImage, LabelSchema, ScanImage, Task};
use crate::rescale::{downscale_gray, downscale_labels};
use crate::tiling::{compute_grid, split_image, TileConfig};
use crate::warp::{apply_warp_gray, apply_warp_labels, default_amplitude, make_warp_field, DEFAULT_GRID};

/// A source page: binarized scan plus its indexed ground truth.
#[derive(Debug, Clone)]
pub struct Page {
    pub id: String,
    pub scan: ScanImage,
    pub labels: IndexedLabelImage,
}

impl Page {
    pub fn new(id: impl Into<String>, scan: ScanImage, labels: IndexedLabelImage) -> Result<Self> {
        let id = id.into();
        check_page_id(&id)?;
        if (scan.width(), scan.height()) != (labels.width(), labels.height()) {
            return Err(Error::DimensionMismatch {
                expected: (labels.width(), labels.height()),
                actual: (scan.width(), scan.height()),
                context: Some(format!("scan of page {id}")),
            });
        }
        Ok(Page { id, scan, labels })
    }
}

/// Page ids end up in file names, so they are restricted to `[A-Za-z0-9_.-]`.
pub fn check_page_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("invalid page id {id:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Warped,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Warped => "warped",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "warped" => Ok(Variant::Warped),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

/// One tile of a prepared dataset. Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileEntry {
    pub tile_id: String,
    pub page: String,
    pub fold: usize,
    pub variant: Variant,
    pub index: usize,
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
    pub scan: PathBuf,
    pub label: PathBuf,
}

pub fn tile_id(page: &str, variant: Variant, index: usize) -> String {
    format!("{page}-{}-{index:02}", variant.as_str())
}

/// Line-oriented record of a prepared dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub task: Task,
    pub config: String,
    /// Content hash over every tile file and entry.
    pub digest: String,
    pub entries: Vec<TileEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// The tile entries `prepare_dataset` would write, without touching pixels.
pub fn plan_dataset(
    page_ids: &[String],
    config: &TileConfig,
    plan: &FoldPlan,
    with_warp: bool,
) -> Result<Vec<TileEntry>> {
    let grid = compute_grid(config)?;
    let (tw, th) = grid.tile_size();
    let variants: &[Variant] = if with_warp {
        &[Variant::Original, Variant::Warped]
    } else {
        &[Variant::Original]
    };
    let mut ids = page_ids.to_vec();
    ids.sort();
    let mut entries = Vec::new();
    for page in &ids {
        check_page_id(page)?;
        let fold = plan
            .fold_of(page)
            .ok_or_else(|| Error::Config(format!("page {page} has no fold assignment")))?;
        for &variant in variants {
            for p in &grid.placements {
                let id = tile_id(page, variant, p.index);
                entries.push(TileEntry {
                    scan: PathBuf::from("scan").join(format!("{id}.png")),
                    label: PathBuf::from("label").join(format!("{id}.png")),
                    tile_id: id,
                    page: page.clone(),
                    fold,
                    variant,
                    index: p.index,
                    x0: p.x0,
                    y0: p.y0,
                    width: tw,
                    height: th,
                });
            }
        }
    }
    Ok(entries)
}

/// Seed for a page's warp, derived from the run seed and the page id.
pub fn page_seed(seed: u64, page: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(page.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

struct PreparedPage {
    variants: Vec<(Vec<ScanImage>, Vec<IndexedLabelImage>)>,
}

fn prepare_page(page: &Page, config: &TileConfig, with_warp: bool, seed: u64) -> Result<PreparedPage> {
    let grid = compute_grid(config)?;
    let (w, h) = (config.total_w, config.total_h);
    let scan = downscale_gray(&page.scan, w, h)?;
    let labels = downscale_labels(&page.labels, w, h)?;
    let mut variants = vec![(split_image(&scan, &grid)?, split_image(&labels, &grid)?)];
    if with_warp {
        let field = make_warp_field::<f32>(
            w,
            h,
            DEFAULT_GRID,
            default_amplitude(w, h) as f32,
            page_seed(seed, &page.id),
        )?;
        let scan = apply_warp_gray(&scan, &field)?;
        let labels = apply_warp_labels(&labels, &field)?;
        variants.push((split_image(&scan, &grid)?, split_image(&labels, &grid)?));
    }
    Ok(PreparedPage { variants })
}

/// Downscales every page to the configuration size, optionally adds one
/// warped variant per page, splits into tiles and writes them under `out`.
pub fn prepare_dataset(
    pages: &[Page],
    config: &TileConfig,
    plan: &FoldPlan,
    with_warp: bool,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    let first = pages.first().ok_or(Error::TooFewPages { needed: 1, got: 0 })?;
    let schema = first.labels.schema().clone();
    for p in pages {
        if p.labels.schema() != &schema {
            return Err(Error::SchemaMismatch(
                schema.task().to_string(),
                p.labels.schema().task().to_string(),
            ));
        }
    }
    let ids: Vec<String> = pages.iter().map(|p| p.id.clone()).collect();
    let entries = plan_dataset(&ids, config, plan, with_warp)?;
    let mut sorted: Vec<&Page> = pages.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    fs::create_dir_all(out.join("scan")).map_err(|e| Error::io(out, e))?;
    fs::create_dir_all(out.join("label")).map_err(|e| Error::io(out, e))?;
    let encoded: Vec<Vec<(Vec<u8>, Vec<u8>)>> = sorted
        .par_iter()
        .map(|page| {
            let prepared = prepare_page(page, config, with_warp, seed)?;
            Ok(prepared
                .variants
                .iter()
                .flat_map(|(scans, labels)| {
                    scans
                        .iter()
                        .zip(labels)
                        .map(|(s, l)| (encode_gray(s), encode_indexed(l)))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut hasher = Sha256::new();
    for (entry, (scan, label)) in entries.iter().zip(encoded.iter().flatten()) {
        write_file(&out.join(&entry.scan), scan)?;
        write_file(&out.join(&entry.label), label)?;
        hasher.update(entry.tile_id.as_bytes());
        hasher.update(Sha256::digest(scan));
        hasher.update(Sha256::digest(label));
    }
    let mut manifest = DatasetManifest {
        task: schema.task(),
        config: config.name.clone(),
        digest: String::new(),
        entries,
    };
    hasher.update(manifest.entries_text().as_bytes());
    manifest.digest = hex::encode(hasher.finalize());
    write_file(&out.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
    fs::write(out.join("schema.toml"), schema.to_config_string())
        .map_err(|e| Error::io(out.join("schema.toml"), e))?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

const TILE_HEADER: &str =
    "# tile\ttile_id\tpage\tfold\tvariant\tindex\tx0\ty0\twidth\theight\tscan\tlabel";

impl DatasetManifest {
    fn entries_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(
                out,
                "tile\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.tile_id,
                e.page,
                e.fold,
                e.variant.as_str(),
                e.index,
                e.x0,
                e.y0,
                e.width,
                e.height,
                e.scan.display(),
                e.label.display()
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# newsseg dataset manifest\n");
        writeln!(out, "task\t{}", self.task).unwrap();
        writeln!(out, "config\t{}", self.config).unwrap();
        writeln!(out, "digest\t{}", self.digest).unwrap();
        out.push_str(TILE_HEADER);
        out.push('\n');
        out.push_str(&self.entries_text());
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut task = None;
        let mut config = None;
        let mut digest = None;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                reason,
            };
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "task" if f.len() == 2 => task = Some(f[1].parse::<Task>().map_err(|e| err(e.to_string()))?),
                "config" if f.len() == 2 => config = Some(f[1].to_string()),
                "digest" if f.len() == 2 => digest = Some(f[1].to_string()),
                "tile" if f.len() == 12 => {
                    let num = |i: usize| -> Result<u32> {
                        f[i].parse().map_err(|_| err(format!("bad number {:?}", f[i])))
                    };
                    entries.push(TileEntry {
                        tile_id: f[1].to_string(),
                        page: f[2].to_string(),
                        fold: num(3)? as usize,
                        variant: f[4].parse().map_err(|e: Error| err(e.to_string()))?,
                        index: num(5)? as usize,
                        x0: num(6)?,
                        y0: num(7)?,
                        width: num(8)?,
                        height: num(9)?,
                        scan: PathBuf::from(f[10]),
                        label: PathBuf::from(f[11]),
                    });
                }
                other => return Err(err(format!("unexpected record {other:?}"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            reason: format!("missing {what} record"),
        };
        Ok(DatasetManifest {
            task: task.ok_or_else(|| missing("task"))?,
            config: config.ok_or_else(|| missing("config"))?,
            digest: digest.ok_or_else(|| missing("digest"))?,
            entries,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text, &path)
    }

    /// Tiles scored for `fold`: the original variant of its pages.
    pub fn validation(&self, fold: usize) -> impl Iterator<Item = &TileEntry> {
        self.entries
            .iter()
            .filter(move |e| e.fold == fold && e.variant == Variant::Original)
    }

    /// Tiles available for training when `fold` is held out.
    pub fn training(&self, fold: usize) -> impl Iterator<Item = &TileEntry> {
        self.entries.iter().filter(move |e| e.fold != fold)
    }

    pub fn pages(&self) -> Vec<String> {
        let mut pages: Vec<String> = self.entries.iter().map(|e| e.page.clone()).collect();
        pages.dedup();
        pages
    }
}

/// Loads the schema that `prepare_dataset` stored next to the manifest.
pub fn load_dataset_schema(dir: &Path) -> Result<Arc<LabelSchema>> {
    Ok(Arc::new(LabelSchema::load_config(&dir.join("schema.toml"))?))
}

pub fn load_label_tile(dir: &Path, entry: &TileEntry, schema: &Arc<LabelSchema>) -> Result<IndexedLabelImage> {
    load_indexed(&dir.join(&entry.label), schema)
}
