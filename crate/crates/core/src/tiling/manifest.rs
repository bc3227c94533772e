use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One tile file produced by splitting a page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileRecord {
    pub config: String,
    pub index: usize,
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
    pub path: PathBuf,
}

const HEADER: &str = "# config\tindex\tx0\ty0\twidth\theight\tpath";

/// Tab-separated, one tile per line, `#` lines are comments.
pub fn write_tile_manifest(records: &[TileRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.config,
            r.index,
            r.x0,
            r.y0,
            r.width,
            r.height,
            r.path.display()
        )
        .unwrap();
    }
    out
}

pub fn parse_tile_manifest(text: &str, origin: &Path) -> Result<Vec<TileRecord>> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(err("expected 7 tab-separated fields"));
        }
        let num = |i: usize| -> Result<u32> {
            fields[i].parse().map_err(|_| err(&format!("bad number {:?}", fields[i])))
        };
        records.push(TileRecord {
            config: fields[0].to_string(),
            index: num(1)? as usize,
            x0: num(2)?,
            y0: num(3)?,
            width: num(4)?,
            height: num(5)?,
            path: PathBuf::from(fields[6]),
        });
    }
    Ok(records)
}
