use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-block metadata supplied by an OCR engine.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub block_id: u32,
    pub line_height_px: f64,
    /// Half-open `[x0, x1) × [y0, y1)`.
    pub bbox: (u32, u32, u32, u32),
}

impl BlockStats {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        let (x0, y0, x1, y1) = self.bbox;
        x >= x0 && x < x1 && y >= y0 && y < y1
    }
}

/// Parses `page_id block_id line_height x0 y0 x1 y1` records, grouped by page.
pub fn parse_block_stats(text: &str, origin: &Path) -> Result<BTreeMap<String, Vec<BlockStats>>> {
    let mut pages: BTreeMap<String, Vec<BlockStats>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            reason,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        let int = |i: usize| f[i].parse::<u32>().map_err(|_| err(format!("bad integer {:?}", f[i])));
        let line_height: f64 = f[2].parse().map_err(|_| err(format!("bad line height {:?}", f[2])))?;
        if !(line_height > 0.0 && line_height.is_finite()) {
            return Err(err(format!("line height must be positive, got {line_height}")));
        }
        let bbox = (int(3)?, int(4)?, int(5)?, int(6)?);
        if bbox.2 <= bbox.0 || bbox.3 <= bbox.1 {
            return Err(err("empty bounding box".into()));
        }
        pages.entry(f[0].to_string()).or_default().push(BlockStats {
            block_id: int(1)?,
            line_height_px: line_height,
            bbox,
        });
    }
    Ok(pages)
}

pub fn load_block_stats(path: &Path) -> Result<BTreeMap<String, Vec<BlockStats>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_block_stats(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records_by_page() {
        let text = "# page block lh x0 y0 x1 y1\np1 1 12.5 0 0 10 10\np1 2 20 10 0 20 10\np2 1 9 0 0 5 5\n";
        let m = parse_block_stats(text, Path::new("s")).unwrap();
        assert_eq!(m["p1"].len(), 2);
        assert_eq!(m["p2"][0].line_height_px, 9.0);
        assert!(parse_block_stats("p1 1 0 0 0 1 1", Path::new("s")).is_err());
        assert!(parse_block_stats("p1 1 3 5 0 5 1", Path::new("s")).is_err());
    }
}
