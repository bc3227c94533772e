use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TilePattern {
    /// Untiled: the whole page is one tile.
    #[serde(rename = "-")]
    None,
    /// Side-by-side vertical strips.
    #[serde(rename = "h")]
    H,
    /// Stacked horizontal strips.
    #[serde(rename = "v")]
    V,
    /// Two-dimensional grid.
    #[serde(rename = "hv")]
    Hv,
}

impl TilePattern {
    pub fn as_str(self) -> &'static str {
        match self {
            TilePattern::None => "-",
            TilePattern::H => "h",
            TilePattern::V => "v",
            TilePattern::Hv => "hv",
        }
    }
}

impl fmt::Display for TilePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TilePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "-" | "none" => Ok(TilePattern::None),
            "h" => Ok(TilePattern::H),
            "v" => Ok(TilePattern::V),
            "hv" | "h,v" => Ok(TilePattern::Hv),
            other => Err(Error::Config(format!("unknown tile pattern {other:?}"))),
        }
    }
}

/// A named scaling + tiling configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileConfig {
    pub name: String,
    pub total_w: u32,
    pub total_h: u32,
    pub pattern: TilePattern,
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub tile_w: u32,
    pub tile_h: u32,
}

impl TileConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        total: (u32, u32),
        pattern: TilePattern,
        tiles: (u32, u32),
        tile: (u32, u32),
    ) -> Result<Self> {
        let cfg = TileConfig {
            name: name.into(),
            total_w: total.0,
            total_h: total.1,
            pattern,
            tiles_x: tiles.0,
            tiles_y: tiles.1,
            tile_w: tile.0,
            tile_h: tile.1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn untiled(name: impl Into<String>, w: u32, h: u32) -> Result<Self> {
        Self::new(name, (w, h), TilePattern::None, (1, 1), (w, h))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InsufficientCoverage {
                config: self.name.clone(),
                reason,
            })
        };
        if self.total_w == 0 || self.total_h == 0 || self.tile_w == 0 || self.tile_h == 0 {
            return bad("zero-sized total or tile".into());
        }
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return bad("zero tile count".into());
        }
        if self.tile_w > self.total_w || self.tile_h > self.total_h {
            return bad(format!(
                "tile {}x{} exceeds total {}x{}",
                self.tile_w, self.tile_h, self.total_w, self.total_h
            ));
        }
        match self.pattern {
            TilePattern::None if self.tile_count() != 1 => {
                return bad("untiled pattern needs exactly one tile".into())
            }
            TilePattern::H if self.tiles_y != 1 => return bad("h pattern needs one tile row".into()),
            TilePattern::V if self.tiles_x != 1 => {
                return bad("v pattern needs one tile column".into())
            }
            _ => {}
        }
        if (self.tiles_x as u64 * self.tile_w as u64) < self.total_w as u64 {
            return bad(format!(
                "{} tiles of width {} cannot cover {}",
                self.tiles_x, self.tile_w, self.total_w
            ));
        }
        if (self.tiles_y as u64 * self.tile_h as u64) < self.total_h as u64 {
            return bad(format!(
                "{} tiles of height {} cannot cover {}",
                self.tiles_y, self.tile_h, self.total_h
            ));
        }
        Ok(())
    }

    pub fn tile_count(&self) -> u32 {
        self.tiles_x * self.tiles_y
    }

    pub fn total_pixels(&self) -> u64 {
        self.total_w as u64 * self.total_h as u64
    }

    pub fn tile_pixels(&self) -> u64 {
        self.tile_w as u64 * self.tile_h as u64
    }
}

/// The nine configurations of the tiling study, in report column order.
pub fn builtin_configs() -> Vec<TileConfig> {
    use TilePattern::*;
    let rows: [(&str, (u32, u32), TilePattern, (u32, u32), (u32, u32)); 9] = [
        ("0.3/-", (512, 768), None, (1, 1), (512, 768)),
        ("0.6/h", (640, 1024), H, (2, 1), (384, 1024)),
        ("0.9/v", (768, 1280), V, (1, 3), (768, 512)),
        ("1.1/h", (896, 1280), H, (5, 1), (256, 1280)),
        ("1.1/v", (896, 1280), V, (1, 4), (896, 384)),
        ("1.1/hv", (896, 1280), Hv, (2, 2), (512, 768)),
        ("1.1/-", (896, 1280), None, (1, 1), (896, 1280)),
        ("3.0/v", (1280, 2400), V, (1, 3), (1280, 896)),
        ("3.9/hv", (1640, 2400), Hv, (2, 2), (896, 1280)),
    ];
    rows.into_iter()
        .map(|(name, total, pattern, tiles, tile)| {
            TileConfig::new(name, total, pattern, tiles, tile).expect("builtin configs are valid")
        })
        .collect()
}

pub fn builtin_config(name: &str) -> Result<TileConfig> {
    builtin_configs()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnknownConfig(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untiled_is_single_tile() {
        let c = builtin_config("0.3/-").unwrap();
        assert_eq!((c.total_w, c.total_h), (512, 768));
        assert_eq!(c.pattern, TilePattern::None);
        assert_eq!((c.tiles_x, c.tiles_y, c.tile_w, c.tile_h), (1, 1, 512, 768));
    }

    #[test]
    fn rejects_broken_configs() {
        assert!(TileConfig::new("x", (100, 50), TilePattern::H, (2, 1), (40, 50)).is_err());
        assert!(TileConfig::new("x", (100, 50), TilePattern::H, (2, 2), (60, 25)).is_err());
        assert!(TileConfig::new("x", (100, 50), TilePattern::V, (1, 2), (100, 60)).is_err());
        assert!(TileConfig::new("x", (100, 50), TilePattern::None, (2, 1), (60, 50)).is_err());
        assert!(TileConfig::new("x", (100, 50), TilePattern::H, (2, 1), (60, 50)).is_ok());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_config("2.0/x"), Err(Error::UnknownConfig(_))));
    }
}
