use crate::error::{Error, Result};
use crate::label::Raster;
use crate::tiling::config::TileConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub index: usize,
    pub x0: u32,
    pub y0: u32,
}

/// Tile placements for a config plus the cut lines used when stitching.
///
/// Along each axis, tile `i` owns `[seam[i-1], seam[i])`, with the image
/// borders standing in for the missing outer seams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub config: TileConfig,
    pub origins_x: Vec<u32>,
    pub origins_y: Vec<u32>,
    pub seams_x: Vec<u32>,
    pub seams_y: Vec<u32>,
    /// Row-major from the top-left tile.
    pub placements: Vec<Placement>,
}

fn axis(config: &TileConfig, total: u32, tile: u32, n: u32, label: &str) -> Result<(Vec<u32>, Vec<u32>)> {
    if (n as u64) * (tile as u64) < total as u64 {
        return Err(Error::InsufficientCoverage {
            config: config.name.clone(),
            reason: format!("{n} tiles of {tile} px cannot cover {total} px along {label}"),
        });
    }
    if n == 1 {
        return Ok((vec![0], vec![]));
    }
    let excess = (total - tile) as u64;
    let steps = (n - 1) as u64;
    // round half up of i * excess / steps
    let origins: Vec<u32> = (0..n as u64)
        .map(|i| ((2 * i * excess + steps) / (2 * steps)) as u32)
        .collect();
    let mut seams = Vec::with_capacity(n as usize - 1);
    for pair in origins.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a + tile <= b {
            return Err(Error::InsufficientCoverage {
                config: config.name.clone(),
                reason: format!("tiles at {a} and {b} along {label} do not overlap"),
            });
        }
        seams.push((b + a + tile).div_ceil(2));
    }
    Ok((origins, seams))
}

pub fn compute_grid(config: &TileConfig) -> Result<TileGrid> {
    let (origins_x, seams_x) = axis(config, config.total_w, config.tile_w, config.tiles_x, "x")?;
    let (origins_y, seams_y) = axis(config, config.total_h, config.tile_h, config.tiles_y, "y")?;
    let placements = origins_y
        .iter()
        .flat_map(|&y0| origins_x.iter().map(move |&x0| (x0, y0)))
        .enumerate()
        .map(|(index, (x0, y0))| Placement { index, x0, y0 })
        .collect();
    Ok(TileGrid {
        config: config.clone(),
        origins_x,
        origins_y,
        seams_x,
        seams_y,
        placements,
    })
}

fn owned(seams: &[u32], total: u32) -> Vec<(u32, u32)> {
    let mut bounds = Vec::with_capacity(seams.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(seams);
    bounds.push(total);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn tile_size(&self) -> (u32, u32) {
        (self.config.tile_w, self.config.tile_h)
    }

    pub fn total_size(&self) -> (u32, u32) {
        (self.config.total_w, self.config.total_h)
    }

    /// Half-open `[x0, x1) × [y0, y1)` region of the output owned by tile `index`.
    pub fn owned_region(&self, index: usize) -> (u32, u32, u32, u32) {
        let nx = self.origins_x.len();
        let (ix, iy) = (index % nx, index / nx);
        let xs = owned(&self.seams_x, self.config.total_w)[ix];
        let ys = owned(&self.seams_y, self.config.total_h)[iy];
        (xs.0, ys.0, xs.1, ys.1)
    }

    /// Index of the tile owning pixel `(x, y)`.
    pub fn owner(&self, x: u32, y: u32) -> usize {
        let ix = self.seams_x.iter().take_while(|&&s| s <= x).count();
        let iy = self.seams_y.iter().take_while(|&&s| s <= y).count();
        iy * self.origins_x.len() + ix
    }
}

pub fn split_image<R: Raster>(img: &R, grid: &TileGrid) -> Result<Vec<R>> {
    if img.dims() != grid.total_size() {
        return Err(Error::DimensionMismatch {
            expected: grid.total_size(),
            actual: img.dims(),
            context: Some(format!("config {}", grid.config.name)),
        });
    }
    let (tw, th) = grid.tile_size();
    grid.placements
        .iter()
        .map(|p| img.crop(p.x0, p.y0, tw, th))
        .collect()
}

pub fn stitch_tiles<R: Raster>(tiles: &[R], grid: &TileGrid) -> Result<R> {
    if tiles.len() != grid.len() {
        return Err(Error::TileCountMismatch {
            expected: grid.len(),
            actual: tiles.len(),
        });
    }
    for (i, t) in tiles.iter().enumerate() {
        if t.dims() != grid.tile_size() {
            return Err(Error::DimensionMismatch {
                expected: grid.tile_size(),
                actual: t.dims(),
                context: Some(format!("tile {i}")),
            });
        }
    }
    let (total_w, total_h) = grid.total_size();
    let tile_w = grid.config.tile_w as usize;
    let mut out = vec![tiles[0].pixels()[0]; total_w as usize * total_h as usize];
    for (tile, p) in tiles.iter().zip(&grid.placements) {
        let (x0, y0, x1, y1) = grid.owned_region(p.index);
        let src = tile.pixels();
        let len = (x1 - x0) as usize;
        for y in y0..y1 {
            let s = (y - p.y0) as usize * tile_w + (x0 - p.x0) as usize;
            let d = y as usize * total_w as usize + x0 as usize;
            out[d..d + len].copy_from_slice(&src[s..s + len]);
        }
    }
    tiles[0].rebuild(total_w, total_h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ScanImage;
    use crate::tiling::config::{builtin_config, TilePattern};

    #[test]
    fn vertical_strips_of_0_9() {
        let g = compute_grid(&builtin_config("0.9/v").unwrap()).unwrap();
        assert_eq!(g.origins_y, vec![0, 384, 768]);
        assert_eq!(g.origins_x, vec![0]);
        // midpoints of the overlaps [384,512) and [768,896)
        assert_eq!(g.seams_y, vec![448, 832]);
    }

    #[test]
    fn five_h_tiles_of_1_1() {
        let g = compute_grid(&builtin_config("1.1/h").unwrap()).unwrap();
        assert_eq!(g.origins_x, vec![0, 160, 320, 480, 640]);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn untiled_has_no_seams() {
        let g = compute_grid(&builtin_config("1.1/-").unwrap()).unwrap();
        assert_eq!(g.placements, vec![Placement { index: 0, x0: 0, y0: 0 }]);
        assert!(g.seams_x.is_empty() && g.seams_y.is_empty());
    }

    #[test]
    fn two_h_tiles_cut_at_320() {
        let cfg = TileConfig::new("t", (640, 4), TilePattern::H, (2, 1), (384, 4)).unwrap();
        let g = compute_grid(&cfg).unwrap();
        assert_eq!(g.origins_x, vec![0, 256]);
        assert_eq!(g.seams_x, vec![320]);
        let a = ScanImage::new(384, 4, vec![10; 384 * 4]).unwrap();
        let b = ScanImage::new(384, 4, vec![20; 384 * 4]).unwrap();
        let out = stitch_tiles(&[a, b], &g).unwrap();
        for x in 0..640 {
            assert_eq!(out.get(x, 2), if x < 320 { 10 } else { 20 }, "column {x}");
        }
    }

    #[test]
    fn rounding_that_kills_overlap_is_rejected() {
        // 3 tiles of 4 over 11: origins 0, 4 (3.5 rounded up), 7 -> tiles 0 and 1 abut
        let cfg = TileConfig::new("t", (11, 1), TilePattern::H, (3, 1), (4, 1)).unwrap();
        assert!(matches!(compute_grid(&cfg), Err(Error::InsufficientCoverage { .. })));
    }

    #[test]
    fn split_checks_dimensions_and_stitch_checks_counts() {
        let g = compute_grid(&builtin_config("0.3/-").unwrap()).unwrap();
        let img = ScanImage::new(10, 10, vec![0; 100]).unwrap();
        assert!(matches!(split_image(&img, &g), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            stitch_tiles::<ScanImage>(&[img.clone(), img], &g),
            Err(Error::TileCountMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn owner_matches_owned_region() {
        let g = compute_grid(&builtin_config("3.9/hv").unwrap()).unwrap();
        for idx in 0..g.len() {
            let (x0, y0, x1, y1) = g.owned_region(idx);
            assert_eq!(g.owner(x0, y0), idx);
            assert_eq!(g.owner(x1 - 1, y1 - 1), idx);
        }
    }
}
