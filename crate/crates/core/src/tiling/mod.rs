//! Tiling configurations, overlapping tile grids, and halfway-seam stitching.

mod budget;
mod config;
mod grid;
mod manifest;

pub use budget::{plan_budget, DEFAULT_ASPECT, DEFAULT_ASPECT_TOLERANCE, RESOLUTION_STEP};
pub use config::{builtin_config, builtin_configs, TileConfig, TilePattern};
pub use grid::{compute_grid, split_image, stitch_tiles, Placement, TileGrid};
pub use manifest::{parse_tile_manifest, write_tile_manifest, TileRecord};
