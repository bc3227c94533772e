//! Ground-truth cleanup: solid block shapes and reconnected separator lines.

mod blocks;
mod morph;
mod separators;
mod stats;

pub use blocks::close_blocks;
pub use separators::reconnect_separators;
pub use stats::{load_block_stats, parse_block_stats, BlockStats};

use crate::error::Result;
use crate::label::{ClassKind, IndexedLabelImage};

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessParams {
    pub radius: u32,
    pub height_ratio_limit: f64,
    /// Defaults to 1% of the image diagonal.
    pub max_gap: Option<f64>,
    pub angle_tol_deg: f64,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        PostprocessParams {
            radius: 3,
            height_ratio_limit: 1.25,
            max_gap: None,
            angle_tol_deg: 10.0,
        }
    }
}

pub fn default_max_gap(width: u32, height: u32) -> f64 {
    0.01 * ((width as f64).powi(2) + (height as f64).powi(2)).sqrt()
}

/// Closes every region class, then reconnects every separator class.
pub fn postprocess_page(
    img: &IndexedLabelImage,
    stats: &[BlockStats],
    params: &PostprocessParams,
) -> Result<IndexedLabelImage> {
    let max_gap = params
        .max_gap
        .unwrap_or_else(|| default_max_gap(img.width(), img.height()));
    let mut out = img.clone();
    for (idx, class) in img.schema().classes().iter().enumerate() {
        out = match class.kind() {
            ClassKind::Region => {
                close_blocks(&out, idx as u8, params.radius, stats, params.height_ratio_limit)?
            }
            ClassKind::Separator => {
                reconnect_separators(&out, idx as u8, max_gap, params.angle_tol_deg)?
            }
            ClassKind::Background => out,
        };
    }
    Ok(out)
}
