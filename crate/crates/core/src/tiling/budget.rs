use crate::error::{Error, Result};

/// Resolutions must be multiples of this on common training stacks.
pub const RESOLUTION_STEP: u32 = 64;
/// Height/width ratio of the newspaper scans.
pub const DEFAULT_ASPECT: f64 = 1.45;
pub const DEFAULT_ASPECT_TOLERANCE: f64 = 0.15;

/// Largest `(w, h)` with both sides multiples of 64, `w·h ≤ max_pixels` and
/// `|h/w − aspect| ≤ tolerance`. Ties go to the closer aspect, then the smaller width.
pub fn plan_budget(max_pixels: u64, aspect: f64, tolerance: f64) -> Result<(u32, u32)> {
    let step = RESOLUTION_STEP as u64;
    let infeasible = Error::NoFeasibleResolution {
        max_pixels,
        aspect,
        tolerance,
    };
    if max_pixels < step * step || !(aspect > 0.0) || !(tolerance >= 0.0) {
        return Err(infeasible);
    }
    let mut best: Option<(u64, f64, u64, u64)> = None;
    let mut w = step;
    while w * step <= max_pixels {
        // tallest multiple of 64 within both the pixel budget and the upper aspect bound
        let by_pixels = max_pixels / w / step * step;
        let by_aspect = (((aspect + tolerance) * w as f64) / step as f64).floor() as u64 * step;
        let mut h = by_pixels.min(by_aspect);
        while h >= step && !within(w, h, aspect, tolerance) && h as f64 / w as f64 > aspect {
            h -= step;
        }
        if h >= step && within(w, h, aspect, tolerance) {
            let area = w * h;
            let dev = (h as f64 / w as f64 - aspect).abs();
            let better = match best {
                None => true,
                Some((a, d, bw, _)) => area > a || (area == a && (dev < d || (dev == d && w < bw))),
            };
            if better {
                best = Some((area, dev, w, h));
            }
        }
        w += step;
    }
    best.map(|(_, _, w, h)| (w as u32, h as u32)).ok_or(infeasible)
}

fn within(w: u64, h: u64, aspect: f64, tolerance: f64) -> bool {
    (h as f64 / w as f64 - aspect).abs() <= tolerance
}
