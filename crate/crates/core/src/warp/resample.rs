use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{IndexedLabelImage, ScanImage, BACKGROUND};
use crate::num::Scalar;
use crate::rescale::WeightedAreaFilter;
use crate::warp::field::WarpField;

/// Fixed-point iterations used to invert the forward displacement.
pub const INVERSE_ITERATIONS: usize = 3;

/// Unit square centred at `(x, y)` split over the up to four pixels it covers.
/// `None` marks area falling outside the image.
#[inline]
fn footprint<F: Scalar>(x: F, y: F, w: u32, h: u32) -> [(Option<usize>, F); 4] {
    let one = F::one();
    let fx0 = x.floor();
    let fy0 = y.floor();
    let ax = x - fx0;
    let ay = y - fy0;
    let ix = fx0.to_i64().unwrap_or(i64::MIN / 2);
    let iy = fy0.to_i64().unwrap_or(i64::MIN / 2);
    let idx = |px: i64, py: i64| {
        (px >= 0 && py >= 0 && px < w as i64 && py < h as i64)
            .then(|| py as usize * w as usize + px as usize)
    };
    [
        (idx(ix, iy), (one - ax) * (one - ay)),
        (idx(ix + 1, iy), ax * (one - ay)),
        (idx(ix, iy + 1), (one - ax) * ay),
        (idx(ix + 1, iy + 1), ax * ay),
    ]
}

fn round_gray<F: Scalar>(v: F) -> u8 {
    let r = (v + F::from_f64_lossy(0.5)).floor().to_f64_lossy();
    r.clamp(0.0, 255.0) as u8
}

/// Source position for every output pixel, row-major.
fn map_pixels<F: Scalar>(
    w: u32,
    h: u32,
    map: impl Fn(u32, u32) -> (F, F) + Sync,
) -> Vec<(F, F)> {
    (0..h)
        .into_par_iter()
        .flat_map_iter(|y| (0..w).map(move |x| (x, y)).collect::<Vec<_>>())
        .map(|(x, y)| map(x, y))
        .collect()
}

fn sample_gray<F: Scalar>(img: &ScanImage, positions: &[(F, F)], fill: u8) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let src = img.pixels();
    let fill = F::from_u64_lossy(fill as u64);
    positions
        .par_iter()
        .map(|&(x, y)| {
            let v = footprint(x, y, w, h)
                .iter()
                .filter(|(_, a)| *a > F::zero())
                .fold(F::zero(), |acc, &(i, a)| {
                    acc + a * i.map_or(fill, |i| F::from_u64_lossy(src[i] as u64))
                });
            round_gray(v)
        })
        .collect()
}

fn sample_labels<F: Scalar>(img: &IndexedLabelImage, positions: &[(F, F)]) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let src = img.labels();
    let k = img.schema().len();
    let filter = WeightedAreaFilter::<F>::from_schema(img.schema());
    positions
        .par_iter()
        .map_init(
            || vec![F::zero(); k],
            |area, &(x, y)| {
                area.iter_mut().for_each(|a| *a = F::zero());
                for (i, a) in footprint(x, y, w, h) {
                    let class = i.map_or(BACKGROUND, |i| src[i]);
                    area[class as usize] += a;
                }
                filter.winner(area).unwrap_or(BACKGROUND)
            },
        )
        .collect()
}

fn inverse_positions<F: Scalar>(field: &WarpField<F>) -> Vec<(F, F)> {
    let (w, h) = (field.width(), field.height());
    let maxx = F::from_u64_lossy((w - 1) as u64);
    let maxy = F::from_u64_lossy((h - 1) as u64);
    map_pixels(w, h, |x, y| {
        let qx = F::from_u64_lossy(x as u64);
        let qy = F::from_u64_lossy(y as u64);
        let (mut px, mut py) = (qx, qy);
        for _ in 0..INVERSE_ITERATIONS {
            let (dx, dy) = field.sample(px, py);
            px = qx - dx;
            py = qy - dy;
        }
        (px.max(F::zero()).min(maxx), py.max(F::zero()).min(maxy))
    })
}

fn check_field<F: Scalar>(field: &WarpField<F>, w: u32, h: u32) -> Result<()> {
    if (field.width(), field.height()) != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (field.width(), field.height()),
            actual: (w, h),
            context: Some("warp field vs image".into()),
        });
    }
    Ok(())
}

/// Resamples labels through the inverse of `field` with the weighted-area rule.
pub fn apply_warp_labels<F: Scalar>(
    img: &IndexedLabelImage,
    field: &WarpField<F>,
) -> Result<IndexedLabelImage> {
    check_field(field, img.width(), img.height())?;
    if field.is_zero() {
        return Ok(img.clone());
    }
    let pos = inverse_positions(field);
    IndexedLabelImage::new(img.width(), img.height(), sample_labels(img, &pos), img.schema().clone())
}

/// Area-mean resampling of a scan through the inverse of `field`.
pub fn apply_warp_gray<F: Scalar>(img: &ScanImage, field: &WarpField<F>) -> Result<ScanImage> {
    check_field(field, img.width(), img.height())?;
    if field.is_zero() {
        return Ok(img.clone());
    }
    let pos = inverse_positions(field);
    ScanImage::new(img.width(), img.height(), sample_gray(img, &pos, 255))
}

fn rotation_positions(w: u32, h: u32, degrees: f64) -> Vec<(f64, f64)> {
    let (s, c) = (-degrees.to_radians()).sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    map_pixels(w, h, move |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (c * dx - s * dy + cx, s * dx + c * dy + cy)
    })
}

/// Rotates a scan about its centre; uncovered area is filled with `fill`.
pub fn rotate_gray(img: &ScanImage, degrees: f64, fill: u8) -> ScanImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let pos = rotation_positions(img.width(), img.height(), degrees);
    ScanImage::new(img.width(), img.height(), sample_gray(img, &pos, fill)).expect("same dims")
}

/// Rotates labels about the centre with the weighted-area rule; uncovered area is BACKGROUND.
pub fn rotate_labels(img: &IndexedLabelImage, degrees: f64) -> IndexedLabelImage {
    if degrees == 0.0 {
        return img.clone();
    }
    let pos = rotation_positions(img.width(), img.height(), degrees);
    IndexedLabelImage::new(img.width(), img.height(), sample_labels(img, &pos), img.schema().clone())
        .expect("same dims")
}

/// Training-time augmentation: random rotation (always) and contrast stretch (sometimes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub max_rotation_deg: f64,
    pub contrast_probability: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn new(max_rotation_deg: f64, contrast_probability: f64, seed: u64) -> Result<Self> {
        if !(max_rotation_deg >= 0.0 && max_rotation_deg.is_finite()) {
            return Err(Error::Config(format!("max rotation {max_rotation_deg}")));
        }
        if !(0.0..=1.0).contains(&contrast_probability) {
            return Err(Error::Config(format!("contrast probability {contrast_probability}")));
        }
        Ok(AugmentSpec {
            max_rotation_deg,
            contrast_probability,
            seed,
        })
    }

    pub fn with_seed(seed: u64) -> Self {
        AugmentSpec {
            max_rotation_deg: 10.0,
            contrast_probability: 0.9,
            seed,
        }
    }

    /// The concrete rotation angle and contrast decision for this seed.
    pub fn draw(&self) -> AugmentDraw {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let angle_deg = if self.max_rotation_deg > 0.0 {
            rng.gen_range(-self.max_rotation_deg..=self.max_rotation_deg)
        } else {
            0.0
        };
        let contrast = rng.gen::<f64>() < self.contrast_probability;
        AugmentDraw { angle_deg, contrast }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub angle_deg: f64,
    pub contrast: bool,
}

/// Linear stretch of the occupied gray range to `0..=255`.
pub fn stretch_contrast(img: &ScanImage) -> ScanImage {
    let lo = *img.pixels().iter().min().unwrap() as u32;
    let hi = *img.pixels().iter().max().unwrap() as u32;
    if hi == lo {
        return img.clone();
    }
    let span = hi - lo;
    let px = img
        .pixels()
        .iter()
        .map(|&p| (((p as u32 - lo) * 510 + span) / (2 * span)) as u8)
        .collect();
    ScanImage::new(img.width(), img.height(), px).expect("same dims")
}

pub fn augment_photometric(img: &ScanImage, spec: &AugmentSpec) -> ScanImage {
    let draw = spec.draw();
    let rotated = rotate_gray(img, draw.angle_deg, 255);
    if draw.contrast {
        stretch_contrast(&rotated)
    } else {
        rotated
    }
}

/// Geometric half of the augmentation, for the label image paired with a scan.
pub fn augment_labels(img: &IndexedLabelImage, spec: &AugmentSpec) -> IndexedLabelImage {
    rotate_labels(img, spec.draw().angle_deg)
}
