//! Label-preserving downscaling.
//!
//! Every destination pixel covers a real-valued rectangle of the source. For
//! label images each class accumulates `covered area × class weight` and the
//! heaviest class wins; scans use the plain area-weighted mean. Coverage is
//! computed in integer units (source pixels are `target` units wide, destination
//! pixels `source` units wide), so non-integral ratios such as 3400→1280 are exact.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{IndexedLabelImage, LabelSchema, ScanImage};
use crate::num::Scalar;

/// One source index and its overlap with a destination cell, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    src: usize,
    overlap: u64,
}

fn axis_spans(source: u32, target: u32) -> Vec<Vec<Span>> {
    let (s, t) = (source as u64, target as u64);
    (0..t)
        .map(|d| {
            let lo = d * s;
            let hi = (d + 1) * s;
            let first = lo / t;
            let last = (hi - 1) / t;
            (first..=last)
                .map(|i| Span {
                    src: i as usize,
                    overlap: hi.min((i + 1) * t) - lo.max(i * t),
                })
                .collect()
        })
        .collect()
}

fn check_target(w: u32, h: u32, tw: u32, th: u32) -> Result<()> {
    if tw == 0 || th == 0 || tw > w || th > h {
        return Err(Error::UpscaleRequested {
            from_w: w,
            from_h: h,
            to_w: tw,
            to_h: th,
        });
    }
    Ok(())
}

/// Area filter that scores each class by covered area times its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAreaFilter<F: Scalar> {
    weights: Vec<F>,
}

impl<F: Scalar> WeightedAreaFilter<F> {
    pub fn new(weights: Vec<F>) -> Result<Self> {
        if weights.is_empty() || weights.len() > 256 {
            return Err(Error::InvalidSchema(format!("{} class weights", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > F::zero())) {
            return Err(Error::InvalidSchema(format!("non-positive class weight {w}")));
        }
        Ok(WeightedAreaFilter { weights })
    }

    pub fn from_schema(schema: &LabelSchema) -> Self {
        let weights = schema
            .classes()
            .iter()
            .map(|c| F::from_f64_lossy(c.weight))
            .collect();
        WeightedAreaFilter { weights }
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Class with the highest `area × weight`. Ties go to the higher weight, then
    /// the lower index. Classes with zero area never win; `None` if all are zero.
    pub fn winner(&self, class_area: &[F]) -> Option<u8> {
        let mut best: Option<(usize, F, F)> = None;
        for (c, (&area, &weight)) in class_area.iter().zip(&self.weights).enumerate() {
            if area <= F::zero() {
                continue;
            }
            let score = area * weight;
            let better = match best {
                None => true,
                Some((_, s, w)) => score > s || (score == s && weight > w),
            };
            if better {
                best = Some((c, score, weight));
            }
        }
        best.map(|(c, _, _)| c as u8)
    }

    pub fn downscale(
        &self,
        img: &IndexedLabelImage,
        target_w: u32,
        target_h: u32,
    ) -> Result<IndexedLabelImage> {
        let (w, h) = (img.width(), img.height());
        check_target(w, h, target_w, target_h)?;
        let k = img.schema().len();
        if k > self.weights.len() {
            return Err(Error::InvalidSchema(format!(
                "filter has {} weights, image schema has {k} classes",
                self.weights.len()
            )));
        }
        if (w, h) == (target_w, target_h) {
            return Ok(img.clone());
        }
        let xs = axis_spans(w, target_w);
        let ys = axis_spans(h, target_h);
        let src = img.labels();
        let stride = w as usize;
        let mut out = vec![0u8; target_w as usize * target_h as usize];
        out.par_chunks_mut(target_w as usize)
            .zip(ys.par_iter())
            .for_each(|(row, yspans)| {
                let mut area = vec![0u64; k];
                let mut scores = vec![F::zero(); k];
                for (dst, xspans) in row.iter_mut().zip(&xs) {
                    area.iter_mut().for_each(|a| *a = 0);
                    for ys in yspans {
                        let line = &src[ys.src * stride..];
                        for xs in xspans {
                            area[line[xs.src] as usize] += ys.overlap * xs.overlap;
                        }
                    }
                    for (s, &a) in scores.iter_mut().zip(&area) {
                        *s = F::from_u64_lossy(a);
                    }
                    *dst = self.winner(&scores).expect("destination cell covers source pixels");
                }
            });
        IndexedLabelImage::new(target_w, target_h, out, img.schema().clone())
    }
}

/// Downscales a label image using the weights of its own schema.
pub fn downscale_labels(
    img: &IndexedLabelImage,
    target_w: u32,
    target_h: u32,
) -> Result<IndexedLabelImage> {
    WeightedAreaFilter::<f64>::from_schema(img.schema()).downscale(img, target_w, target_h)
}

/// Area-mean downscale of a scan, rounded half up.
pub fn downscale_gray(img: &ScanImage, target_w: u32, target_h: u32) -> Result<ScanImage> {
    let (w, h) = (img.width(), img.height());
    check_target(w, h, target_w, target_h)?;
    if (w, h) == (target_w, target_h) {
        return Ok(img.clone());
    }
    let xs = axis_spans(w, target_w);
    let ys = axis_spans(h, target_h);
    // every destination cell covers exactly w*h scaled units
    let total = w as u64 * h as u64;
    let src = img.pixels();
    let stride = w as usize;
    let mut out = vec![0u8; target_w as usize * target_h as usize];
    out.par_chunks_mut(target_w as usize)
        .zip(ys.par_iter())
        .for_each(|(row, yspans)| {
            for (dst, xspans) in row.iter_mut().zip(&xs) {
                let mut sum = 0u64;
                for ys in yspans {
                    let line = &src[ys.src * stride..];
                    for xs in xspans {
                        sum += line[xs.src] as u64 * ys.overlap * xs.overlap;
                    }
                }
                *dst = ((2 * sum + total) / (2 * total)) as u8;
            }
        });
    ScanImage::new(target_w, target_h, out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::label::Task;

    fn sep() -> Arc<LabelSchema> {
        Arc::new(LabelSchema::builtin(Task::Sep))
    }

    #[test]
    fn spans_cover_each_destination_exactly() {
        for (s, t) in [(3400u32, 1280u32), (7, 3), (64, 32), (5, 5), (1, 1)] {
            for spans in axis_spans(s, t) {
                assert_eq!(spans.iter().map(|sp| sp.overlap).sum::<u64>(), s as u64);
            }
        }
    }

    #[test]
    fn heavy_separator_wins_small_block() {
        // {BG, BG, BG, V} with weights bg=1, V=4: 3*1 < 1*4
        let img = IndexedLabelImage::new(2, 2, vec![0, 0, 0, 2], sep()).unwrap();
        assert_eq!(downscale_labels(&img, 1, 1).unwrap().labels(), &[2]);
        let uniform = Arc::new(sep().with_uniform_weights());
        let img = IndexedLabelImage::new(2, 2, vec![0, 0, 0, 2], uniform).unwrap();
        assert_eq!(downscale_labels(&img, 1, 1).unwrap().labels(), &[0]);
    }

    #[test]
    fn ties_prefer_heavier_then_lower_index() {
        let f = WeightedAreaFilter::new(vec![1.0f64, 2.0, 2.0]).unwrap();
        // area*weight: 4, 4, 4 -> heavier weight (1 or 2) -> lower index 1
        assert_eq!(f.winner(&[4.0, 2.0, 2.0]), Some(1));
        assert_eq!(f.winner(&[0.0, 0.0, 0.0]), None);
        assert_eq!(f.winner(&[1.0, 0.0, 0.0]), Some(0));
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = IndexedLabelImage::filled(37, 23, 3, sep()).unwrap();
        let out = downscale_labels(&img, 11, 5).unwrap();
        assert!(out.labels().iter().all(|&l| l == 3));
        let g = ScanImage::new(9, 9, vec![77; 81]).unwrap();
        assert!(downscale_gray(&g, 4, 2).unwrap().pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn gray_mean_rounds_half_up() {
        let g = ScanImage::new(2, 1, vec![0, 255]).unwrap();
        assert_eq!(downscale_gray(&g, 1, 1).unwrap().pixels(), &[128]);
    }

    #[test]
    fn identity_size_is_identity() {
        let g = ScanImage::from_fn(6, 4, |x, y| (x * 31 + y * 7) as u8).unwrap();
        assert_eq!(downscale_gray(&g, 6, 4).unwrap(), g);
        let l = IndexedLabelImage::from_fn(6, 4, sep(), |x, y| ((x + y) % 4) as u8).unwrap();
        assert_eq!(downscale_labels(&l, 6, 4).unwrap(), l);
    }

    #[test]
    fn upscale_is_rejected() {
        let g = ScanImage::new(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(downscale_gray(&g, 3, 2), Err(Error::UpscaleRequested { .. })));
        let l = IndexedLabelImage::filled(2, 2, 0, sep()).unwrap();
        assert!(matches!(downscale_labels(&l, 2, 0), Err(Error::UpscaleRequested { .. })));
    }

    #[test]
    fn filter_works_in_single_precision() {
        let img = IndexedLabelImage::new(2, 2, vec![0, 0, 0, 2], sep()).unwrap();
        let f = WeightedAreaFilter::<f32>::from_schema(img.schema());
        assert_eq!(f.downscale(&img, 1, 1).unwrap().labels(), &[2]);
    }
}
