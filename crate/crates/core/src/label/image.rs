use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::label::schema::{LabelSchema, BACKGROUND};

/// Row-major raster with a single value per pixel.
pub trait Raster: Sized + Clone {
    type Pixel: Copy + PartialEq + Send + Sync;

    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn pixels(&self) -> &[Self::Pixel];

    /// Builds a raster of the same kind (and schema, for labels) from new pixel data.
    fn rebuild(&self, width: u32, height: u32, pixels: Vec<Self::Pixel>) -> Result<Self>;

    fn dims(&self) -> (u32, u32) {
        (self.width(), self.height())
    }

    fn pixel(&self, x: u32, y: u32) -> Self::Pixel {
        self.pixels()[y as usize * self.width() as usize + x as usize]
    }

    fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width() || y0 + h > self.height() {
            return Err(Error::InvalidImage(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width(),
                self.height()
            )));
        }
        let stride = self.width() as usize;
        let src = self.pixels();
        let mut out = Vec::with_capacity(w as usize * h as usize);
        for y in y0..y0 + h {
            let start = y as usize * stride + x0 as usize;
            out.extend_from_slice(&src[start..start + w as usize]);
        }
        self.rebuild(w, h, out)
    }
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
    }
    if len != width as usize * height as usize {
        return Err(Error::InvalidImage(format!(
            "{width}x{height} image needs {} pixels, got {len}",
            width as usize * height as usize
        )));
    }
    Ok(())
}

/// Grid of class indices conforming to a [`LabelSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedLabelImage {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    schema: Arc<LabelSchema>,
}

impl IndexedLabelImage {
    pub fn new(width: u32, height: u32, labels: Vec<u8>, schema: Arc<LabelSchema>) -> Result<Self> {
        check_dims(width, height, labels.len())?;
        let k = schema.len();
        if let Some(pos) = labels.iter().position(|&l| l as usize >= k) {
            return Err(Error::InvalidImage(format!(
                "label {} at pixel {} exceeds class count {k}",
                labels[pos], pos
            )));
        }
        Ok(IndexedLabelImage {
            width,
            height,
            labels,
            schema,
        })
    }

    pub fn filled(width: u32, height: u32, label: u8, schema: Arc<LabelSchema>) -> Result<Self> {
        Self::new(width, height, vec![label; width as usize * height as usize], schema)
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        schema: Arc<LabelSchema>,
        mut f: impl FnMut(u32, u32) -> u8,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels, schema)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn schema(&self) -> &Arc<LabelSchema> {
        &self.schema
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Distinct class indices present in the image.
    pub fn label_set(&self) -> BTreeSet<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..=255u8).filter(|&l| seen[l as usize]).collect()
    }

    /// Per-class pixel counts, indexed by class.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.schema.len()];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    pub fn to_rgb(&self) -> RgbImage {
        let palette = self.schema.palette();
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self.labels.iter().map(|&l| palette[l as usize].0).collect(),
        }
    }
}

impl Raster for IndexedLabelImage {
    type Pixel = u8;

    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn pixels(&self) -> &[u8] {
        &self.labels
    }

    fn rebuild(&self, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        IndexedLabelImage::new(width, height, pixels, self.schema.clone())
    }
}

/// 8-bit grayscale page scan (binarized upstream).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ScanImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(ScanImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }
}

impl Raster for ScanImage {
    type Pixel = u8;

    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn rebuild(&self, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        ScanImage::new(width, height, pixels)
    }
}

/// Annotation layer as exported from an image editor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// What to do with annotated pixels that sit on black ink in the binarized scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskPolicy {
    /// Annotations on black scan pixels become BACKGROUND.
    #[default]
    IgnoreOnBlack,
    None,
}

/// Gray values below this count as black ink in a binarized scan.
pub const INK_THRESHOLD: u8 = 128;

/// Maps an annotation layer to class indices by exact palette match.
pub fn rgb_to_indexed(
    rgb: &RgbImage,
    schema: &Arc<LabelSchema>,
    mask: Option<&ScanImage>,
    mask_policy: MaskPolicy,
) -> Result<IndexedLabelImage> {
    if let Some(mask) = mask {
        if (mask.width, mask.height) != (rgb.width, rgb.height) {
            return Err(Error::DimensionMismatch {
                expected: (rgb.width, rgb.height),
                actual: (mask.width, mask.height),
                context: Some("scan mask".into()),
            });
        }
    }
    let palette = schema.palette();
    let mut labels = Vec::with_capacity(rgb.pixels.len());
    for (i, px) in rgb.pixels.iter().enumerate() {
        let idx = palette.iter().position(|c| c.0 == *px).ok_or_else(|| {
            let x = (i % rgb.width as usize) as u32;
            let y = (i / rgb.width as usize) as u32;
            Error::UnknownColor {
                task: schema.task().to_string(),
                color: *px,
                at: Some((x, y)),
            }
        })? as u8;
        let on_ink = match (mask, mask_policy) {
            (Some(m), MaskPolicy::IgnoreOnBlack) => m.pixels[i] < INK_THRESHOLD,
            _ => false,
        };
        labels.push(if on_ink { BACKGROUND } else { idx });
    }
    IndexedLabelImage::new(rgb.width, rgb.height, labels, schema.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::schema::Task;

    fn blk() -> Arc<LabelSchema> {
        Arc::new(LabelSchema::builtin(Task::Blk))
    }

    #[test]
    fn white_maps_to_background() {
        let rgb = RgbImage::new(3, 2, vec![[255; 3]; 6]).unwrap();
        let img = rgb_to_indexed(&rgb, &blk(), None, MaskPolicy::None).unwrap();
        assert!(img.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn classes_follow_table_order() {
        let s = blk();
        let txt = s.classes()[1].color.0;
        let tab = s.classes()[2].color.0;
        let rgb = RgbImage::new(2, 1, vec![txt, tab]).unwrap();
        let img = rgb_to_indexed(&rgb, &s, None, MaskPolicy::None).unwrap();
        assert_eq!(img.labels(), &[1, 2]);
    }

    #[test]
    fn off_palette_pixel_names_coordinate() {
        let mut px = vec![[255; 3]; 6];
        px[4] = [1, 2, 3];
        let rgb = RgbImage::new(3, 2, px).unwrap();
        match rgb_to_indexed(&rgb, &blk(), None, MaskPolicy::None) {
            Err(Error::UnknownColor { color, at, .. }) => {
                assert_eq!(color, [1, 2, 3]);
                assert_eq!(at, Some((1, 1)));
            }
            other => panic!("expected UnknownColor, got {other:?}"),
        }
    }

    #[test]
    fn annotations_on_ink_are_dropped() {
        let s = blk();
        let tab = s.classes()[2].color.0;
        let rgb = RgbImage::new(2, 1, vec![tab, tab]).unwrap();
        let mask = ScanImage::new(2, 1, vec![0, 255]).unwrap();
        let dropped = rgb_to_indexed(&rgb, &s, Some(&mask), MaskPolicy::IgnoreOnBlack).unwrap();
        assert_eq!(dropped.labels(), &[0, 2]);
        let kept = rgb_to_indexed(&rgb, &s, Some(&mask), MaskPolicy::None).unwrap();
        assert_eq!(kept.labels(), &[2, 2]);
    }

    #[test]
    fn mask_size_must_match() {
        let rgb = RgbImage::new(2, 1, vec![[255; 3]; 2]).unwrap();
        let mask = ScanImage::new(1, 1, vec![0]).unwrap();
        assert!(matches!(
            rgb_to_indexed(&rgb, &blk(), Some(&mask), MaskPolicy::IgnoreOnBlack),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_area_and_bad_labels_rejected() {
        assert!(IndexedLabelImage::new(0, 5, vec![], blk()).is_err());
        assert!(IndexedLabelImage::new(1, 1, vec![3], blk()).is_err());
        assert!(ScanImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn crop_extracts_window() {
        let img = ScanImage::from_fn(4, 3, |x, y| (y * 4 + x) as u8).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.pixels(), &[5, 6, 9, 10]);
        assert!(img.crop(3, 0, 2, 1).is_err());
    }
}
