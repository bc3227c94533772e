//! Segmentation tasks, label schemas and indexed label rasters.

mod image;
mod io;
mod schema;

pub use image::{rgb_to_indexed, IndexedLabelImage, MaskPolicy, Raster, RgbImage, ScanImage, INK_THRESHOLD};
pub use io::{
    encode_gray, encode_indexed, load_gray, load_indexed, load_rgb, save_gray, save_indexed, save_rgb,
};
pub use schema::{
    ClassKind, LabelClass, LabelSchema, Rgb, Task, BACKGROUND, DEFAULT_REGION_WEIGHT,
    DEFAULT_SEPARATOR_WEIGHT,
};
