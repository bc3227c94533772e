//! Seeded spline-mesh warps and training-time photometric augmentation.
//!
//! A [`WarpField`] is generated once and applied to both a scan and its label
//! image, so ink and annotation move together. Output pixels are pulled from
//! the source through the inverse of the forward displacement.

mod field;
mod resample;
mod spline;

pub use field::{default_amplitude, make_warp_field, WarpField, DEFAULT_GRID};
pub use resample::{
    apply_warp_gray, apply_warp_labels, augment_labels, augment_photometric, rotate_gray,
    rotate_labels, stretch_contrast, AugmentDraw, AugmentSpec, INVERSE_ITERATIONS,
};
