//! Nonlinear scale-space keypoints (AKAZE-style) with 486-bit modified
//! local difference binary (M-LDB) descriptors.

mod describe;
mod detect;
mod scale_space;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use describe::{describe_keypoints, Descriptor, DescriptorSet, DESCRIPTOR_BITS};
pub use detect::{detect_keypoints, detect_keypoints_with, DetectParams};
pub use scale_space::{
    build_scale_space, build_scale_space_with, fed_step_sizes, ScaleLevel, ScaleSpace,
    ScaleSpaceParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("image {width}x{height} is smaller than the 64x64 minimum")]
    ImageTooSmall { width: usize, height: usize },
    #[error("scale space needs at least one octave and one sublevel")]
    EmptySchedule,
    #[error("image must be single-channel, got {0} channels")]
    NotGrayscale(usize),
    #[error("validity mask {mask:?} does not match image {image:?}")]
    MaskMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
}

/// A detected keypoint in full-resolution pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Detection scale in full-resolution pixels.
    pub sigma: f64,
    pub response: f64,
    /// Radians in `(-pi, pi]`.
    pub orientation: f64,
    /// Index of the scale level the keypoint was found on.
    pub level: usize,
}

pub type KeypointSet = Vec<Keypoint>;

/// Maps a pixel coordinate on an octave `octave` level to full resolution.
#[inline]
pub(crate) fn to_full_res(v: f64, octave: usize) -> f64 {
    (v + 0.5) * (1u64 << octave) as f64 - 0.5
}

/// Inverse of [`to_full_res`].
#[inline]
pub(crate) fn to_level(v: f64, octave: usize) -> f64 {
    (v + 0.5) / (1u64 << octave) as f64 - 0.5
}
