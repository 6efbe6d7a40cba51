//! Descriptor matching, robust homography estimation, the scale/rotation
//! validity window, dense refinement, warping and the dice overlap gate.

mod dice;
mod homography;
mod matching;
mod ransac;
mod refine;
mod warp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dice::dice_coefficient;
pub use homography::{
    dlt_homography, similarity_decompose, validity_check, Homography, Point, ValidityFailure,
    ValidityWindow,
};
pub use matching::{match_descriptors, Match, MatchSet};
pub use ransac::{ransac_homography, ransac_points, RansacParams, RansacResult};
pub use refine::{refine_homography, RefineParams, Refinement};
pub use warp::{warp_image, warp_mask};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum GeometryError {
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("source and destination point counts differ ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("degenerate point configuration (collinear or coincident points)")]
    DegenerateConfiguration,
    #[error("too few matches for RANSAC: {got}")]
    TooFewMatches { got: usize },
    #[error("no consensus: best model has {best} inliers (< {required})")]
    NoConsensus { best: usize, required: usize },
    #[error("upper-left 2x2 block of the homography is singular")]
    SingularUpperBlock,
    #[error("homography is not invertible")]
    SingularHomography,
    #[error("mask dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
}

/// Outcome of the validity window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Validity {
    Pass,
    Fail { reason: ValidityFailure },
}

impl Validity {
    pub fn is_pass(&self) -> bool {
        matches!(self, Validity::Pass)
    }
}

/// One pair's registration outcome: the moving-to-fixed homography, its
/// support, similarity decomposition, validity verdict and mask overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub homography: Homography,
    pub inlier_count: usize,
    pub total_matches: usize,
    /// NaN (written as `null`) when the upper block is singular.
    #[serde(with = "crate::nan_as_null")]
    pub scale: f64,
    #[serde(with = "crate::nan_as_null")]
    pub rotation: f64,
    pub validity: Validity,
    pub dice: f64,
}
