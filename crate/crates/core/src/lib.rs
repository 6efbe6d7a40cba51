//! Cross-modal registration and fidelity metrics for ultrawide-field retinal
//! imaging (UWF-RI) and fluorescein angiography (UWF-FA).
//!
//! The crate is `no_std` (with `alloc`): every kernel here is a pure function
//! of in-memory rasters. Decoding, manifests and the command line live in the
//! `uwfkit` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`raster`] normalizes inputs to single-channel `f64` planes and crops the
//!    low-quality periphery with an inscribed ellipse.
//! 2. [`vesselness`] turns both modalities into a common bright-vessel response.
//! 3. [`features`] detects nonlinear scale-space keypoints on the responses and
//!    describes them with 486-bit binary descriptors.
//! 4. [`geometry`] matches descriptors, fits a homography with RANSAC, applies
//!    the scale/rotation validity window and scores overlap with dice.
//! 5. [`metrics`] scores generated frames against ground truth.
//! 6. [`pipeline`] chains the above and carries the dataset bookkeeping (phase
//!    bins, patient-level splits, QC gating, aggregation, synthetic pairs).

#![no_std]
// Whenever std is in the crate graph its inherent float methods shadow
// `num_traits::Float`, leaving those imports unused.
#![allow(unused_imports)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod features;
pub(crate) mod filter;
pub mod geometry;
pub(crate) mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod sum;
pub mod vesselness;

pub use features::{Descriptor, DescriptorSet, Keypoint, KeypointSet, ScaleSpace};
pub use geometry::{Homography, MatchSet, RegistrationResult, Validity};
pub use metrics::MetricReport;
pub use raster::{BinaryMask, Raster};

/// Non-finite-safe JSON: NaN is written as `null` and read back as NaN.
pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
