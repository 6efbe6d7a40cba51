use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SplitRatio;
use crate::features::{DetectParams, ScaleSpaceParams};
use crate::geometry::{RansacParams, RefineParams, ValidityWindow};
use crate::vesselness::{Polarity, VesselParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("dice gate must lie in [0, 1], got {0}")]
    GateOutOfRange(f64),
    #[error("working resolution must be at least 64, got {0}")]
    ResolutionTooSmall(usize),
    #[error("crop margin must lie in [0, 0.5), got {0}")]
    BadMargin(f64),
    #[error("match ratio must lie in (0, 1], got {0}")]
    BadMatchRatio(f64),
    #[error("RANSAC confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("RANSAC threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("vesselness needs at least one positive scale")]
    BadScales,
    #[error("refinement needs a positive stride and nonnegative sigmas")]
    BadRefine,
    #[error("quantiles must lie in (0, 1], got {0}")]
    BadQuantile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselConfig {
    pub scales: Vec<f64>,
    pub beta: f64,
    pub c: Option<f64>,
    /// Vessel polarity of the fixed (RI) image.
    pub ri_polarity: Polarity,
    /// Vessel polarity of the moving (FA) image.
    pub fa_polarity: Polarity,
}

impl Default for VesselConfig {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 4.0, 8.0],
            beta: 0.5,
            c: None,
            ri_polarity: Polarity::DarkOnBright,
            fa_polarity: Polarity::BrightOnDark,
        }
    }
}

impl VesselConfig {
    pub fn params(&self, polarity: Polarity) -> VesselParams {
        VesselParams {
            scales: self.scales.clone(),
            beta: self.beta,
            c: self.c,
            polarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub octaves: usize,
    pub sublevels: usize,
    pub threshold: f64,
    pub max_keypoints: usize,
    /// Lowe ratio for descriptor matching.
    pub match_ratio: f64,
    /// Gradient percentile setting the diffusion contrast factor. Vessel
    /// maps are mostly background, so a low percentile lands in the noise
    /// floor and freezes the diffusion.
    pub contrast_percentile: f64,
    /// The vessel response is divided by this quantile (inside the crop) and
    /// clipped at 1 before feature extraction, so both modalities enter the
    /// scale space at the same amplitude.
    pub response_quantile: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            octaves: 4,
            sublevels: 4,
            threshold: 1e-3,
            max_keypoints: 2000,
            match_ratio: 0.8,
            contrast_percentile: 0.97,
            response_quantile: 0.995,
        }
    }
}

impl FeatureConfig {
    pub fn scale_space(&self) -> ScaleSpaceParams {
        ScaleSpaceParams {
            octaves: self.octaves,
            sublevels: self.sublevels,
            contrast_percentile: self.contrast_percentile,
            ..ScaleSpaceParams::default()
        }
    }

    pub fn detect(&self) -> DetectParams {
        DetectParams {
            threshold: self.threshold,
            max_keypoints: self.max_keypoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    /// Inlier threshold at a 1024-pixel working resolution; scaled with it.
    pub thresh_px: f64,
    pub confidence: f64,
    pub max_iter: usize,
    pub min_inliers: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        let d = RansacParams::default();
        Self {
            thresh_px: d.thresh_px,
            confidence: d.confidence,
            max_iter: d.max_iter,
            min_inliers: d.min_inliers,
        }
    }
}

/// Dense refinement after RANSAC. Lengths are at a 1024-pixel working
/// resolution and scale with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub enabled: bool,
    pub sigmas: Vec<f64>,
    pub iterations: usize,
    pub stride: usize,
    pub min_step: f64,
    pub max_shift: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let d = RefineParams::default();
        Self {
            enabled: true,
            sigmas: d.sigmas,
            iterations: d.iterations,
            stride: d.stride,
            min_step: d.min_step,
            max_shift: d.max_shift,
        }
    }
}

/// Every tunable of the registration and evaluation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Side of the square working raster both images are resampled to.
    pub working_resolution: usize,
    /// Resample inputs to the working resolution; when off, evaluation
    /// requires equal input sizes.
    pub resize: bool,
    /// Fraction of each side trimmed off the inscribed crop ellipse.
    pub crop_margin: f64,
    pub vessel: VesselConfig,
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
    pub refine: RefineConfig,
    pub validity: ValidityWindow,
    /// Pairs with dice below the gate are rejected.
    pub dice_gate: f64,
    pub split_ratio: SplitRatio,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            working_resolution: 1024,
            resize: true,
            crop_margin: 0.02,
            vessel: VesselConfig::default(),
            features: FeatureConfig::default(),
            ransac: RansacConfig::default(),
            refine: RefineConfig::default(),
            validity: ValidityWindow::default(),
            dice_gate: 0.5,
            split_ratio: SplitRatio::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.dice_gate) {
            return Err(ConfigError::GateOutOfRange(self.dice_gate));
        }
        if self.working_resolution < 64 {
            return Err(ConfigError::ResolutionTooSmall(self.working_resolution));
        }
        if !(0.0..0.5).contains(&self.crop_margin) {
            return Err(ConfigError::BadMargin(self.crop_margin));
        }
        let r = self.features.match_ratio;
        if !(r > 0.0 && r <= 1.0) {
            return Err(ConfigError::BadMatchRatio(r));
        }
        for q in [
            self.features.contrast_percentile,
            self.features.response_quantile,
        ] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(ConfigError::BadQuantile(q));
            }
        }
        let c = self.ransac.confidence;
        if !(c > 0.0 && c < 1.0) {
            return Err(ConfigError::BadConfidence(c));
        }
        if !(self.ransac.thresh_px > 0.0) {
            return Err(ConfigError::BadThreshold(self.ransac.thresh_px));
        }
        if self.refine.stride == 0 || self.refine.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(ConfigError::BadRefine);
        }
        if self.vessel.scales.is_empty() || self.vessel.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(ConfigError::BadScales);
        }
        Ok(())
    }

    /// RANSAC parameters at the working resolution.
    pub fn ransac_params(&self, seed: u64) -> RansacParams {
        RansacParams {
            thresh_px: self.ransac.thresh_px * self.working_resolution as f64 / 1024.0,
            confidence: self.ransac.confidence,
            max_iter: self.ransac.max_iter,
            min_inliers: self.ransac.min_inliers,
            seed,
        }
    }

    /// Refinement parameters at the working resolution.
    pub fn refine_params(&self) -> RefineParams {
        let f = self.working_resolution as f64 / 1024.0;
        RefineParams {
            sigmas: self.refine.sigmas.iter().map(|s| s * f).collect(),
            iterations: self.refine.iterations,
            stride: self.refine.stride,
            min_step: self.refine.min_step * f,
            max_shift: self.refine.max_shift * f,
        }
    }

    /// Configuration for synthetic pairs, whose fixed image has bright
    /// vessels and whose moving image has dark ones.
    pub fn synthetic() -> Self {
        let mut cfg = Self::default();
        cfg.vessel.ri_polarity = Polarity::BrightOnDark;
        cfg.vessel.fa_polarity = Polarity::DarkOnBright;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert_eq!(PipelineConfig::default().validate(), Ok(()));
        assert_eq!(PipelineConfig::synthetic().validate(), Ok(()));
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = PipelineConfig {
            dice_gate: 1.5,
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::GateOutOfRange(1.5)));
        let mut cfg = PipelineConfig::default();
        cfg.features.match_ratio = 0.0;
        assert_eq!(cfg.validate(), Err(ConfigError::BadMatchRatio(0.0)));
    }

    #[test]
    fn threshold_scales_with_resolution() {
        let cfg = PipelineConfig {
            working_resolution: 512,
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.ransac_params(1).thresh_px, 1.5);
    }
}
