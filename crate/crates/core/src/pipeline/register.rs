use alloc::string::ToString;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{phase_bin, PairRecord, PipelineConfig, PipelineError, RejectReason, Status};
use crate::features::{
    build_scale_space_with, describe_keypoints, detect_keypoints_with, DescriptorSet,
};
use crate::geometry::{
    dice_coefficient, match_descriptors, ransac_homography, refine_homography,
    similarity_decompose, warp_mask, Homography, RegistrationResult, Validity,
};
use crate::metrics::{evaluate_masked, MetricReport};
use crate::raster::{
    ellipse_mask, peripheral_crop, resize_bilinear, to_grayscale, BinaryMask, Raster,
};
use crate::vesselness::{binarize_mask, frangi_vesselness, Polarity};

/// One image brought to the working resolution and turned into a vessel map.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    /// Native `(width, height)` before resampling.
    pub native: (usize, usize),
    /// Cropped grayscale at the working resolution.
    pub image: Raster,
    /// Crop ellipse.
    pub valid: BinaryMask,
    /// Crop ellipse shrunk past the reach of the largest filter scale.
    pub inner: BinaryMask,
    /// Vesselness response, zero outside `inner`, normalized to a high
    /// quantile and clipped at 1.
    pub vessel: Raster,
    pub vessel_mask: BinaryMask,
}

/// Grayscale, resample, crop, vesselness and binarization.
pub fn prepare_image(
    img: &Raster,
    polarity: Polarity,
    cfg: &PipelineConfig,
) -> Result<PreparedImage, PipelineError> {
    let native = img.dims();
    let gray = to_grayscale(img);
    let res = cfg.working_resolution;
    let gray = if cfg.resize {
        resize_bilinear(&gray, res, res)
    } else {
        gray
    };
    let (w, h) = gray.dims();
    let (mut image, valid) = peripheral_crop(&gray, cfg.crop_margin)?;

    // Fill outside the crop with the inside mean so the ellipse rim itself
    // does not read as a vessel.
    let inside: f64 = image
        .data()
        .iter()
        .zip(valid.bits())
        .filter(|(_, &v)| v)
        .map(|(x, _)| *x)
        .sum();
    let fill = inside / valid.count().max(1) as f64;
    let mut filled = image.clone();
    for (x, &v) in filled.data_mut().iter_mut().zip(valid.bits()) {
        if !v {
            *x = fill;
        }
    }
    let reach = 2.0 * cfg.vessel.scales.iter().fold(0.0f64, |a, &s| a.max(s)) + 2.0;
    let shrink = (cfg.crop_margin + reach / w.min(h) as f64).min(0.49);
    let inner = ellipse_mask(w, h, shrink)?;

    let mut vessel = frangi_vesselness(&filled, &cfg.vessel.params(polarity))?;
    for (x, &v) in vessel.data_mut().iter_mut().zip(inner.bits()) {
        if !v {
            *x = 0.0;
        }
    }
    let vessel_mask = binarize_mask(&vessel, &inner)?;
    let vessel = normalize_response(&vessel, &inner, cfg.features.response_quantile);
    for (x, &v) in image.data_mut().iter_mut().zip(valid.bits()) {
        if !v {
            *x = 0.0;
        }
    }
    Ok(PreparedImage {
        native,
        image,
        valid,
        inner,
        vessel,
        vessel_mask,
    })
}

/// Divides by the `q` quantile of the values inside `valid` and clips at 1.
fn normalize_response(v: &Raster, valid: &BinaryMask, q: f64) -> Raster {
    let mut inside: Vec<f64> = v
        .data()
        .iter()
        .zip(valid.bits())
        .filter(|(_, &b)| b)
        .map(|(x, _)| *x)
        .collect();
    if inside.is_empty() {
        return v.clone();
    }
    let k = ((inside.len() - 1) as f64 * q).round() as usize;
    let (_, &mut level, _) = inside.select_nth_unstable_by(k, f64::total_cmp);
    if !(level > 0.0) {
        return v.clone();
    }
    v.map(|x| (x / level).min(1.0))
}

/// Keypoints and descriptors of a prepared vessel map.
pub fn describe_prepared(
    p: &PreparedImage,
    cfg: &PipelineConfig,
) -> Result<DescriptorSet, PipelineError> {
    let ss = build_scale_space_with(&p.vessel, &cfg.features.scale_space())?;
    let kps = detect_keypoints_with(&ss, &cfg.features.detect(), &p.inner)?;
    Ok(describe_keypoints(&ss, &kps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fixed_keypoints: usize,
    pub moving_keypoints: usize,
    pub matches: usize,
    pub ransac_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationOutcome {
    /// Working-resolution result (the transform that was validated and
    /// scored).
    pub result: RegistrationResult,
    /// The same transform between native pixel frames.
    pub native_homography: Homography,
    pub diagnostics: Diagnostics,
}

/// Seed for one pair's RANSAC stream, independent of batch order.
pub fn pair_seed(seed: u64, ri_path: &str, fa_path: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((ri_path.len() as u64).to_le_bytes());
    h.update(ri_path.as_bytes());
    h.update(fa_path.as_bytes());
    let d = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&d[..8]);
    u64::from_le_bytes(head)
}

/// Registers already prepared images (`moving` onto `fixed`).
pub fn register_prepared(
    fixed: &PreparedImage,
    moving: &PreparedImage,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RegistrationOutcome, PipelineError> {
    let fixed_set = describe_prepared(fixed, cfg)?;
    let moving_set = describe_prepared(moving, cfg)?;
    let matches = match_descriptors(&moving_set, &fixed_set, cfg.features.match_ratio);
    let fit = ransac_homography(
        &matches,
        &moving_set.keypoints,
        &fixed_set.keypoints,
        &cfg.ransac_params(seed),
    )?;
    let h = if cfg.refine.enabled {
        refine_homography(
            &fixed.vessel,
            &fixed.inner,
            &moving.vessel,
            &moving.inner,
            &fit.homography,
            &cfg.refine_params(),
        )?
        .homography
    } else {
        fit.homography
    };
    let (scale, rotation) = similarity_decompose(&h).unwrap_or((f64::NAN, f64::NAN));
    let validity = cfg.validity.check(&h);
    let dice = if validity.is_pass() {
        let (w, hgt) = fixed.vessel_mask.dims();
        let warped = warp_mask(&moving.vessel_mask, &h, w, hgt)?;
        let warped_valid = warp_mask(&moving.inner, &h, w, hgt)?;
        dice_coefficient(&warped, &fixed.vessel_mask, &fixed.inner.and(&warped_valid))?
    } else {
        0.0
    };

    let (w, hgt) = fixed.vessel.dims();
    let factor =
        |native: (usize, usize)| [native.0 as f64 / w as f64, native.1 as f64 / hgt as f64];
    let (src_f, dst_f) = (factor(moving.native), factor(fixed.native));
    let native_homography = if src_f == [1.0; 2] && dst_f == [1.0; 2] {
        h
    } else {
        h.between_frames(src_f, dst_f)
    };
    Ok(RegistrationOutcome {
        result: RegistrationResult {
            homography: h,
            inlier_count: fit.inliers.len(),
            total_matches: matches.len(),
            scale,
            rotation,
            validity,
            dice,
        },
        native_homography,
        diagnostics: Diagnostics {
            fixed_keypoints: fixed_set.len(),
            moving_keypoints: moving_set.len(),
            matches: matches.len(),
            ransac_iterations: fit.iterations,
        },
    })
}

/// Full chain on decoded rasters: RI is fixed, FA is moving.
pub fn register_rasters(
    ri: &Raster,
    fa: &Raster,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RegistrationOutcome, PipelineError> {
    cfg.validate()?;
    let fixed = prepare_image(ri, cfg.vessel.ri_polarity, cfg)?;
    let moving = prepare_image(fa, cfg.vessel.fa_polarity, cfg)?;
    register_prepared(&fixed, &moving, cfg, seed)
}

/// Status implied by a registration attempt under the configured gate.
pub fn registration_status(
    outcome: &Result<RegistrationOutcome, PipelineError>,
    gate: f64,
) -> Status {
    match outcome {
        Err(e) => Status::Rejected {
            reason: RejectReason::Error {
                message: e.to_string(),
            },
        },
        Ok(o) => match &o.result.validity {
            Validity::Fail { reason } => Status::Rejected {
                reason: RejectReason::Validity {
                    failure: reason.clone(),
                },
            },
            Validity::Pass if !(o.result.dice >= gate) => Status::Rejected {
                reason: RejectReason::Dice {
                    dice: o.result.dice,
                    gate,
                },
            },
            Validity::Pass => Status::Accepted,
        },
    }
}

/// Registers one record's decoded images and fills in phase, registration
/// and status. Failures become a rejection, never an error.
pub fn process_record(
    record: &mut PairRecord,
    images: Result<(Raster, Raster), PipelineError>,
    cfg: &PipelineConfig,
) {
    match phase_bin(record.injection_elapsed_s) {
        Ok(p) => record.phase = p,
        Err(e) => {
            record.reject(RejectReason::Error {
                message: e.to_string(),
            });
            return;
        }
    }
    let outcome = images.and_then(|(ri, fa)| {
        let seed = pair_seed(cfg.seed, &record.ri_path, &record.fa_path);
        register_rasters(&ri, &fa, cfg, seed)
    });
    record.status = registration_status(&outcome, cfg.dice_gate);
    if let Ok(o) = outcome {
        let resampled = o.native_homography != o.result.homography;
        record.native_homography = resampled.then_some(o.native_homography);
        record.registration = Some(o.result);
    }
}

/// Scores a prediction against its target inside the shared crop mask.
pub fn evaluate_rasters(
    pred: &Raster,
    target: &Raster,
    cfg: &PipelineConfig,
) -> Result<MetricReport, PipelineError> {
    let (p, t) = (to_grayscale(pred), to_grayscale(target));
    let (p, t) = if cfg.resize {
        let res = cfg.working_resolution;
        (resize_bilinear(&p, res, res), resize_bilinear(&t, res, res))
    } else {
        if p.dims() != t.dims() {
            return Err(PipelineError::SizeMismatch {
                pred: p.dims(),
                target: t.dims(),
            });
        }
        (p, t)
    };
    let (w, h) = p.dims();
    let mask = ellipse_mask(w, h, cfg.crop_margin)?;
    Ok(evaluate_masked(&p, &t, &mask)?)
}
