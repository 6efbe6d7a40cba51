//! Fidelity metrics between a generated frame and its ground truth: MAE,
//! PSNR, SSIM, MS-SSIM and gradient variance.
//!
//! Inputs are single-channel rasters on the `[0, 1]` scale. MAE is reported
//! on the 8-bit scale (`x 255`); PSNR uses a peak of 1 (the same number as
//! the 8-bit convention). Each metric also has a masked form that restricts
//! the average to a validity mask, used when scoring cropped fundus frames.

mod gv;
mod ssim;

use core::fmt;
use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::raster::{BinaryMask, Raster};
use crate::sum::NeumaierSum;

pub use gv::{gradient_variance, gradient_variance_masked, DEFAULT_PATCH};
pub use ssim::{
    ms_ssim, ms_ssim_masked, ssim, ssim_map, ssim_masked, MS_SSIM_MIN_SIDE, MS_SSIM_WEIGHTS,
    SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("image {got:?} is smaller than the required {min}x{min}")]
    ImageTooSmall { min: usize, got: (usize, usize) },
    #[error("patch size {patch} does not tile a {width}x{height} image")]
    PatchSizeInvalid {
        patch: usize,
        width: usize,
        height: usize,
    },
    #[error("expected a single-channel raster, got {0} channels")]
    NotGrayscale(usize),
    #[error("validity mask leaves nothing to score")]
    EmptyMask,
}

/// All five scores for one prediction/target pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    /// `+inf` for identical inputs; serialized as the string `"inf"`.
    #[serde(with = "psnr_repr")]
    pub psnr: f64,
    pub ssim: f64,
    pub ms_ssim: f64,
    pub gv: f64,
}

impl MetricReport {
    /// Field-range check applied to every report entering an aggregate.
    pub fn check_ranges(&self) -> Result<(), RangeViolation> {
        let checks = [
            ("mae", self.mae.is_finite() && self.mae >= 0.0),
            (
                "psnr",
                !self.psnr.is_nan() && self.psnr != f64::NEG_INFINITY,
            ),
            ("ssim", (-1.0..=1.0).contains(&self.ssim)),
            ("ms_ssim", (0.0..=1.0).contains(&self.ms_ssim)),
            ("gv", self.gv.is_finite() && self.gv >= 0.0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((field, _)) => Err(RangeViolation(field)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeViolation(pub &'static str);

impl fmt::Display for RangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} out of range", self.0)
    }
}

pub(crate) mod psnr_repr {
    use super::*;
    use serde::de::{self, Visitor};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct Psnr;
        impl Visitor<'_> for Psnr {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(Psnr)
    }
}

pub(crate) fn check_pair(a: &Raster, b: &Raster) -> Result<(), MetricError> {
    for r in [a, b] {
        if r.channels() != 1 {
            return Err(MetricError::NotGrayscale(r.channels()));
        }
    }
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(())
}

fn check_mask(a: &Raster, mask: &BinaryMask) -> Result<(), MetricError> {
    if mask.dims() != a.dims() {
        return Err(MetricError::DimensionMismatch {
            a: a.dims(),
            b: mask.dims(),
        });
    }
    Ok(())
}

fn masked_mean(
    a: &Raster,
    b: &Raster,
    mask: Option<&BinaryMask>,
    f: impl Fn(f64, f64) -> f64,
) -> Result<f64, MetricError> {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for (i, (&x, &y)) in a.data().iter().zip(b.data()).enumerate() {
        if mask.is_none_or(|m| m.bits()[i]) {
            acc.add(f(x, y));
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(acc.total() / n as f64)
}

/// Mean absolute difference on the 0-255 scale.
pub fn mae(pred: &Raster, target: &Raster) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    Ok(255.0 * masked_mean(pred, target, None, |x, y| (x - y).abs())?)
}

/// `10 log10(1 / MSE)`; `+inf` when the inputs are identical.
pub fn psnr(pred: &Raster, target: &Raster) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    Ok(psnr_from_mse(masked_mean(pred, target, None, |x, y| {
        (x - y) * (x - y)
    })?))
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn mae_masked(pred: &Raster, target: &Raster, mask: &BinaryMask) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    check_mask(pred, mask)?;
    Ok(255.0 * masked_mean(pred, target, Some(mask), |x, y| (x - y).abs())?)
}

pub fn psnr_masked(pred: &Raster, target: &Raster, mask: &BinaryMask) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    check_mask(pred, mask)?;
    Ok(psnr_from_mse(masked_mean(
        pred,
        target,
        Some(mask),
        |x, y| (x - y) * (x - y),
    )?))
}

/// All five metrics over the whole frame.
pub fn evaluate(pred: &Raster, target: &Raster) -> Result<MetricReport, MetricError> {
    Ok(MetricReport {
        mae: mae(pred, target)?,
        psnr: psnr(pred, target)?,
        ssim: ssim(pred, target)?,
        ms_ssim: ms_ssim(pred, target)?,
        gv: gradient_variance(pred, target, DEFAULT_PATCH)?,
    })
}

/// All five metrics restricted to `mask`.
pub fn evaluate_masked(
    pred: &Raster,
    target: &Raster,
    mask: &BinaryMask,
) -> Result<MetricReport, MetricError> {
    Ok(MetricReport {
        mae: mae_masked(pred, target, mask)?,
        psnr: psnr_masked(pred, target, mask)?,
        ssim: ssim_masked(pred, target, mask)?,
        ms_ssim: ms_ssim_masked(pred, target, mask)?,
        gv: gradient_variance_masked(pred, target, DEFAULT_PATCH, mask)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| ((x * 3 + y * 5) % 200) as f64 / 255.0)
    }

    #[test]
    fn mae_closed_forms() {
        let a = ramp(32, 32);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 16.0 / 255.0);
        assert!((mae(&a, &b).unwrap() - 16.0).abs() < 1e-12);
        let c = Raster::from_fn(16, 16, |x, y| ((x + y) % 2) as f64);
        let d = c.map(|v| 1.0 - v);
        assert_eq!(mae(&c, &d).unwrap(), 255.0);
    }

    #[test]
    fn psnr_of_offset() {
        let a = ramp(32, 32);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 16.0 / 255.0);
        let expected = 10.0 * (255.0f64 * 255.0 / 256.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 24.0486).abs() < 1e-3);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = ramp(32, 32);
        let b = ramp(32, 31);
        assert!(matches!(
            mae(&a, &b),
            Err(MetricError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            psnr(&a, &b),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn masked_forms_ignore_outside() {
        let a = ramp(32, 32);
        let mut b = a.clone();
        for y in 0..32 {
            b.set(0, y, 1.0 - a.get(0, y));
        }
        let mask = BinaryMask::from_fn(32, 32, |x, _| x > 0);
        assert_eq!(mae_masked(&a, &b, &mask).unwrap(), 0.0);
        assert_eq!(psnr_masked(&a, &b, &mask).unwrap(), f64::INFINITY);
        let none = BinaryMask::filled(32, 32, false);
        assert_eq!(mae_masked(&a, &b, &none), Err(MetricError::EmptyMask));
    }

    #[test]
    fn range_check() {
        let ok = MetricReport {
            mae: 1.0,
            psnr: f64::INFINITY,
            ssim: 0.5,
            ms_ssim: 0.5,
            gv: 0.0,
        };
        assert!(ok.check_ranges().is_ok());
        let bad = MetricReport { ms_ssim: 1.5, ..ok };
        assert_eq!(bad.check_ranges(), Err(RangeViolation("ms_ssim")));
    }
}
