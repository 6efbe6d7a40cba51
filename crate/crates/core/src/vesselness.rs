//! Multi-scale Hessian vesselness and hysteresis binarization of the
//! response into vessel maps.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{gaussian_blur, hessian_at};
use crate::linalg::sym2_eigenvalues;
use crate::raster::{BinaryMask, Raster};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VesselError {
    #[error("vesselness needs at least one scale")]
    EmptyScaleList,
    #[error("scale {0} must be finite and positive")]
    BadScale(f64),
    #[error("beta must be positive, got {0}")]
    BadBeta(f64),
    #[error("vesselness expects a single-channel raster, got {0} channels")]
    NotGrayscale(usize),
    #[error("validity mask is empty")]
    EmptyValidMask,
    #[error("validity mask {mask:?} does not match response {image:?}")]
    DimensionMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
}

/// Which vessels the filter should respond to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Bright vessels on a dark background (fluorescein angiography).
    BrightOnDark,
    /// Dark vessels on a bright background (color/pseudocolor fundus).
    DarkOnBright,
}

impl Polarity {
    pub fn inverted(self) -> Self {
        match self {
            Polarity::BrightOnDark => Polarity::DarkOnBright,
            Polarity::DarkOnBright => Polarity::BrightOnDark,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VesselParams {
    /// Gaussian scales in pixels.
    pub scales: Vec<f64>,
    /// Blobness sensitivity.
    pub beta: f64,
    /// Structureness sensitivity; `None` uses half the largest Hessian norm
    /// found at each scale.
    pub c: Option<f64>,
    pub polarity: Polarity,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 4.0, 8.0],
            beta: 0.5,
            c: None,
            polarity: Polarity::BrightOnDark,
        }
    }
}

impl VesselParams {
    pub fn with_polarity(polarity: Polarity) -> Self {
        Self {
            polarity,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), VesselError> {
        if self.scales.is_empty() {
            return Err(VesselError::EmptyScaleList);
        }
        if let Some(&s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(VesselError::BadScale(s));
        }
        if !(self.beta > 0.0) {
            return Err(VesselError::BadBeta(self.beta));
        }
        Ok(())
    }
}

/// Frangi vesselness, maximum over scales, rescaled to `[0, 1]`.
pub fn frangi_vesselness(img: &Raster, p: &VesselParams) -> Result<Raster, VesselError> {
    p.validate()?;
    if img.channels() != 1 {
        return Err(VesselError::NotGrayscale(img.channels()));
    }
    let (w, h) = img.dims();
    let mut best = vec![0.0f64; w * h];
    for &sigma in &p.scales {
        let v = single_scale(img, sigma, p);
        for (b, x) in best.iter_mut().zip(v) {
            *b = b.max(x);
        }
    }
    let peak = best.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for b in &mut best {
            *b /= peak;
        }
    }
    Ok(Raster::new(w, h, 1, best).expect("shape"))
}

fn single_scale(img: &Raster, sigma: f64, p: &VesselParams) -> Vec<f64> {
    let smooth = gaussian_blur(img, sigma);
    let (w, h) = img.dims();
    let norm = sigma * sigma;
    let mut eig = Vec::with_capacity(w * h);
    let mut max_s: f64 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (lxx, lxy, lyy) = hessian_at(&smooth, x, y);
            let (l1, l2) = sym2_eigenvalues(lxx * norm, lxy * norm, lyy * norm);
            let s2 = l1 * l1 + l2 * l2;
            max_s = max_s.max(s2.sqrt());
            eig.push((l1, l2));
        }
    }
    let c = p.c.unwrap_or(0.5 * max_s);
    let beta2 = 2.0 * p.beta * p.beta;
    let c2 = 2.0 * c * c;
    eig.into_iter()
        .map(|(l1, l2)| {
            let wrong_sign = match p.polarity {
                Polarity::BrightOnDark => l2 >= 0.0,
                Polarity::DarkOnBright => l2 <= 0.0,
            };
            if wrong_sign || c2 == 0.0 {
                return 0.0;
            }
            let rb = l1 / l2;
            let s2 = l1 * l1 + l2 * l2;
            (-(rb * rb) / beta2).exp() * (1.0 - (-s2 / c2).exp())
        })
        .collect()
}

/// Histogram bin count used for Otsu thresholding.
pub const OTSU_BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * OTSU_BINS as f64).floor().max(0.0) as usize).min(OTSU_BINS - 1)
}

/// Otsu threshold of the values inside `valid`, as the lower edge of the
/// first bin of the upper class. Ties across a plateau of equally good
/// splits resolve to the plateau's midpoint. Returns `None` when every valid
/// value falls into one bin.
pub fn otsu_threshold(v: &Raster, valid: &BinaryMask) -> Result<Option<f64>, VesselError> {
    check_dims(v, valid)?;
    let mut hist = [0u64; OTSU_BINS];
    let mut n = 0u64;
    for (&x, &ok) in v.data().iter().zip(valid.bits()) {
        if ok {
            hist[bin_of(x)] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(VesselError::EmptyValidMask);
    }
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum::<f64>()
        / n as f64;

    let mut best = -1.0f64;
    let (mut first, mut last) = (None, None);
    let mut w0 = 0.0;
    let mut mu0_acc = 0.0;
    for k in 0..OTSU_BINS - 1 {
        w0 += hist[k] as f64 / n as f64;
        mu0_acc += k as f64 * hist[k] as f64 / n as f64;
        let w1 = 1.0 - w0;
        if w0 <= 0.0 || w1 <= 1e-15 {
            continue;
        }
        let diff = total_mean * w0 - mu0_acc;
        let between = diff * diff / (w0 * w1);
        if between > best * (1.0 + 1e-12) {
            best = between;
            first = Some(k);
            last = Some(k);
        } else if (between - best).abs() <= best * 1e-12 {
            last = Some(k);
        }
    }
    Ok(match (first, last) {
        (Some(a), Some(b)) => {
            let k = (a + b) / 2;
            Some((k + 1) as f64 / OTSU_BINS as f64)
        }
        _ => None,
    })
}

fn check_dims(v: &Raster, valid: &BinaryMask) -> Result<(), VesselError> {
    if v.dims() != valid.dims() {
        return Err(VesselError::DimensionMismatch {
            image: v.dims(),
            mask: valid.dims(),
        });
    }
    Ok(())
}

/// Hysteresis binarization with the Otsu threshold as the high threshold and
/// half of it as the low threshold.
pub fn binarize_mask(v: &Raster, valid: &BinaryMask) -> Result<BinaryMask, VesselError> {
    match otsu_threshold(v, valid)? {
        Some(high) => binarize_with_threshold(v, valid, high),
        None => Ok(BinaryMask::filled(v.width(), v.height(), false)),
    }
}

/// Hysteresis binarization with an explicit high threshold: pixels at or
/// above `high` seed the mask, pixels at or above `high / 2` join when
/// 8-connected to a seed. Pixels outside `valid` are always false.
pub fn binarize_with_threshold(
    v: &Raster,
    valid: &BinaryMask,
    high: f64,
) -> Result<BinaryMask, VesselError> {
    check_dims(v, valid)?;
    let (w, h) = v.dims();
    let low = 0.5 * high;
    let data = v.data();
    let vbits = valid.bits();
    let mut out = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if vbits[i] && data[i] >= high {
            out[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !out[j] && vbits[j] && data[j] >= low {
                    out[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(BinaryMask::new(w, h, out).expect("shape"))
}
