use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{to_full_res, to_level, FeatureError, Keypoint, KeypointSet, ScaleLevel, ScaleSpace};
use crate::filter::{hessian_at, scharr};
use crate::raster::{BinaryMask, Raster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectParams {
    /// Minimum scale-normalized determinant-of-Hessian response.
    pub threshold: f64,
    /// Strongest keypoints kept per image.
    pub max_keypoints: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            max_keypoints: 2000,
        }
    }
}

pub fn detect_keypoints(
    ss: &ScaleSpace,
    threshold: f64,
    valid: &BinaryMask,
) -> Result<KeypointSet, FeatureError> {
    detect_keypoints_with(
        ss,
        &DetectParams {
            threshold,
            ..DetectParams::default()
        },
        valid,
    )
}

/// Scale-space maxima of the scale-normalized Hessian determinant.
///
/// A pixel is kept when its response exceeds the threshold and is strictly
/// greater than its 8 neighbors and the 3x3 neighborhoods at the mapped
/// position on the adjacent levels. Positions are refined with a quadratic
/// fit (rejected when the offset exceeds one pixel), oriented by the dominant
/// gradient direction, mapped to full resolution and filtered by `valid`.
pub fn detect_keypoints_with(
    ss: &ScaleSpace,
    p: &DetectParams,
    valid: &BinaryMask,
) -> Result<KeypointSet, FeatureError> {
    if valid.dims() != (ss.width, ss.height) {
        return Err(FeatureError::MaskMismatch {
            image: (ss.width, ss.height),
            mask: valid.dims(),
        });
    }
    let responses: Vec<Raster> = ss.levels.iter().map(hessian_response).collect();

    let mut found = Vec::new();
    for (i, level) in ss.levels.iter().enumerate() {
        let resp = &responses[i];
        let (w, h) = resp.dims();
        if w < 3 || h < 3 {
            continue;
        }
        let mut candidates = Vec::new();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let v = resp.get(x, y);
                if !(v > p.threshold) || !is_spatial_max(resp, x, y, v) {
                    continue;
                }
                let lower = i.checked_sub(1).map(|j| (&responses[j], &ss.levels[j]));
                let upper = responses.get(i + 1).map(|r| (r, &ss.levels[i + 1]));
                let beats = |n: Option<(&Raster, &ScaleLevel)>| match n {
                    None => true,
                    Some((r, l)) => beats_neighbor_level(v, x, y, level.octave, r, l.octave),
                };
                if beats(lower) && beats(upper) {
                    candidates.push((x, y));
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (lx, ly) = scharr(&level.image);
        let scale = (1u64 << level.octave) as f64;
        for (x, y) in candidates {
            let Some((ox, oy, response)) = refine(resp, x, y) else {
                continue;
            };
            if !(response > p.threshold) {
                continue;
            }
            let fx = x as f64 + ox;
            let fy = y as f64 + oy;
            let px = to_full_res(fx, level.octave);
            let py = to_full_res(fy, level.octave);
            if !valid.get_nearest(px, py) {
                continue;
            }
            let orientation = dominant_orientation(&lx, &ly, fx, fy, level.sigma / scale);
            found.push(Keypoint {
                x: px,
                y: py,
                sigma: level.sigma,
                response,
                orientation,
                level: i,
            });
        }
    }

    found.sort_by(keypoint_order);
    found.truncate(p.max_keypoints);
    Ok(found)
}

/// `det(H) * sigma^4` with the Hessian by central differences on the level
/// grid and `sigma` in level pixels.
fn hessian_response(level: &ScaleLevel) -> Raster {
    let s = level.pixel_sigma();
    let norm = s * s * s * s;
    let img = &level.image;
    let (w, h) = img.dims();
    Raster::from_fn(w, h, |x, y| {
        let (lxx, lxy, lyy) = hessian_at(img, x, y);
        (lxx * lyy - lxy * lxy) * norm
    })
}

#[inline]
fn is_spatial_max(r: &Raster, x: usize, y: usize, v: f64) -> bool {
    for dy in 0..3 {
        for dx in 0..3 {
            if (dx, dy) != (1, 1) && r.get(x + dx - 1, y + dy - 1) >= v {
                return false;
            }
        }
    }
    true
}

fn beats_neighbor_level(
    v: f64,
    x: usize,
    y: usize,
    octave: usize,
    other: &Raster,
    other_octave: usize,
) -> bool {
    let ox = to_level(to_full_res(x as f64, octave), other_octave).round() as isize;
    let oy = to_level(to_full_res(y as f64, octave), other_octave).round() as isize;
    let (w, h) = (other.width() as isize, other.height() as isize);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (nx, ny) = (ox + dx, oy + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            if other.get(nx as usize, ny as usize) >= v {
                return false;
            }
        }
    }
    true
}

/// Quadratic refinement around an integer maximum. Returns the offset and
/// interpolated response, or `None` when the fit is degenerate or moves the
/// point more than one pixel.
fn refine(r: &Raster, x: usize, y: usize) -> Option<(f64, f64, f64)> {
    let p = |dx: isize, dy: isize| r.get((x as isize + dx) as usize, (y as isize + dy) as usize);
    let c = p(0, 0);
    let dx = 0.5 * (p(1, 0) - p(-1, 0));
    let dy = 0.5 * (p(0, 1) - p(0, -1));
    let dxx = p(1, 0) - 2.0 * c + p(-1, 0);
    let dyy = p(0, 1) - 2.0 * c + p(0, -1);
    let dxy = 0.25 * (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1));
    let det = dxx * dyy - dxy * dxy;
    if det.abs() < 1e-300 {
        return None;
    }
    let ox = -(dyy * dx - dxy * dy) / det;
    let oy = -(dxx * dy - dxy * dx) / det;
    if !(ox.abs() <= 1.0 && oy.abs() <= 1.0) {
        return None;
    }
    Some((ox, oy, c + 0.5 * (dx * ox + dy * oy)))
}

/// Dominant gradient direction over a disc of radius `6 sigma`, sampled on a
/// `sigma`-spaced grid with Gaussian weights, by the largest vector sum over a
/// sliding 60-degree sector.
fn dominant_orientation(lx: &Raster, ly: &Raster, x: f64, y: f64, sigma: f64) -> f64 {
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(113);
    for i in -6i32..=6 {
        for j in -6i32..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let sx = (x + j as f64 * sigma).round() as isize;
            let sy = (y + i as f64 * sigma).round() as isize;
            let weight = (-((i * i + j * j) as f64) / (2.0 * 2.5 * 2.5)).exp();
            let gx = weight * lx.get_clamped(sx, sy);
            let gy = weight * ly.get_clamped(sx, sy);
            if gx == 0.0 && gy == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * PI;
            }
            samples.push((angle, gx, gy));
        }
    }
    let sector = PI / 3.0;
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    let mut start = 0.0;
    while start < 2.0 * PI {
        let end = start + sector;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(a, gx, gy) in &samples {
            let inside = if end < 2.0 * PI {
                a >= start && a < end
            } else {
                a >= start || a < end - 2.0 * PI
            };
            if inside {
                sx += gx;
                sy += gy;
            }
        }
        let norm = sx * sx + sy * sy;
        if norm > best.0 {
            best = (norm, sx, sy);
        }
        start += 0.15;
    }
    if best.0 == 0.0 {
        return 0.0;
    }
    let angle = best.2.atan2(best.1);
    // atan2 yields [-pi, pi]; fold -pi onto pi.
    if angle <= -PI {
        PI
    } else {
        angle
    }
}

/// Response descending, then `y`, then `x`.
fn keypoint_order(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
}
