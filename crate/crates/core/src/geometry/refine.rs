use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Homography};
use crate::filter::gaussian_blur;
use crate::linalg::cholesky_solve;
use crate::raster::{BinaryMask, Raster};

/// Dense intensity refinement of a homography, coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    /// Gaussian pre-smoothing per stage, in pixels, coarsest first.
    pub sigmas: Vec<f64>,
    /// Gauss-Newton iterations per stage.
    pub iterations: usize,
    /// Sampling stride over the moving grid; never finer than the stage
    /// sigma.
    pub stride: usize,
    /// A stage stops once an update moves the corners less than this.
    pub min_step: f64,
    /// Largest mean corner displacement from the initial estimate that is
    /// still accepted, in pixels.
    pub max_shift: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            sigmas: alloc::vec![4.0, 2.0, 1.0],
            iterations: 15,
            stride: 2,
            min_step: 0.01,
            max_shift: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub homography: Homography,
    /// Normalized cross-correlation at the finest stage before and after.
    pub ncc_before: f64,
    pub ncc_after: f64,
    /// False when the refined estimate was discarded in favor of the input.
    pub accepted: bool,
}

struct Stage {
    fixed: Raster,
    gx: Raster,
    gy: Raster,
    moving: Raster,
}

fn central_gradient(img: &Raster) -> (Raster, Raster) {
    let (w, h) = img.dims();
    let gx = Raster::from_fn(w, h, |x, y| {
        0.5 * (img.get_clamped(x as isize + 1, y as isize)
            - img.get_clamped(x as isize - 1, y as isize))
    });
    let gy = Raster::from_fn(w, h, |x, y| {
        0.5 * (img.get_clamped(x as isize, y as isize + 1)
            - img.get_clamped(x as isize, y as isize - 1))
    });
    (gx, gy)
}

/// Samples `(moving pixel, moving value)` on the stride grid inside the
/// moving mask.
fn sample_grid(moving: &Raster, valid: &BinaryMask, stride: usize) -> Vec<([f64; 2], usize)> {
    let (w, h) = moving.dims();
    let mut out = Vec::new();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            if valid.get(x, y) {
                out.push(([x as f64, y as f64], y * w + x));
            }
        }
    }
    out
}

/// Pixel-to-normalized conjugation, so the eight parameters are comparably
/// scaled.
struct Frame {
    c: [f64; 2],
    s: f64,
}

impl Frame {
    fn of(w: usize, h: usize) -> Self {
        Self {
            c: [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0],
            s: (w.max(h) as f64) / 2.0,
        }
    }

    fn to_norm(&self, h: &Homography) -> [f64; 8] {
        let t = [
            [1.0 / self.s, 0.0, -self.c[0] / self.s],
            [0.0, 1.0 / self.s, -self.c[1] / self.s],
            [0.0, 0.0, 1.0],
        ];
        let t_inv = [
            [self.s, 0.0, self.c[0]],
            [0.0, self.s, self.c[1]],
            [0.0, 0.0, 1.0],
        ];
        let m = crate::linalg::mat3_mul(&crate::linalg::mat3_mul(&t, h.matrix()), &t_inv);
        let k = m[2][2];
        [
            m[0][0] / k,
            m[0][1] / k,
            m[0][2] / k,
            m[1][0] / k,
            m[1][1] / k,
            m[1][2] / k,
            m[2][0] / k,
            m[2][1] / k,
        ]
    }

    fn from_norm(&self, p: &[f64; 8]) -> Result<Homography, GeometryError> {
        let m = [[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], 1.0]];
        let t = [
            [1.0 / self.s, 0.0, -self.c[0] / self.s],
            [0.0, 1.0 / self.s, -self.c[1] / self.s],
            [0.0, 0.0, 1.0],
        ];
        let t_inv = [
            [self.s, 0.0, self.c[0]],
            [0.0, self.s, self.c[1]],
            [0.0, 0.0, 1.0],
        ];
        Homography::new(crate::linalg::mat3_mul(
            &crate::linalg::mat3_mul(&t_inv, &m),
            &t,
        ))
    }
}

struct Photometric {
    gain: f64,
    bias: f64,
    ncc: f64,
    /// Mean squared residual at the fitted gain and bias.
    cost: f64,
}

/// Least-squares fit of `gain * F(H p) + bias` to `M(p)` at fixed `H`.
fn photometric_fit(
    stage: &Stage,
    fixed_valid: &BinaryMask,
    h: &Homography,
    grid: &[([f64; 2], usize)],
) -> Option<Photometric> {
    let (mut n, mut sf, mut sm, mut sff, mut sfm, mut smm) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, i) in grid {
        let Some(q) = h.apply(p) else { continue };
        if !fixed_valid.get_nearest(q[0], q[1]) {
            continue;
        }
        let Some(f) = stage.fixed.sample_bilinear(q[0], q[1]) else {
            continue;
        };
        let m = stage.moving.data()[i];
        n += 1.0;
        sf += f;
        sm += m;
        sff += f * f;
        sfm += f * m;
        smm += m * m;
    }
    if n < 64.0 {
        return None;
    }
    let vf = sff - sf * sf / n;
    let vm = smm - sm * sm / n;
    let cov = sfm - sf * sm / n;
    if !(vf > 0.0 && vm > 0.0) {
        return None;
    }
    let gain = cov / vf;
    let bias = (sm - gain * sf) / n;
    Some(Photometric {
        gain,
        bias,
        ncc: cov / (vf * vm).sqrt(),
        cost: (vm - cov * cov / vf).max(0.0) / n,
    })
}

/// Refines `initial` (moving -> fixed) by Gauss-Newton on
/// `sum (gain * F(H p) + bias - M(p))^2` over moving pixels inside
/// `moving_valid` that land inside `fixed_valid`, with both images smoothed
/// by each stage's sigma in turn. The result is kept only if it raises the
/// finest-stage correlation and stays within `max_shift` of `initial`.
pub fn refine_homography(
    fixed: &Raster,
    fixed_valid: &BinaryMask,
    moving: &Raster,
    moving_valid: &BinaryMask,
    initial: &Homography,
    params: &RefineParams,
) -> Result<Refinement, GeometryError> {
    for (img, mask) in [(fixed, fixed_valid), (moving, moving_valid)] {
        if img.dims() != mask.dims() {
            return Err(GeometryError::DimensionMismatch {
                a: img.dims(),
                b: mask.dims(),
            });
        }
    }
    let (w, h) = fixed.dims();
    let frame = Frame::of(w, h);
    let mut theta = frame.to_norm(initial);
    let mut current = *initial;
    let mut finest = None;

    for &sigma in &params.sigmas {
        let f = gaussian_blur(fixed, sigma);
        let (gx, gy) = central_gradient(&f);
        let stride = params.stride.max(1).max(sigma.round() as usize);
        let grid = sample_grid(moving, moving_valid, stride);
        let stage = Stage {
            fixed: f,
            gx,
            gy,
            moving: gaussian_blur(moving, sigma),
        };
        let mut lambda = 1e-3;
        for _ in 0..params.iterations {
            let Some(fit) = photometric_fit(&stage, fixed_valid, &current, &grid) else {
                break;
            };
            let Some((jtj, jtr)) = normal_equations(
                &stage,
                fixed_valid,
                &current,
                &theta,
                &frame,
                &grid,
                fit.gain,
                fit.bias,
            ) else {
                break;
            };
            let mut improved = false;
            let mut step = f64::INFINITY;
            for _ in 0..6 {
                let mut a = jtj;
                for k in 0..8 {
                    a[k * 8 + k] *= 1.0 + lambda;
                }
                let Some(delta) = cholesky_solve(&a, &jtr, 8) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut next = theta;
                for k in 0..8 {
                    next[k] -= delta[k];
                }
                let Ok(cand) = frame.from_norm(&next) else {
                    lambda *= 10.0;
                    continue;
                };
                let next_cost = photometric_fit(&stage, fixed_valid, &cand, &grid).map(|f| f.cost);
                if next_cost.is_some_and(|c| c < fit.cost) {
                    step = cand.corner_error(&current, w, h);
                    theta = next;
                    current = cand;
                    lambda = (lambda * 0.3).max(1e-7);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved || step < params.min_step {
                break;
            }
        }
        finest = Some((stage, grid));
    }

    let Some((stage, grid)) = finest else {
        return Ok(Refinement {
            homography: *initial,
            ncc_before: f64::NAN,
            ncc_after: f64::NAN,
            accepted: false,
        });
    };
    let ncc = |hh: &Homography| {
        photometric_fit(&stage, fixed_valid, hh, &grid).map_or(f64::NEG_INFINITY, |r| r.ncc)
    };
    let (before, after) = (ncc(initial), ncc(&current));
    let shift = current.corner_error(initial, w, h);
    let accepted = after > before && shift <= params.max_shift;
    Ok(Refinement {
        homography: if accepted { current } else { *initial },
        ncc_before: before,
        ncc_after: after,
        accepted,
    })
}

#[allow(clippy::too_many_arguments)]
fn normal_equations(
    stage: &Stage,
    fixed_valid: &BinaryMask,
    h: &Homography,
    theta: &[f64; 8],
    frame: &Frame,
    grid: &[([f64; 2], usize)],
    gain: f64,
    bias: f64,
) -> Option<([f64; 64], [f64; 8])> {
    let mut jtj = [0.0; 64];
    let mut jtr = [0.0; 8];
    let mut n = 0usize;
    for &(p, i) in grid {
        let Some(q) = h.apply(p) else { continue };
        if !fixed_valid.get_nearest(q[0], q[1]) {
            continue;
        }
        let Some(f) = stage.fixed.sample_bilinear(q[0], q[1]) else {
            continue;
        };
        let r = gain * f + bias - stage.moving.data()[i];
        let (fx, fy) = (
            stage.gx.sample_bilinear(q[0], q[1]).unwrap_or(0.0),
            stage.gy.sample_bilinear(q[0], q[1]).unwrap_or(0.0),
        );
        // Derivatives in the normalized frame.
        let u = (p[0] - frame.c[0]) / frame.s;
        let v = (p[1] - frame.c[1]) / frame.s;
        let d = theta[6] * u + theta[7] * v + 1.0;
        let qx = (theta[0] * u + theta[1] * v + theta[2]) / d;
        let qy = (theta[3] * u + theta[4] * v + theta[5]) / d;
        let (gxn, gyn) = (gain * fx * frame.s, gain * fy * frame.s);
        let j = [
            gxn * u / d,
            gxn * v / d,
            gxn / d,
            gyn * u / d,
            gyn * v / d,
            gyn / d,
            -(gxn * qx + gyn * qy) * u / d,
            -(gxn * qx + gyn * qy) * v / d,
        ];
        for a in 0..8 {
            jtr[a] += j[a] * r;
            for b in a..8 {
                jtj[a * 8 + b] += j[a] * j[b];
            }
        }
        n += 1;
    }
    if n < 64 {
        return None;
    }
    for a in 0..8 {
        for b in 0..a {
            jtj[a * 8 + b] = jtj[b * 8 + a];
        }
    }
    Some((jtj, jtr))
}
