use alloc::vec::Vec;

use super::{check_pair, MetricError};
use crate::raster::{BinaryMask, Raster};
use crate::sum::NeumaierSum;

pub const DEFAULT_PATCH: usize = 8;

/// 3x3 Sobel responses with replicated borders.
fn sobel(img: &Raster) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = img.dims();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            gx.push((p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1)));
            gy.push((p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1)));
        }
    }
    (gx, gy)
}

/// Population variance of each `patch x patch` tile, row-major over tiles.
fn tile_variances(g: &[f64], w: usize, h: usize, patch: usize) -> Vec<f64> {
    let n = (patch * patch) as f64;
    let mut out = Vec::with_capacity((w / patch) * (h / patch));
    for ty in 0..h / patch {
        for tx in 0..w / patch {
            let mut s = NeumaierSum::new();
            for y in ty * patch..(ty + 1) * patch {
                for x in tx * patch..(tx + 1) * patch {
                    s.add(g[y * w + x]);
                }
            }
            let mean = s.total() / n;
            let mut v = NeumaierSum::new();
            for y in ty * patch..(ty + 1) * patch {
                for x in tx * patch..(tx + 1) * patch {
                    let d = g[y * w + x] - mean;
                    v.add(d * d);
                }
            }
            out.push(v.total() / n);
        }
    }
    out
}

fn gv_impl(
    pred: &Raster,
    target: &Raster,
    patch: usize,
    mask: Option<&BinaryMask>,
) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    let (w, h) = pred.dims();
    if patch == 0 || w % patch != 0 || h % patch != 0 {
        return Err(MetricError::PatchSizeInvalid {
            patch,
            width: w,
            height: h,
        });
    }
    if let Some(m) = mask {
        if m.dims() != (w, h) {
            return Err(MetricError::DimensionMismatch {
                a: (w, h),
                b: m.dims(),
            });
        }
    }
    let keep: Vec<bool> = (0..(w / patch) * (h / patch))
        .map(|t| {
            let (tx, ty) = (t % (w / patch), t / (w / patch));
            mask.is_none_or(|m| {
                (ty * patch..(ty + 1) * patch)
                    .all(|y| (tx * patch..(tx + 1) * patch).all(|x| m.get(x, y)))
            })
        })
        .collect();
    let kept = keep.iter().filter(|&&k| k).count();
    if kept == 0 {
        return Err(MetricError::EmptyMask);
    }

    let (px, py) = sobel(pred);
    let (tx, ty) = sobel(target);
    let mut total = 0.0;
    for (a, b) in [(px, tx), (py, ty)] {
        let va = tile_variances(&a, w, h, patch);
        let vb = tile_variances(&b, w, h, patch);
        let mut s = NeumaierSum::new();
        for ((x, y), &k) in va.iter().zip(&vb).zip(&keep) {
            if k {
                s.add((x - y) * (x - y));
            }
        }
        total += s.total() / kept as f64;
    }
    Ok(0.5 * total)
}

/// Gradient variance: mean squared difference between the per-tile
/// variances of the Sobel gradients of `pred` and `target`, averaged over
/// the x and y directions. Dimensions must be multiples of `patch`.
pub fn gradient_variance(pred: &Raster, target: &Raster, patch: usize) -> Result<f64, MetricError> {
    gv_impl(pred, target, patch, None)
}

/// [`gradient_variance`] over the tiles lying entirely inside `mask`.
pub fn gradient_variance_masked(
    pred: &Raster,
    target: &Raster,
    patch: usize,
    mask: &BinaryMask,
) -> Result<f64, MetricError> {
    gv_impl(pred, target, patch, Some(mask))
}
