//! Separable convolution and finite-difference helpers shared by the
//! vesselness filter, the scale space and the metrics.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::raster::Raster;

/// Normalized 1-D Gaussian taps for `sigma`, radius `ceil(truncate * sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f64> {
    let radius = ((truncate * sigma).ceil() as usize).max(1);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Symmetric border: `-1 -> 0`, `-2 -> 1`, `n -> n - 1`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Same-size separable convolution of a single-channel raster with a
/// symmetric odd-length kernel, symmetric (edge-duplicating) borders.
pub(crate) fn convolve_separable(img: &Raster, kernel: &[f64]) -> Raster {
    let (w, h) = img.dims();
    let r = (kernel.len() / 2) as isize;
    let src = img.data();

    let mut tmp = vec![0.0; w * h];
    let mut line = vec![0.0; w + 2 * r as usize];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = row[reflect(j as isize - r, w)];
        }
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let window = &line[x..x + kernel.len()];
            *o = window.iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }

    let mut out = vec![0.0; w * h];
    let rows: Vec<usize> = (0..h + 2 * r as usize)
        .map(|j| reflect(j as isize - r, h))
        .collect();
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = rows[y + k];
            let srow = &tmp[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(srow) {
                *d += kv * s;
            }
        }
    }
    Raster::new(w, h, 1, out).expect("shape preserved")
}

pub(crate) fn gaussian_blur(img: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return img.clone();
    }
    convolve_separable(img, &gaussian_kernel(sigma, 4.0))
}

/// Scharr first derivatives (normalized to unit gain on a linear ramp),
/// replicated borders.
pub(crate) fn scharr(img: &Raster) -> (Raster, Raster) {
    let (w, h) = img.dims();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            let dx = 3.0 * (p(1, -1) - p(-1, -1))
                + 10.0 * (p(1, 0) - p(-1, 0))
                + 3.0 * (p(1, 1) - p(-1, 1));
            let dy = 3.0 * (p(-1, 1) - p(-1, -1))
                + 10.0 * (p(0, 1) - p(0, -1))
                + 3.0 * (p(1, 1) - p(1, -1));
            gx.push(dx / 32.0);
            gy.push(dy / 32.0);
        }
    }
    (
        Raster::new(w, h, 1, gx).expect("shape"),
        Raster::new(w, h, 1, gy).expect("shape"),
    )
}

/// Second derivatives `(Lxx, Lxy, Lyy)` at one pixel by central differences,
/// replicated borders.
#[inline]
pub(crate) fn hessian_at(img: &Raster, x: usize, y: usize) -> (f64, f64, f64) {
    let (x, y) = (x as isize, y as isize);
    let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
    let c = p(0, 0);
    let lxx = p(1, 0) - 2.0 * c + p(-1, 0);
    let lyy = p(0, 1) - 2.0 * c + p(0, -1);
    let lxy = (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1)) / 4.0;
    (lxx, lxy, lyy)
}

/// 2x2 mean-pool downsampling; odd trailing rows/columns are dropped.
pub(crate) fn half_sample(img: &Raster) -> Raster {
    let (w, h) = img.dims();
    let (hw, hh) = ((w / 2).max(1), (h / 2).max(1));
    Raster::from_fn(hw, hh, |x, y| {
        let x0 = (2 * x).min(w - 1);
        let y0 = (2 * y).min(h - 1);
        let x1 = (2 * x + 1).min(w - 1);
        let y1 = (2 * y + 1).min(h - 1);
        0.25 * (img.get(x0, y0) + img.get(x1, y0) + img.get(x0, y1) + img.get(x1, y1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn kernel_normalized_and_symmetric() {
        let k = gaussian_kernel(1.5, 4.0);
        assert_eq!(k.len(), 2 * 6 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Raster::filled(9, 6, 0.4);
        let out = gaussian_blur(&img, 3.0);
        assert!(out.data().iter().all(|&v| (v - 0.4).abs() < 1e-14));
    }

    #[test]
    fn blur_is_rotation_equivariant() {
        let img = Raster::from_fn(16, 16, |x, y| ((x * 31 + y * 17) % 11) as f64 / 10.0);
        let a = gaussian_blur(&img, 1.7).rotate90();
        let b = gaussian_blur(&img.rotate90(), 1.7);
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn scharr_unit_gain_on_ramp() {
        let img = Raster::from_fn(8, 8, |x, y| 0.5 * x as f64 + 0.25 * y as f64);
        let (gx, gy) = scharr(&img);
        assert!((gx.get(3, 3) - 0.5).abs() < 1e-12);
        assert!((gy.get(3, 3) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn hessian_of_quadratic() {
        let img = Raster::from_fn(9, 9, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 * x * x + 2.0 * x * y - y * y
        });
        let (lxx, lxy, lyy) = hessian_at(&img, 4, 4);
        assert!((lxx - 1.0).abs() < 1e-12);
        assert!((lxy - 2.0).abs() < 1e-12);
        assert!((lyy + 2.0).abs() < 1e-12);
    }
}
