use alloc::vec::Vec;
use num_traits::Float;

use super::{GeometryError, Homography};
use crate::raster::{BinaryMask, Raster};

/// Inverse-mapped warp: output pixel `p` samples `src` bilinearly at
/// `h^-1 p`. Samples more than half a pixel outside `src` are 0.
pub fn warp_image(
    src: &Raster,
    h: &Homography,
    out_w: usize,
    out_h: usize,
) -> Result<Raster, GeometryError> {
    let inv = h.inverse()?;
    let c = src.channels();
    let (w, hgt) = (src.width() as f64, src.height() as f64);
    let mut data = Vec::with_capacity(out_w * out_h * c);
    for y in 0..out_h {
        for x in 0..out_w {
            let inside = inv
                .apply([x as f64, y as f64])
                .filter(|q| q[0] >= -0.5 && q[1] >= -0.5 && q[0] <= w - 0.5 && q[1] <= hgt - 0.5);
            match inside {
                None => data.extend(core::iter::repeat_n(0.0, c)),
                Some(q) => {
                    let sx = q[0].clamp(0.0, w - 1.0);
                    let sy = q[1].clamp(0.0, hgt - 1.0);
                    let x0 = sx.floor() as usize;
                    let y0 = sy.floor() as usize;
                    let x1 = (x0 + 1).min(src.width() - 1);
                    let y1 = (y0 + 1).min(src.height() - 1);
                    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                    for ch in 0..c {
                        let top = src.get_channel(x0, y0, ch) * (1.0 - fx)
                            + src.get_channel(x1, y0, ch) * fx;
                        let bottom = src.get_channel(x0, y1, ch) * (1.0 - fx)
                            + src.get_channel(x1, y1, ch) * fx;
                        data.push(top * (1.0 - fy) + bottom * fy);
                    }
                }
            }
        }
    }
    Ok(Raster::new(out_w, out_h, c, data).expect("shape computed from inputs"))
}

/// Nearest-neighbor counterpart of [`warp_image`] for masks.
pub fn warp_mask(
    src: &BinaryMask,
    h: &Homography,
    out_w: usize,
    out_h: usize,
) -> Result<BinaryMask, GeometryError> {
    let inv = h.inverse()?;
    Ok(BinaryMask::from_fn(out_w, out_h, |x, y| {
        inv.apply([x as f64, y as f64])
            .is_some_and(|q| src.get_nearest(q[0], q[1]))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let a = (-((xf - 40.0).powi(2) + (yf - 30.0).powi(2)) / 200.0).exp();
            let b = (-((xf - 70.0).powi(2) + (yf - 60.0).powi(2)) / 350.0).exp();
            0.7 * a + 0.5 * b
        })
    }

    fn interior_mad(a: &Raster, b: &Raster, margin: usize) -> f64 {
        let (w, h) = a.dims();
        let mut total = 0.0;
        let mut n = 0.0;
        for y in margin..h - margin {
            for x in margin..w - margin {
                total += (a.get(x, y) - b.get(x, y)).abs();
                n += 1.0;
            }
        }
        total / n
    }

    #[test]
    fn identity_is_exact() {
        let img = blobs(96, 80);
        let out = warp_image(&img, &Homography::identity(), 96, 80).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-7);
        }
        let mask = BinaryMask::from_fn(20, 20, |x, y| (x * 7 + y * 3) % 5 == 0);
        assert_eq!(
            warp_mask(&mask, &Homography::identity(), 20, 20).unwrap(),
            mask
        );
    }

    #[test]
    fn translation_moves_mask_pixel() {
        let mut mask = BinaryMask::filled(32, 32, false);
        mask.set(5, 5, true);
        let out = warp_mask(&mask, &Homography::translation(10.0, 0.0), 32, 32).unwrap();
        assert_eq!(out.count(), 1);
        assert!(out.get(15, 5));
    }

    #[test]
    fn round_trip_and_composition() {
        let img = blobs(110, 100);
        let h1 = Homography::similarity_about(1.08, 0.12, [55.0, 50.0], [2.5, -1.5]);
        let h2 =
            Homography::new([[0.97, 0.03, 1.0], [-0.02, 1.01, 2.0], [1e-5, 0.0, 1.0]]).unwrap();
        let there = warp_image(&img, &h1, 110, 100).unwrap();
        let back = warp_image(&there, &h1.inverse().unwrap(), 110, 100).unwrap();
        assert!(interior_mad(&img, &back, 10) < 0.02);

        let twice = warp_image(&there, &h2, 110, 100).unwrap();
        let once = warp_image(&img, &h2.compose(&h1), 110, 100).unwrap();
        assert!(interior_mad(&twice, &once, 10) < 0.02);
    }

    #[test]
    fn out_of_bounds_is_zero() {
        let img = Raster::filled(10, 10, 1.0);
        let out = warp_image(&img, &Homography::translation(20.0, 0.0), 10, 10).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_homography_rejected() {
        assert!(Homography::new([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }
}
