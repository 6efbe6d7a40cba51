use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{warp_image, Homography};
use crate::raster::{resize_bilinear, Raster};

pub const AREA_SCALE_MIN: f64 = 0.3;
pub const AREA_SCALE_MAX: f64 = 3.5;
pub const MAX_ROTATION_DEG: f64 = 45.0;

/// One draw of the augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentDraw {
    /// Crop area relative to the image area.
    pub area_scale: f64,
    /// Crop position as fractions of the free range along each axis.
    pub crop_fx: f64,
    pub crop_fy: f64,
    pub hflip: bool,
    pub vflip: bool,
    pub rotation_deg: f64,
}

pub fn sample_augment(rng: &mut impl Rng) -> AugmentDraw {
    AugmentDraw {
        area_scale: rng.random_range(AREA_SCALE_MIN..=AREA_SCALE_MAX),
        crop_fx: rng.random::<f64>(),
        crop_fy: rng.random::<f64>(),
        hflip: rng.random::<bool>(),
        vflip: rng.random::<bool>(),
        rotation_deg: rng.random_range(0.0..=MAX_ROTATION_DEG),
    }
}

/// Resized crop, flips, then rotation about the center with zero fill.
/// Output dimensions equal the input's.
pub fn apply_augment(img: &Raster, d: &AugmentDraw) -> Raster {
    let (w, h) = img.dims();
    let side = d.area_scale.sqrt();
    let cw = ((side * w as f64).round() as usize).clamp(1, w);
    let ch = ((side * h as f64).round() as usize).clamp(1, h);
    let x0 = ((w - cw) as f64 * d.crop_fx).round() as usize;
    let y0 = ((h - ch) as f64 * d.crop_fy).round() as usize;
    let c = img.channels();
    let mut data = alloc::vec::Vec::with_capacity(cw * ch * c);
    for y in y0..y0 + ch {
        for x in x0..x0 + cw {
            for k in 0..c {
                data.push(img.get_channel(x, y, k));
            }
        }
    }
    let crop = Raster::new(cw, ch, c, data).expect("crop inside image");
    let mut out = resize_bilinear(&crop, w, h);
    if d.hflip {
        out = out.flip_horizontal();
    }
    if d.vflip {
        out = out.flip_vertical();
    }
    if d.rotation_deg != 0.0 {
        let center = [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0];
        let rot =
            Homography::similarity_about(1.0, d.rotation_deg.to_radians(), center, [0.0, 0.0]);
        out = warp_image(&out, &rot, w, h).expect("rotation is invertible");
    }
    out
}

/// Training-style augmentation, deterministic per seed.
pub fn augment_random(img: &Raster, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_augment(img, &sample_augment(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> Raster {
        Raster::from_fn(40, 30, |x, y| ((x * 3 + y * 7) % 17) as f64 / 17.0)
    }

    #[test]
    fn deterministic_and_shape_preserving() {
        let a = img();
        for seed in 0..50 {
            let out = augment_random(&a, seed);
            assert_eq!(out.dims(), a.dims());
            assert_eq!(out, augment_random(&a, seed));
        }
    }

    #[test]
    fn scale_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: alloc::vec::Vec<f64> = (0..10_000)
            .map(|_| sample_augment(&mut rng).area_scale)
            .collect();
        let min = draws.iter().copied().fold(f64::INFINITY, f64::min);
        let max = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(min >= 0.3 && max <= 3.5);
        assert!((mean - 1.9).abs() / 1.9 < 0.02, "{mean}");
    }

    #[test]
    fn identity_draw_is_identity() {
        let a = img();
        let d = AugmentDraw {
            area_scale: 1.0,
            crop_fx: 0.5,
            crop_fy: 0.5,
            hflip: false,
            vflip: false,
            rotation_deg: 0.0,
        };
        assert_eq!(apply_augment(&a, &d), a);
        let flipped = apply_augment(
            &a,
            &AugmentDraw {
                hflip: true,
                vflip: true,
                ..d
            },
        );
        assert_eq!(flipped, a.flip_horizontal().flip_vertical());
    }
}
