use alloc::vec::Vec;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::filter::{gaussian_blur, half_sample, scharr};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaleSpaceParams {
    pub octaves: usize,
    pub sublevels: usize,
    /// Scale of the first level, in pixels.
    pub base_sigma: f64,
    /// Percentile of nonzero gradient magnitudes used as the contrast factor.
    pub contrast_percentile: f64,
    /// Stability bound of one explicit diffusion step.
    pub tau_max: f64,
}

impl Default for ScaleSpaceParams {
    fn default() -> Self {
        Self {
            octaves: 4,
            sublevels: 4,
            base_sigma: 1.6,
            contrast_percentile: 0.7,
            tau_max: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaleLevel {
    pub image: Raster,
    /// Scale in full-resolution pixels.
    pub sigma: f64,
    /// Evolution time `sigma^2 / 2`.
    pub time: f64,
    pub octave: usize,
    pub sublevel: usize,
}

impl ScaleLevel {
    /// Scale measured in this level's own pixels.
    pub fn pixel_sigma(&self) -> f64 {
        self.sigma / (1u64 << self.octave) as f64
    }
}

#[derive(Debug, Clone)]
pub struct ScaleSpace {
    pub levels: Vec<ScaleLevel>,
    pub octaves: usize,
    pub sublevels: usize,
    /// Contrast factor `k` of the conductivity function.
    pub contrast: f64,
    pub width: usize,
    pub height: usize,
}

pub fn build_scale_space(
    img: &Raster,
    octaves: usize,
    sublevels: usize,
) -> Result<ScaleSpace, FeatureError> {
    build_scale_space_with(
        img,
        &ScaleSpaceParams {
            octaves,
            sublevels,
            ..ScaleSpaceParams::default()
        },
    )
}

/// Builds the nonlinear diffusion scale space.
///
/// Level `(o, s)` has scale `base_sigma * 2^(o + s / sublevels)`. The first
/// level is the input blurred with `base_sigma`; each later level evolves
/// the previous one (half-sampled on octave changes) under Perona–Malik
/// diffusion with conductivity `1 / (1 + |grad L_1|^2 / k^2)`, using fast
/// explicit diffusion cycles to cover the time difference.
pub fn build_scale_space_with(
    img: &Raster,
    p: &ScaleSpaceParams,
) -> Result<ScaleSpace, FeatureError> {
    if img.channels() != 1 {
        return Err(FeatureError::NotGrayscale(img.channels()));
    }
    let (w, h) = img.dims();
    if w < 64 || h < 64 {
        return Err(FeatureError::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    if p.octaves == 0 || p.sublevels == 0 {
        return Err(FeatureError::EmptySchedule);
    }

    let contrast = contrast_factor(img, p.contrast_percentile);
    let mut levels: Vec<ScaleLevel> = Vec::with_capacity(p.octaves * p.sublevels);
    for o in 0..p.octaves {
        for s in 0..p.sublevels {
            let sigma = p.base_sigma * 2f64.powf(o as f64 + s as f64 / p.sublevels as f64);
            let time = 0.5 * sigma * sigma;
            let image = match levels.last() {
                None => gaussian_blur(img, p.base_sigma),
                Some(prev) => {
                    let start = if o > prev.octave {
                        half_sample(&prev.image)
                    } else {
                        prev.image.clone()
                    };
                    // Diffusion time in this octave's pixel units.
                    let dt = (time - prev.time) / 4f64.powi(o as i32);
                    evolve(start, dt, contrast, (1u64 << o) as f64, p.tau_max)
                }
            };
            levels.push(ScaleLevel {
                image,
                sigma,
                time,
                octave: o,
                sublevel: s,
            });
        }
    }
    Ok(ScaleSpace {
        levels,
        octaves: p.octaves,
        sublevels: p.sublevels,
        contrast,
        width: w,
        height: h,
    })
}

/// Contrast factor: the requested percentile of nonzero gradient magnitudes
/// of the input blurred with sigma 1, borders excluded.
fn contrast_factor(img: &Raster, percentile: f64) -> f64 {
    let smooth = gaussian_blur(img, 1.0);
    let (gx, gy) = scharr(&smooth);
    let (w, h) = img.dims();
    let mut mags: Vec<f64> = Vec::with_capacity(w * h);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let (a, b) = (gx.get(x, y), gy.get(x, y));
            let m = (a * a + b * b).sqrt();
            if m > 1e-12 {
                mags.push(m);
            }
        }
    }
    if mags.is_empty() {
        return 1.0;
    }
    let idx = ((percentile.clamp(0.0, 1.0)) * (mags.len() - 1) as f64).floor() as usize;
    let (_, kth, _) = mags.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *kth
}

/// Step sizes of one FED cycle covering diffusion time `t` with per-step
/// stability bound `tau_max`: the smallest `n` with
/// `tau_max * (n^2 + n) / 3 >= t`, steps `tau_i = d / cos^2(pi (2i + 1) / (4n + 2))`
/// scaled so that they sum to exactly `t`.
pub fn fed_step_sizes(t: f64, tau_max: f64) -> Vec<f64> {
    if !(t > 0.0) {
        return Vec::new();
    }
    let n = ((3.0 * t / tau_max + 0.25).sqrt() - 0.5 - 1e-8)
        .ceil()
        .max(1.0) as usize;
    let scale = 3.0 * t / (tau_max * (n * (n + 1)) as f64);
    let c = 1.0 / (4 * n + 2) as f64;
    let d = scale * tau_max / 2.0;
    (0..n)
        .map(|k| {
            let hk = (core::f64::consts::PI * (2 * k + 1) as f64 * c).cos();
            d / (hk * hk)
        })
        .collect()
}

/// Advances `img` by diffusion time `dt` (level pixel units). Gradients for
/// the conductivity are measured in full-resolution units (`pixel_size`
/// full-resolution pixels per level pixel) so one contrast factor serves
/// every octave.
fn evolve(mut img: Raster, dt: f64, k: f64, pixel_size: f64, tau_max: f64) -> Raster {
    let taus = fed_step_sizes(dt, tau_max);
    if taus.is_empty() {
        return img;
    }
    let smooth = gaussian_blur(&img, 1.0);
    let (gx, gy) = scharr(&smooth);
    let inv_k2 = 1.0 / (k * k * pixel_size * pixel_size);
    let flow: Vec<f64> = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| 1.0 / (1.0 + (a * a + b * b) * inv_k2))
        .collect();
    let (w, h) = img.dims();
    let mut delta = alloc::vec![0.0; w * h];
    for tau in taus {
        diffusion_step(img.data_mut(), &flow, &mut delta, w, h, tau);
    }
    img
}

/// One explicit step `L += tau * div(g grad L)` with half-grid conductivities
/// and reflecting (no-flux) borders.
fn diffusion_step(l: &mut [f64], g: &[f64], delta: &mut [f64], w: usize, h: usize, tau: f64) {
    delta.fill(0.0);
    for y in 0..h {
        let row = y * w;
        for x in 0..w - 1 {
            let i = row + x;
            let f = 0.5 * (g[i] + g[i + 1]) * (l[i + 1] - l[i]);
            delta[i] += f;
            delta[i + 1] -= f;
        }
    }
    for y in 0..h - 1 {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let j = i + w;
            let f = 0.5 * (g[i] + g[j]) * (l[j] - l[i]);
            delta[i] += f;
            delta[j] -= f;
        }
    }
    for (v, d) in l.iter_mut().zip(delta.iter()) {
        *v += tau * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sigma_schedule() {
        let img = Raster::from_fn(64, 64, |x, _| x as f64 / 64.0);
        let ss = build_scale_space(&img, 2, 2).unwrap();
        let sigmas: Vec<f64> = ss.levels.iter().map(|l| l.sigma).collect();
        let expected = [1.6, 2.2627417, 3.2, 4.5254834];
        for (a, b) in sigmas.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{sigmas:?}");
        }
        assert!(sigmas.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(ss.levels[1].image.dims(), (64, 64));
        assert_eq!(ss.levels[2].image.dims(), (32, 32));
    }

    #[test]
    fn rejects_small_images() {
        assert!(matches!(
            build_scale_space(&Raster::zeros(63, 100), 4, 4),
            Err(FeatureError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn constant_image_stays_constant() {
        let ss = build_scale_space(&Raster::filled(96, 80, 0.42), 3, 3).unwrap();
        for level in &ss.levels {
            assert!(level.image.data().iter().all(|&v| (v - 0.42).abs() < 1e-12));
        }
    }

    #[test]
    fn fed_cycle_sums_to_time_and_respects_bound_count() {
        for &t in &[0.1, 0.7, 1.92, 5.0, 37.5] {
            let taus = fed_step_sizes(t, 0.25);
            let total: f64 = taus.iter().sum();
            assert!((total - t).abs() < 1e-10 * t.max(1.0));
            let n = taus.len() as f64;
            assert!(0.25 * (n * n + n) / 3.0 >= t - 1e-9);
            let m = n - 1.0;
            assert!(m == 0.0 || 0.25 * (m * m + m) / 3.0 < t);
        }
        assert!(fed_step_sizes(0.0, 0.25).is_empty());
    }

    #[test]
    fn diffusion_step_conserves_mass() {
        let (w, h) = (7, 5);
        let mut l: Vec<f64> = (0..w * h).map(|i| ((i * 13) % 7) as f64).collect();
        let g: Vec<f64> = (0..w * h)
            .map(|i| 0.2 + ((i * 5) % 3) as f64 * 0.3)
            .collect();
        let before: f64 = l.iter().sum();
        let mut delta = vec![0.0; w * h];
        diffusion_step(&mut l, &g, &mut delta, w, h, 0.2);
        let after: f64 = l.iter().sum();
        assert!((before - after).abs() < 1e-10);
    }

    fn max_edge_gradient(img: &Raster) -> f64 {
        let y = img.height() / 2;
        (1..img.width())
            .map(|x| (img.get(x, y) - img.get(x - 1, y)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn nonlinear_diffusion_preserves_edges_better_than_gaussian() {
        let img = Raster::from_fn(128, 128, |x, _| if x < 64 { 0.0 } else { 1.0 });
        let ss = build_scale_space(&img, 1, 4).unwrap();
        for level in ss.levels.iter().skip(1) {
            let linear = gaussian_blur(&img, level.sigma);
            let nl = max_edge_gradient(&level.image);
            let lin = max_edge_gradient(&linear);
            assert!(nl >= lin, "sigma {}: {nl} < {lin}", level.sigma);
        }
    }
}
