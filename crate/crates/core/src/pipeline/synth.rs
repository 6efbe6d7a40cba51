use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{warp_image, Homography, Point};
use crate::raster::Raster;

/// Bounds of the synthetic appearance and transform. Lengths are given at a
/// 1024-pixel side and scale with `size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub size: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Largest absolute rotation, radians.
    pub max_rotation: f64,
    /// Translation magnitude range, pixels.
    pub translation_min: f64,
    pub translation_max: f64,
    /// Largest absolute projective coefficient.
    pub max_projective: f64,
    /// Standard deviation of the additive noise on the moving image.
    pub noise_sigma: f64,
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            size: 1024,
            scale_min: 0.85,
            scale_max: 1.25,
            max_rotation: 0.5,
            translation_min: 0.0,
            translation_max: 50.0,
            max_projective: 1e-5,
            noise_sigma: 0.02,
            width_min: 2.0,
            width_max: 8.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    /// Bright vessels on a dark background.
    pub fixed: Raster,
    /// The fixed scene seen through `true_h^-1`, polarity inverted, contrast
    /// remapped and noisy.
    pub moving: Raster,
    /// Maps moving-image pixels onto fixed-image pixels.
    pub true_h: Homography,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Point,
    b: Point,
    width: f64,
}

struct Branch {
    pos: Point,
    heading: f64,
    width: f64,
    remaining: f64,
}

fn grow_tree(rng: &mut ChaCha8Rng, p: &SynthParams) -> (Vec<Segment>, Point) {
    let n = p.size as f64;
    let unit = n / 1024.0;
    let disc = [
        n * rng.random_range(0.42..0.58),
        n * rng.random_range(0.42..0.58),
    ];
    let bend = Normal::new(0.0, 0.07).unwrap();
    let roots = rng.random_range(7..=10);
    let mut stack: Vec<Branch> = (0..roots)
        .map(|k| Branch {
            pos: disc,
            heading: 2.0 * PI * k as f64 / roots as f64 + rng.random_range(-0.3..0.3),
            width: rng.random_range(0.8 * p.width_max..=p.width_max),
            remaining: n * rng.random_range(0.45..0.8),
        })
        .collect();
    let step = 4.0 * unit;
    let mut segments = Vec::new();
    while let Some(mut b) = stack.pop() {
        while b.remaining > 0.0 && b.width >= p.width_min && segments.len() < 40_000 {
            b.heading += bend.sample(rng);
            let next = [
                b.pos[0] + step * b.heading.cos(),
                b.pos[1] + step * b.heading.sin(),
            ];
            segments.push(Segment {
                a: b.pos,
                b: next,
                width: b.width * unit,
            });
            b.pos = next;
            b.remaining -= step;
            b.width *= 0.997;
            if !(-0.05 * n..1.05 * n).contains(&next[0])
                || !(-0.05 * n..1.05 * n).contains(&next[1])
            {
                break;
            }
            if rng.random::<f64>() < 0.02 {
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let width = (b.width * rng.random_range(0.55..0.8)).max(p.width_min);
                stack.push(Branch {
                    pos: b.pos,
                    heading: b.heading + side * rng.random_range(0.4..1.1),
                    width,
                    remaining: n * rng.random_range(0.1..0.35) * (width / p.width_max).sqrt(),
                });
            }
        }
    }
    (segments, disc)
}

fn render(segments: &[Segment], disc: Point, size: usize) -> Raster {
    let n = size as f64;
    let mut img = Raster::from_fn(size, size, |x, y| {
        let dx = (x as f64 - n / 2.0) / n;
        let dy = (y as f64 - n / 2.0) / n;
        let vignette = 0.05 + 0.05 * (1.0 - 2.0 * (dx * dx + dy * dy));
        let r2 = (x as f64 - disc[0]).powi(2) + (y as f64 - disc[1]).powi(2);
        let disc_r = 0.035 * n;
        vignette + 0.35 * (-r2 / (2.0 * disc_r * disc_r)).exp()
    });
    for s in segments {
        let sigma = s.width / 3.0;
        let amp = 0.55 + 0.3 * (s.width / (n / 1024.0) / 8.0).min(1.0);
        let pad = 3.0 * sigma + 1.0;
        let x0 = (s.a[0].min(s.b[0]) - pad).floor().max(0.0) as usize;
        let y0 = (s.a[1].min(s.b[1]) - pad).floor().max(0.0) as usize;
        let x1 = ((s.a[0].max(s.b[0]) + pad).ceil().max(0.0) as usize).min(size);
        let y1 = ((s.a[1].max(s.b[1]) + pad).ceil().max(0.0) as usize).min(size);
        let (vx, vy) = (s.b[0] - s.a[0], s.b[1] - s.a[1]);
        let len2 = (vx * vx + vy * vy).max(1e-12);
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 - s.a[0], y as f64 - s.a[1]);
                let t = ((px * vx + py * vy) / len2).clamp(0.0, 1.0);
                let d2 = (px - t * vx).powi(2) + (py - t * vy).powi(2);
                let v = amp * (-d2 / (2.0 * sigma * sigma)).exp();
                if v > img.get(x, y) {
                    img.set(x, y, v);
                }
            }
        }
    }
    img.clamp_unit()
}

/// Draws a transform inside the parameter bounds: `scale * R(rotation)`
/// about the image center, a translation and a mild projective row.
fn sample_homography(rng: &mut ChaCha8Rng, p: &SynthParams) -> Homography {
    let unit = p.size as f64 / 1024.0;
    let s = rng.random_range(p.scale_min..=p.scale_max);
    let theta = rng.random_range(-p.max_rotation..=p.max_rotation);
    let t_mag = unit * rng.random_range(p.translation_min..=p.translation_max);
    let t_dir = rng.random_range(0.0..2.0 * PI);
    let proj = p.max_projective / unit;
    let g = if proj > 0.0 {
        [
            rng.random_range(-proj..=proj),
            rng.random_range(-proj..=proj),
        ]
    } else {
        [0.0, 0.0]
    };
    let c = (p.size as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.sin_cos();
    let (a, b, cc, d) = (s * cos, -s * sin, s * sin, s * cos);
    let tx = c + t_mag * t_dir.cos() - (a * c + b * c);
    let ty = c + t_mag * t_dir.sin() - (cc * c + d * c);
    Homography::new([[a, b, tx], [cc, d, ty], [g[0], g[1], 1.0]])
        .expect("well-conditioned by construction")
}

/// Synthetic fixed/moving pair with a known transform; deterministic per seed.
pub fn synth_pair(seed: u64, p: &SynthParams) -> SynthPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (segments, disc) = grow_tree(&mut rng, p);
    let fixed = render(&segments, disc, p.size);
    let true_h = sample_homography(&mut rng, p);

    // Inverted, gamma-remapped appearance. Areas the fixed view does not
    // cover get the mean level instead of black, which would otherwise put
    // hard artificial edges inside the moving field of view.
    let remapped = fixed.map(|v| 0.9 - 0.75 * v.powf(0.8));
    let fill = remapped.data().iter().sum::<f64>() / remapped.data().len() as f64;
    let warped = warp_image(
        &remapped.map(|v| v - fill),
        &true_h.inverse().expect("invertible"),
        p.size,
        p.size,
    )
    .expect("invertible")
    .map(|v| v + fill);
    let noise = Normal::new(0.0, p.noise_sigma.max(0.0)).unwrap();
    let moving = warped.map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0));
    SynthPair {
        fixed,
        moving,
        true_h,
    }
}
