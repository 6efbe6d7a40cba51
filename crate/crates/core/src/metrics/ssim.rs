use alloc::vec::Vec;
use num_traits::Float;

use super::{check_pair, MetricError};
use crate::raster::{BinaryMask, Raster};
use crate::sum::NeumaierSum;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Published per-scale exponents, finest first. They sum to 1.0001.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Smallest side that still leaves one full window at the coarsest scale.
pub const MS_SSIM_MIN_SIDE: usize = SSIM_WINDOW << (MS_SSIM_WEIGHTS.len() - 1);

const HALF: usize = SSIM_WINDOW / 2;

fn window_1d() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - HALF as f64;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.map(|v| v / total)
}

/// Separable 'valid' filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = alloc::vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        let out = &mut rows[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            *o = line[x..x + SSIM_WINDOW]
                .iter()
                .zip(k)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = alloc::vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, &kv) in k.iter().enumerate() {
            let line = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (o, &r) in out[y * ow..(y + 1) * ow].iter_mut().zip(line) {
                *o += kv * r;
            }
        }
    }
    out
}

/// Per-window luminance and contrast-structure terms.
struct Maps {
    width: usize,
    height: usize,
    lum: Vec<f64>,
    cs: Vec<f64>,
}

fn ssim_terms(a: &[f64], b: &[f64], w: usize, h: usize) -> Maps {
    let k = window_1d();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let e_aa = filter_valid(&aa, w, h, &k);
    let e_bb = filter_valid(&bb, w, h, &k);
    let e_ab = filter_valid(&ab, w, h, &k);
    let n = mu_a.len();
    let mut lum = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        lum.push((2.0 * ma * mb + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1));
        cs.push((2.0 * cov + SSIM_C2) / (va + vb + SSIM_C2));
    }
    Maps {
        width: w - SSIM_WINDOW + 1,
        height: h - SSIM_WINDOW + 1,
        lum,
        cs,
    }
}

fn check_size(r: &Raster, min: usize) -> Result<(), MetricError> {
    if r.width() < min || r.height() < min {
        return Err(MetricError::ImageTooSmall { min, got: r.dims() });
    }
    Ok(())
}

fn check_mask(r: &Raster, mask: &BinaryMask) -> Result<(), MetricError> {
    if mask.dims() != r.dims() {
        return Err(MetricError::DimensionMismatch {
            a: r.dims(),
            b: mask.dims(),
        });
    }
    Ok(())
}

/// Mean of `values` over windows whose center pixel lies in `mask`.
fn window_mean(
    values: impl Iterator<Item = f64>,
    map_w: usize,
    mask: Option<&BinaryMask>,
) -> Option<f64> {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for (i, v) in values.enumerate() {
        let centered = mask.is_none_or(|m| m.get(i % map_w + HALF, i / map_w + HALF));
        if centered {
            acc.add(v);
            n += 1;
        }
    }
    (n > 0).then(|| acc.total() / n as f64)
}

/// Local SSIM map over every full 11x11 window, `(w - 10) x (h - 10)`.
pub fn ssim_map(pred: &Raster, target: &Raster) -> Result<Raster, MetricError> {
    check_pair(pred, target)?;
    check_size(pred, SSIM_WINDOW)?;
    let (w, h) = pred.dims();
    let m = ssim_terms(pred.data(), target.data(), w, h);
    let data = m.lum.iter().zip(&m.cs).map(|(l, c)| l * c).collect();
    Ok(Raster::new(m.width, m.height, 1, data).expect("map shape"))
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).
pub fn ssim(pred: &Raster, target: &Raster) -> Result<f64, MetricError> {
    let map = ssim_map(pred, target)?;
    Ok(window_mean(map.data().iter().copied(), map.width(), None).expect("nonempty map"))
}

/// Mean local SSIM over windows centered inside `mask`.
pub fn ssim_masked(pred: &Raster, target: &Raster, mask: &BinaryMask) -> Result<f64, MetricError> {
    check_mask(pred, mask)?;
    let map = ssim_map(pred, target)?;
    window_mean(map.data().iter().copied(), map.width(), Some(mask)).ok_or(MetricError::EmptyMask)
}

fn half_pool(data: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push((data[i] + data[i + 1] + data[i + w] + data[i + w + 1]) / 4.0);
        }
    }
    (out, ow, oh)
}

/// A coarse pixel is valid only when all four of its fine pixels are.
fn half_pool_mask(m: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(m.width() / 2, m.height() / 2, |x, y| {
        m.get(2 * x, 2 * y)
            && m.get(2 * x + 1, 2 * y)
            && m.get(2 * x, 2 * y + 1)
            && m.get(2 * x + 1, 2 * y + 1)
    })
}

fn ms_ssim_impl(
    pred: &Raster,
    target: &Raster,
    mask: Option<&BinaryMask>,
) -> Result<f64, MetricError> {
    check_pair(pred, target)?;
    check_size(pred, MS_SSIM_MIN_SIDE)?;
    if let Some(m) = mask {
        check_mask(pred, m)?;
    }
    let (mut w, mut h) = pred.dims();
    let mut a = pred.data().to_vec();
    let mut b = target.data().to_vec();
    let mut mask = mask.cloned();
    let mut product = 1.0;
    let last = MS_SSIM_WEIGHTS.len() - 1;
    for (scale, &weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let m = ssim_terms(&a, &b, w, h);
        let term = if scale < last {
            window_mean(m.cs.iter().copied(), m.width, mask.as_ref())
        } else {
            window_mean(
                m.lum.iter().zip(&m.cs).map(|(l, c)| l * c),
                m.width,
                mask.as_ref(),
            )
        }
        .ok_or(MetricError::EmptyMask)?;
        // Negative terms would make fractional powers undefined.
        product *= term.max(0.0).powf(weight);
        if scale < last {
            let (na, nw, nh) = half_pool(&a, w, h);
            let (nb, _, _) = half_pool(&b, w, h);
            a = na;
            b = nb;
            w = nw;
            h = nh;
            mask = mask.as_ref().map(half_pool_mask);
        }
    }
    Ok(product)
}

/// Five-scale SSIM: contrast-structure means at the four finer scales and
/// the full SSIM mean at the coarsest, combined with the published
/// exponents. Images must be at least 176 pixels on each side.
pub fn ms_ssim(pred: &Raster, target: &Raster) -> Result<f64, MetricError> {
    ms_ssim_impl(pred, target, None)
}

/// [`ms_ssim`] with every per-scale mean restricted to windows centered in
/// the (conservatively half-sampled) mask.
pub fn ms_ssim_masked(
    pred: &Raster,
    target: &Raster,
    mask: &BinaryMask,
) -> Result<f64, MetricError> {
    ms_ssim_impl(pred, target, Some(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn weights_sum_to_published_total() {
        let total: f64 = MS_SSIM_WEIGHTS.iter().sum();
        assert!((total - 1.0001).abs() < 1e-12);
        assert_eq!(MS_SSIM_MIN_SIDE, 176);
    }

    #[test]
    fn identical_is_one() {
        let a = noise(64, 64, 1);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let b = noise(192, 180, 2);
        assert!((ms_ssim(&b, &b).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn halved_image_is_penalized() {
        let a = noise(64, 64, 3);
        let s = ssim(&a, &a.map(|v| 0.5 * v)).unwrap();
        assert!(s > 0.0 && s < 1.0, "{s}");
    }

    #[test]
    fn symmetric() {
        let a = noise(48, 40, 4);
        let b = noise(48, 40, 5);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        let c = noise(180, 180, 6);
        let d = c.map(|v| 0.8 * v + 0.1);
        assert!((ms_ssim(&c, &d).unwrap() - ms_ssim(&d, &c).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn continuity_near_identity() {
        let a = noise(64, 64, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = a.map(|v| v + 1e-6 * (rng.random::<f64>() - 0.5));
        assert!(ssim(&a, &b).unwrap() > 0.9999);
    }

    #[test]
    fn size_errors() {
        let a = noise(10, 40, 1);
        assert!(matches!(
            ssim(&a, &a),
            Err(MetricError::ImageTooSmall { .. })
        ));
        let b = noise(175, 300, 1);
        assert_eq!(
            ms_ssim(&b, &b),
            Err(MetricError::ImageTooSmall {
                min: 176,
                got: (175, 300)
            })
        );
    }

    #[test]
    fn full_mask_matches_unmasked() {
        let a = noise(180, 180, 9);
        let b = noise(180, 180, 10);
        let all = BinaryMask::filled(180, 180, true);
        assert_eq!(ssim_masked(&a, &b, &all).unwrap(), ssim(&a, &b).unwrap());
        assert_eq!(
            ms_ssim_masked(&a, &b, &all).unwrap(),
            ms_ssim(&a, &b).unwrap()
        );
    }
}
