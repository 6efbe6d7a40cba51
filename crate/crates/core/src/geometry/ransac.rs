use alloc::vec::Vec;
use core::cmp::Ordering;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dlt_homography, GeometryError, Homography, MatchSet, Point};
use crate::features::Keypoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    /// Inlier bound on the symmetric transfer error, in pixels.
    pub thresh_px: f64,
    pub confidence: f64,
    pub max_iter: usize,
    /// Smallest consensus set accepted as a model.
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            thresh_px: 3.0,
            confidence: 0.995,
            max_iter: 2000,
            min_inliers: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    /// Indices of inlier correspondences, ascending.
    pub inliers: Vec<usize>,
    pub total: usize,
    pub iterations: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }
}

/// Robust `moving -> fixed` homography from descriptor matches.
pub fn ransac_homography(
    matches: &MatchSet,
    moving: &[Keypoint],
    fixed: &[Keypoint],
    params: &RansacParams,
) -> Result<RansacResult, GeometryError> {
    let src: Vec<Point> = matches
        .iter()
        .map(|m| [moving[m.moving].x, moving[m.moving].y])
        .collect();
    let dst: Vec<Point> = matches
        .iter()
        .map(|m| [fixed[m.fixed].x, fixed[m.fixed].y])
        .collect();
    ransac_points(&src, &dst, params)
}

/// Mean of the forward and backward reprojection distances.
#[inline]
fn symmetric_error(h: &Homography, h_inv: &Homography, s: Point, d: Point) -> f64 {
    let (Some(f), Some(b)) = (h.apply(s), h_inv.apply(d)) else {
        return f64::INFINITY;
    };
    let ef = ((f[0] - d[0]).powi(2) + (f[1] - d[1]).powi(2)).sqrt();
    let eb = ((b[0] - s[0]).powi(2) + (b[1] - s[1]).powi(2)).sqrt();
    0.5 * (ef + eb)
}

fn inliers_of(h: &Homography, src: &[Point], dst: &[Point], thresh: f64) -> Vec<usize> {
    let Ok(h_inv) = h.inverse() else {
        return Vec::new();
    };
    (0..src.len())
        .filter(|&i| symmetric_error(h, &h_inv, src[i], dst[i]) < thresh)
        .collect()
}

/// Lexicographic order on matrix entries; used to break inlier-count ties.
fn lex_cmp(a: &Homography, b: &Homography) -> Ordering {
    a.matrix()
        .iter()
        .flatten()
        .zip(b.matrix().iter().flatten())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn required_iterations(inlier_ratio: f64, confidence: f64) -> f64 {
    let w4 = inlier_ratio.powi(4);
    if w4 >= 1.0 {
        return 1.0;
    }
    if w4 <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - confidence).ln() / (1.0 - w4).ln()).ceil()
}

/// Four distinct indices from iteration `iter`'s own random stream.
fn sample4(seed: u64, iter: usize, n: usize) -> [usize; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter as u64);
    let mut idx = [0usize; 4];
    let mut k = 0;
    while k < 4 {
        let c = rng.random_range(0..n);
        if !idx[..k].contains(&c) {
            idx[k] = c;
            k += 1;
        }
    }
    idx
}

/// RANSAC over raw correspondences `src[i] -> dst[i]`.
///
/// Each iteration draws a minimal sample from a random stream keyed by
/// `(seed, iteration)`, fits a DLT model and counts inliers by symmetric
/// transfer error. The iteration budget shrinks adaptively with the best
/// inlier ratio seen. The best model is refit on its whole consensus set.
pub fn ransac_points(
    src: &[Point],
    dst: &[Point],
    params: &RansacParams,
) -> Result<RansacResult, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    let n = src.len();
    if n < 4 {
        return Err(GeometryError::TooFewMatches { got: n });
    }

    let mut best: Option<(Homography, usize)> = None;
    let mut budget = params.max_iter as f64;
    let mut iter = 0usize;
    while (iter as f64) < budget && iter < params.max_iter {
        let idx = sample4(params.seed, iter, n);
        iter += 1;
        let s = idx.map(|i| src[i]);
        let d = idx.map(|i| dst[i]);
        let Ok(h) = dlt_homography(&s, &d) else {
            continue;
        };
        let count = inliers_of(&h, src, dst, params.thresh_px).len();
        let better = match &best {
            None => count > 0,
            Some((bh, bc)) => count > *bc || (count == *bc && lex_cmp(&h, bh).is_lt()),
        };
        if better {
            best = Some((h, count));
            let needed = required_iterations(count as f64 / n as f64, params.confidence);
            budget = needed.min(params.max_iter as f64);
        }
    }

    let best_count = best.as_ref().map_or(0, |b| b.1);
    if best_count < params.min_inliers {
        return Err(GeometryError::NoConsensus {
            best: best_count,
            required: params.min_inliers,
        });
    }
    let (h, _) = best.unwrap();
    let consensus = inliers_of(&h, src, dst, params.thresh_px);
    let s: Vec<Point> = consensus.iter().map(|&i| src[i]).collect();
    let d: Vec<Point> = consensus.iter().map(|&i| dst[i]).collect();
    let (homography, inliers) = match dlt_homography(&s, &d) {
        Ok(refit) => {
            let inl = inliers_of(&refit, src, dst, params.thresh_px);
            if inl.len() >= params.min_inliers {
                (refit, inl)
            } else {
                (h, consensus)
            }
        }
        Err(_) => (h, consensus),
    };
    Ok(RansacResult {
        homography,
        inliers,
        total: n,
        iterations: iter,
    })
}
