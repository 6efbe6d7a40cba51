use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Validity};
use crate::linalg::{mat3_det, mat3_inverse, mat3_mul, svd_right, Mat3};

pub type Point = [f64; 2];

/// Projective transform with `m[2][2] == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: Mat3,
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = GeometryError;

    fn try_from(m: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Homography::new(m)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.m
    }
}

impl Homography {
    /// Normalizes `m` so the bottom-right entry is 1.
    pub fn new(m: Mat3) -> Result<Self, GeometryError> {
        let s = m[2][2];
        if !s.is_finite() || s.abs() < 1e-12 || m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::SingularHomography);
        }
        let mut out = m;
        for row in &mut out {
            for v in row {
                *v /= s;
            }
        }
        let h = Homography { m: out };
        let scale = out.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if mat3_det(&out).abs() <= 1e-12 * scale * scale * scale {
            return Err(GeometryError::SingularHomography);
        }
        Ok(h)
    }

    pub const fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// `x -> scale * R(rotation) * x + t`.
    pub fn similarity(scale: f64, rotation: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = rotation.sin_cos();
        Homography {
            m: [
                [scale * c, -scale * s, tx],
                [scale * s, scale * c, ty],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    /// Similarity about a center point instead of the origin.
    pub fn similarity_about(scale: f64, rotation: f64, center: Point, shift: Point) -> Self {
        let to_origin = Homography::translation(-center[0], -center[1]);
        let back = Homography::translation(center[0] + shift[0], center[1] + shift[1]);
        back.compose(&Homography::similarity(scale, rotation, 0.0, 0.0).compose(&to_origin))
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    #[inline]
    pub fn apply(&self, p: Point) -> Option<Point> {
        let m = &self.m;
        let w = m[2][0] * p[0] + m[2][1] * p[1] + m[2][2];
        if w.abs() < 1e-12 {
            return None;
        }
        Some([
            (m[0][0] * p[0] + m[0][1] * p[1] + m[0][2]) / w,
            (m[1][0] * p[0] + m[1][1] * p[1] + m[1][2]) / w,
        ])
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let inv = mat3_inverse(&self.m).ok_or(GeometryError::SingularHomography)?;
        Homography::new(inv)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Homography {
        let m = mat3_mul(&self.m, &other.m);
        Homography::new(m).unwrap_or(Homography { m })
    }

    pub fn determinant(&self) -> f64 {
        mat3_det(&self.m)
    }

    /// Re-expresses the transform in coordinates scaled by `factor`
    /// (`S * H * S^-1` with `S` the pixel-center-preserving rescale
    /// `x' = (x + 0.5) * factor - 0.5`).
    pub fn rescale_coordinates(&self, factor: f64) -> Homography {
        self.between_frames([factor; 2], [factor; 2])
    }

    /// Conjugates by separate per-axis rescales of the source and
    /// destination frames: `S_dst * H * S_src^-1`, where each `S` maps
    /// `x -> (x + 0.5) * f - 0.5` per axis.
    pub fn between_frames(&self, src_factor: [f64; 2], dst_factor: [f64; 2]) -> Homography {
        let frame = |f: [f64; 2]| Homography {
            m: [
                [f[0], 0.0, 0.5 * (f[0] - 1.0)],
                [0.0, f[1], 0.5 * (f[1] - 1.0)],
                [0.0, 0.0, 1.0],
            ],
        };
        let src_inv = frame([1.0 / src_factor[0], 1.0 / src_factor[1]]);
        frame(dst_factor).compose(&self.compose(&src_inv))
    }

    /// Mean distance between where `self` and `other` send the four corners
    /// of a `width x height` image.
    pub fn corner_error(&self, other: &Homography, width: usize, height: usize) -> f64 {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        let corners = [[0.0, 0.0], [w, 0.0], [0.0, h], [w, h]];
        let mut total = 0.0;
        for c in corners {
            match (self.apply(c), other.apply(c)) {
                (Some(a), Some(b)) => {
                    total += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                }
                _ => return f64::INFINITY,
            }
        }
        total / 4.0
    }
}

/// Hartley normalization: centroid to the origin, mean distance `sqrt(2)`.
fn normalization(pts: &[Point]) -> Option<(Mat3, Vec<Point>)> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 1e-12) {
        return None;
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    let t = [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]];
    let normed = pts
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    Some((t, normed))
}

fn has_collinear_triple(pts: &[Point]) -> bool {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if cross.abs() < 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized direct linear transform from `src -> dst` correspondences.
pub fn dlt_homography(src: &[Point], dst: &[Point]) -> Result<Homography, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    let n = src.len();
    if n < 4 {
        return Err(GeometryError::TooFewPoints { needed: 4, got: n });
    }
    let (t_src, src_n) = normalization(src).ok_or(GeometryError::DegenerateConfiguration)?;
    let (t_dst, dst_n) = normalization(dst).ok_or(GeometryError::DegenerateConfiguration)?;
    if n == 4 && (has_collinear_triple(&src_n) || has_collinear_triple(&dst_n)) {
        return Err(GeometryError::DegenerateConfiguration);
    }

    let mut a = Vec::with_capacity(2 * n * 9);
    for (s, d) in src_n.iter().zip(&dst_n) {
        let (x, y) = (s[0], s[1]);
        let (u, v) = (d[0], d[1]);
        a.extend_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        a.extend_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
    }
    let (sv, vecs) = svd_right(&a, 2 * n, 9);
    // A second (near-)null direction means the fit is underdetermined.
    if sv[7] <= 1e-9 * sv[0] {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let h = &vecs[8];
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];
    let t_dst_inv = mat3_inverse(&t_dst).ok_or(GeometryError::DegenerateConfiguration)?;
    let m = mat3_mul(&t_dst_inv, &mat3_mul(&hn, &t_src));
    Homography::new(m).map_err(|_| GeometryError::DegenerateConfiguration)
}

/// Isotropic scale `sqrt|det A|` and polar-decomposition rotation angle of
/// the upper-left block `A`. A negative determinant (reflection) is reported
/// through [`validity_check`]; here the angle is that of the rotation factor
/// of `A` with its reflection removed.
pub fn similarity_decompose(h: &Homography) -> Result<(f64, f64), GeometryError> {
    let m = h.matrix();
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let det = a * d - b * c;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(GeometryError::SingularUpperBlock);
    }
    let rotation = if det > 0.0 {
        (c - b).atan2(a + d)
    } else {
        // A = R * diag(1, -1) * P'; fold the reflection into the second column.
        (c + b).atan2(a - d)
    };
    Ok((det.abs().sqrt(), rotation))
}

/// Why a homography fell outside the validity window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidityFailure {
    ScaleBelow { scale: f64, min: f64 },
    ScaleAbove { scale: f64, max: f64 },
    Rotation { rotation: f64, max: f64 },
    Reflection,
    Singular,
}

impl fmt::Display for ValidityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityFailure::ScaleBelow { scale, min } => write!(f, "scale {scale:.2} < {min}"),
            ValidityFailure::ScaleAbove { scale, max } => write!(f, "scale {scale:.2} > {max}"),
            ValidityFailure::Rotation { rotation, max } => {
                write!(f, "|rotation| {:.2} \u{2265} {max}", rotation.abs())
            }
            ValidityFailure::Reflection => f.write_str("reflection"),
            ValidityFailure::Singular => f.write_str("singular upper block"),
        }
    }
}

/// Accepted scale interval (inclusive) and rotation bound (exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityWindow {
    pub scale_min: f64,
    pub scale_max: f64,
    pub max_abs_rotation: f64,
}

impl Default for ValidityWindow {
    fn default() -> Self {
        Self {
            scale_min: 0.8,
            scale_max: 1.3,
            max_abs_rotation: 2.0,
        }
    }
}

impl ValidityWindow {
    pub fn check(&self, h: &Homography) -> Validity {
        let fail = |reason| Validity::Fail { reason };
        let m = h.matrix();
        if m[0][0] * m[1][1] - m[0][1] * m[1][0] < 0.0 {
            return fail(ValidityFailure::Reflection);
        }
        let Ok((scale, rotation)) = similarity_decompose(h) else {
            return fail(ValidityFailure::Singular);
        };
        if scale < self.scale_min {
            fail(ValidityFailure::ScaleBelow {
                scale,
                min: self.scale_min,
            })
        } else if scale > self.scale_max {
            fail(ValidityFailure::ScaleAbove {
                scale,
                max: self.scale_max,
            })
        } else if !(rotation.abs() < self.max_abs_rotation) {
            fail(ValidityFailure::Rotation {
                rotation,
                max: self.max_abs_rotation,
            })
        } else {
            Validity::Pass
        }
    }
}

/// Default window: scale in `[0.8, 1.3]`, `|rotation| < 2` rad.
pub fn validity_check(h: &Homography) -> Validity {
    ValidityWindow::default().check(h)
}
