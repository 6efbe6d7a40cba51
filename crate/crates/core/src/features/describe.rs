use alloc::vec::Vec;
use num_traits::Float;

use super::{to_level, Keypoint, ScaleSpace};

/// Bits per descriptor: `3 * (C(4,2) + C(9,2) + C(16,2))`.
pub const DESCRIPTOR_BITS: usize = 486;

const WORDS: usize = 8;
/// Samples per patch side; divisible by every grid size.
const PATCH_SAMPLES: usize = 24;
/// Patch side in units of the keypoint scale.
const PATCH_SIGMAS: f64 = 20.0;
const GRIDS: [usize; 3] = [2, 3, 4];

/// A 486-bit binary descriptor packed little-endian into 64-bit words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; WORDS]);

impl Descriptor {
    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, value: bool) {
        debug_assert!(i < DESCRIPTOR_BITS);
        if value {
            self.0[i / 64] |= 1 << (i % 64);
        } else {
            self.0[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    /// Mask of the bits that carry descriptor content.
    pub fn used_mask() -> Descriptor {
        let mut d = Descriptor::default();
        for i in 0..DESCRIPTOR_BITS {
            d.set_bit(i, true);
        }
        d
    }
}

/// Keypoints that survived description, index-aligned with their descriptors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DescriptorSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

/// M-LDB descriptors for keypoints detected on `ss`.
///
/// Keypoints whose rotated patch would leave their level are dropped; the
/// returned set keeps keypoints and descriptors aligned.
pub fn describe_keypoints(ss: &ScaleSpace, kps: &[Keypoint]) -> DescriptorSet {
    let mut out = DescriptorSet::default();
    for kp in kps {
        if let Ok(d) = describe_one(ss, kp) {
            out.keypoints.push(*kp);
            out.descriptors.push(d);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PatchOutOfBounds;

fn describe_one(ss: &ScaleSpace, kp: &Keypoint) -> Result<Descriptor, PatchOutOfBounds> {
    let level = ss.levels.get(kp.level).ok_or(PatchOutOfBounds)?;
    let img = &level.image;
    let sigma = level.pixel_sigma();
    let cx = to_level(kp.x, level.octave);
    let cy = to_level(kp.y, level.octave);
    let half = 0.5 * PATCH_SIGMAS * sigma;
    let reach = half * core::f64::consts::SQRT_2;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if cx - reach < 0.0 || cy - reach < 0.0 || cx + reach > w - 1.0 || cy + reach > h - 1.0 {
        return Err(PatchOutOfBounds);
    }

    let (sin, cos) = kp.orientation.sin_cos();
    let step = PATCH_SIGMAS * sigma / PATCH_SAMPLES as f64;
    let n = PATCH_SAMPLES;
    let mut patch = [[0.0f64; PATCH_SAMPLES]; PATCH_SAMPLES];
    for (v, row) in patch.iter_mut().enumerate() {
        let ly = (v as f64 + 0.5) * step - half;
        for (u, slot) in row.iter_mut().enumerate() {
            let lx = (u as f64 + 0.5) * step - half;
            let x = (cx + lx * cos - ly * sin).clamp(0.0, w - 1.0);
            let y = (cy + lx * sin + ly * cos).clamp(0.0, h - 1.0);
            *slot = img.bilinear_clamped(x, y);
        }
    }

    // Derivatives in the rotated patch frame (one-sided at the patch edge).
    let mut dx = [[0.0f64; PATCH_SAMPLES]; PATCH_SAMPLES];
    let mut dy = [[0.0f64; PATCH_SAMPLES]; PATCH_SAMPLES];
    for v in 0..n {
        for u in 0..n {
            let (u0, u1) = (u.saturating_sub(1), (u + 1).min(n - 1));
            let (v0, v1) = (v.saturating_sub(1), (v + 1).min(n - 1));
            dx[v][u] = (patch[v][u1] - patch[v][u0]) / (u1 - u0) as f64;
            dy[v][u] = (patch[v1][u] - patch[v0][u]) / (v1 - v0) as f64;
        }
    }

    let mut desc = Descriptor::default();
    let mut bit = 0usize;
    for &grid in &GRIDS {
        let cell = n / grid;
        let cells: Vec<[f64; 3]> = (0..grid * grid)
            .map(|c| {
                let (gx, gy) = (c % grid, c / grid);
                let mut acc = [0.0f64; 3];
                for v in gy * cell..(gy + 1) * cell {
                    for u in gx * cell..(gx + 1) * cell {
                        acc[0] += patch[v][u];
                        acc[1] += dx[v][u];
                        acc[2] += dy[v][u];
                    }
                }
                let count = (cell * cell) as f64;
                [acc[0] / count, acc[1] / count, acc[2] / count]
            })
            .collect();
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                for ch in 0..3 {
                    desc.set_bit(bit, cells[i][ch] > cells[j][ch]);
                    bit += 1;
                }
            }
        }
    }
    debug_assert_eq!(bit, DESCRIPTOR_BITS);
    Ok(desc)
}
