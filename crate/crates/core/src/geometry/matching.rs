use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::features::{Descriptor, DescriptorSet};

/// One correspondence: index into the moving set, index into the fixed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub moving: usize,
    pub fixed: usize,
    pub distance: u32,
}

pub type MatchSet = Vec<Match>;

/// Nearest and second-nearest distances and the nearest index (lowest index
/// wins ties).
fn two_nearest(q: &Descriptor, pool: &[Descriptor]) -> Option<(usize, u32, u32)> {
    let mut best: Option<(usize, u32)> = None;
    let mut second = u32::MAX;
    for (j, d) in pool.iter().enumerate() {
        let dist = q.hamming(d);
        match best {
            None => best = Some((j, dist)),
            Some((_, b)) if dist < b => {
                second = b;
                best = Some((j, dist));
            }
            Some(_) => second = second.min(dist),
        }
    }
    best.map(|(j, d)| (j, d, second))
}

/// Ratio-test matches from `moving` (`a`) to `fixed` (`b`) that are also
/// mutual nearest neighbors. A lone candidate in `b` passes the ratio test.
pub fn match_descriptors(a: &DescriptorSet, b: &DescriptorSet, ratio: f64) -> MatchSet {
    let back: Vec<Option<usize>> = b
        .descriptors
        .iter()
        .map(|d| two_nearest(d, &a.descriptors).map(|(j, _, _)| j))
        .collect();
    let mut out = Vec::new();
    for (i, q) in a.descriptors.iter().enumerate() {
        let Some((j, d1, d2)) = two_nearest(q, &b.descriptors) else {
            continue;
        };
        let passes = d2 == u32::MAX || (d1 as f64) < ratio * d2 as f64;
        if passes && back[j] == Some(i) {
            out.push(Match {
                moving: i,
                fixed: j,
                distance: d1,
            });
        }
    }
    out
}
