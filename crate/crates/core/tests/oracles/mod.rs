//! Direct double-loop reference implementations of the windowed metrics.
//! Deliberately naive: two-pass moments, explicit 2-D weights, no sharing.

#![allow(dead_code)]

use uwfkit_core::Raster;

const K1: f64 = 0.01;
const K2: f64 = 0.03;

pub struct Plane {
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Plane {
    pub fn of(r: &Raster) -> Plane {
        Plane {
            w: r.width(),
            h: r.height(),
            v: r.data().to_vec(),
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.v[y * self.w + x]
    }

    fn down(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let s = self.at(2 * x, 2 * y)
                    + self.at(2 * x + 1, 2 * y)
                    + self.at(2 * x, 2 * y + 1)
                    + self.at(2 * x + 1, 2 * y + 1);
                v.push(s / 4.0);
            }
        }
        Plane { w, h, v }
    }
}

fn weights() -> [[f64; 11]; 11] {
    let mut w = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (dy, row) in w.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let r2 = ((dx as f64 - 5.0).powi(2) + (dy as f64 - 5.0).powi(2)) as f64;
            *v = (-r2 / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    for row in w.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    w
}

/// Mean luminance and contrast-structure terms over all full windows,
/// plus the mean of their per-window product.
fn window_terms(a: &Plane, b: &Plane) -> (f64, f64) {
    let w = weights();
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mut cs_sum = 0.0;
    let mut ssim_sum = 0.0;
    let mut n = 0.0;
    for y0 in 0..=a.h - 11 {
        for x0 in 0..=a.w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    ma += w[dy][dx] * a.at(x0 + dx, y0 + dy);
                    mb += w[dy][dx] * b.at(x0 + dx, y0 + dy);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let da = a.at(x0 + dx, y0 + dy) - ma;
                    let db = b.at(x0 + dx, y0 + dy) - mb;
                    va += w[dy][dx] * da * da;
                    vb += w[dy][dx] * db * db;
                    cov += w[dy][dx] * da * db;
                }
            }
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            cs_sum += cs;
            ssim_sum += l * cs;
            n += 1.0;
        }
    }
    (cs_sum / n, ssim_sum / n)
}

pub fn ssim(a: &Raster, b: &Raster) -> f64 {
    window_terms(&Plane::of(a), &Plane::of(b)).1
}

pub fn ms_ssim(a: &Raster, b: &Raster) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let mut pa = Plane::of(a);
    let mut pb = Plane::of(b);
    let mut out = 1.0;
    for (i, wt) in weights.iter().enumerate() {
        let (cs, full) = window_terms(&pa, &pb);
        let term: f64 = if i == 4 { full } else { cs };
        out *= term.max(0.0).powf(*wt);
        pa = pa.down();
        pb = pb.down();
    }
    out
}

fn sobel(p: &Plane) -> (Plane, Plane) {
    let get = |x: isize, y: isize| {
        let xc = x.clamp(0, p.w as isize - 1) as usize;
        let yc = y.clamp(0, p.h as isize - 1) as usize;
        p.at(xc, yc)
    };
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut gx = Vec::new();
    let mut gy = Vec::new();
    for y in 0..p.h as isize {
        for x in 0..p.w as isize {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = get(x + i as isize - 1, y + j as isize - 1);
                    sx += kx[j][i] * v;
                    sy += kx[i][j] * v;
                }
            }
            gx.push(sx);
            gy.push(sy);
        }
    }
    (
        Plane {
            w: p.w,
            h: p.h,
            v: gx,
        },
        Plane {
            w: p.w,
            h: p.h,
            v: gy,
        },
    )
}

fn tile_var(g: &Plane, tx: usize, ty: usize, patch: usize) -> f64 {
    let mut vals = Vec::new();
    for y in ty * patch..(ty + 1) * patch {
        for x in tx * patch..(tx + 1) * patch {
            vals.push(g.at(x, y));
        }
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
}

pub fn gradient_variance(a: &Raster, b: &Raster, patch: usize) -> f64 {
    let (ax, ay) = sobel(&Plane::of(a));
    let (bx, by) = sobel(&Plane::of(b));
    let (nx, ny) = (a.width() / patch, a.height() / patch);
    let mut dir_means = Vec::new();
    for (ga, gb) in [(&ax, &bx), (&ay, &by)] {
        let mut s = 0.0;
        for ty in 0..ny {
            for tx in 0..nx {
                let d = tile_var(ga, tx, ty, patch) - tile_var(gb, tx, ty, patch);
                s += d * d;
            }
        }
        dir_means.push(s / (nx * ny) as f64);
    }
    (dir_means[0] + dir_means[1]) / 2.0
}
