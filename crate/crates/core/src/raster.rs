//! Floating-point image planes and boolean masks.
//!
//! Pixel `(x, y)` has its center at integer coordinates `(x, y)`; homographies,
//! keypoints and resampling all use this convention.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    ChannelCount(usize),
    #[error("data length {got} does not match {width}x{height}x{channels}")]
    DataLength {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("margin fraction {0} outside [0, 0.5)")]
    Margin(f64),
}

/// Row-major, channel-interleaved image with values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(RasterError::ChannelCount(channels));
        }
        if data.len() != width * height * channels {
            return Err(RasterError::DataLength {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel raster filled with `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be nonzero");
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Single-channel raster with `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be nonzero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// First-channel value at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels]
    }

    #[inline]
    pub fn get_channel(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = (y * self.width + x) * self.channels;
        self.data[i] = value;
    }

    /// Row `y` of a single-channel raster.
    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        debug_assert_eq!(self.channels, 1);
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Value at `(x, y)` with coordinates clamped to the image.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    /// Bilinear sample of the first channel at a subpixel position.
    ///
    /// Positions within half a pixel of the border are clamped onto it;
    /// anything further out yields `None`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let w = self.width as f64;
        let h = self.height as f64;
        if !(x >= -0.5 && y >= -0.5 && x <= w - 0.5 && y <= h - 0.5) {
            return None;
        }
        let x = x.clamp(0.0, w - 1.0);
        let y = y.clamp(0.0, h - 1.0);
        Some(self.bilinear_clamped(x, y))
    }

    /// Bilinear sample at a position already known to lie in `[0, w-1]x[0, h-1]`.
    #[inline]
    pub(crate) fn bilinear_clamped(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Applies `f` to every value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixelwise combination of two equally shaped rasters.
    pub fn zip_map(&self, other: &Raster, mut f: impl FnMut(f64, f64) -> f64) -> Raster {
        assert_eq!(
            (self.width, self.height, self.channels),
            (other.width, other.height, other.channels)
        );
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Clamps every value into `[0, 1]` and maps non-finite values to 0.
    pub fn clamp_unit(&self) -> Raster {
        self.map(|v| {
            if v.is_finite() {
                v.clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn flip_horizontal(&self) -> Raster {
        self.remap(self.width, self.height, |x, y| (self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Raster {
        self.remap(self.width, self.height, |x, y| (x, self.height - 1 - y))
    }

    /// Rotates by 90° counter-clockwise (as displayed with y pointing down):
    /// output `(x, y)` takes input `(w - 1 - y, x)`.
    pub fn rotate90(&self) -> Raster {
        let w = self.width;
        self.remap(self.height, self.width, |x, y| (w - 1 - y, x))
    }

    fn remap(
        &self,
        out_w: usize,
        out_h: usize,
        src: impl Fn(usize, usize) -> (usize, usize),
    ) -> Raster {
        let c = self.channels;
        let mut data = Vec::with_capacity(out_w * out_h * c);
        for y in 0..out_h {
            for x in 0..out_w {
                let (sx, sy) = src(x, y);
                let i = (sy * self.width + sx) * c;
                data.extend_from_slice(&self.data[i..i + c]);
            }
        }
        Raster {
            width: out_w,
            height: out_h,
            channels: c,
            data,
        }
    }
}

/// Boolean image plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if bits.len() != width * height {
            return Err(RasterError::DataLength {
                width,
                height,
                channels: 1,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be nonzero");
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be nonzero");
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    /// Value at the nearest pixel to a subpixel position; `false` off-image.
    pub fn get_nearest(&self, x: f64, y: f64) -> bool {
        let xi = x.round();
        let yi = y.round();
        if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
            return false;
        }
        self.get(xi as usize, yi as usize)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn flip_vertical(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        })
    }

    /// 0/1 raster view of the mask.
    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Rec.601 luma.
pub fn to_grayscale(r: &Raster) -> Raster {
    if r.channels == 1 {
        return r.clone();
    }
    let data = r
        .data
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .collect();
    Raster {
        width: r.width,
        height: r.height,
        channels: 1,
        data,
    }
}

/// Bilinear resize with half-pixel-centered sampling.
///
/// Destination pixel `d` reads source coordinate `(d + 0.5) * scale - 0.5`,
/// clamped to the border, with `scale = src / dst` per axis.
pub fn resize_bilinear(r: &Raster, w: usize, h: usize) -> Raster {
    assert!(w > 0 && h > 0, "target dimensions must be nonzero");
    if (w, h) == (r.width, r.height) {
        return r.clone();
    }
    let sx = r.width as f64 / w as f64;
    let sy = r.height as f64 / h as f64;
    let max_x = (r.width - 1) as f64;
    let max_y = (r.height - 1) as f64;

    // Per-column source taps are shared by every row.
    let cols: Vec<(usize, usize, f64)> = (0..w)
        .map(|dx| {
            let x = ((dx as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = x.floor() as usize;
            (x0, (x0 + 1).min(r.width - 1), x - x0 as f64)
        })
        .collect();

    let c = r.channels;
    let mut data = Vec::with_capacity(w * h * c);
    for dy in 0..h {
        let y = ((dy as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(r.height - 1);
        let fy = y - y0 as f64;
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let top = r.get_channel(x0, y0, ch) * (1.0 - fx) + r.get_channel(x1, y0, ch) * fx;
                let bottom =
                    r.get_channel(x0, y1, ch) * (1.0 - fx) + r.get_channel(x1, y1, ch) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Raster {
        width: w,
        height: h,
        channels: c,
        data,
    }
}

/// Validity mask of the centered ellipse inscribed in the image, shrunk by
/// `margin_frac` of each side. A pixel is inside when its center lies in the
/// closed ellipse or the pixel touches the ellipse center.
pub fn ellipse_mask(
    width: usize,
    height: usize,
    margin_frac: f64,
) -> Result<BinaryMask, RasterError> {
    if !(0.0..0.5).contains(&margin_frac) {
        return Err(RasterError::Margin(margin_frac));
    }
    let cx = width as f64 / 2.0;
    let cy = height as f64 / 2.0;
    let a = (0.5 - margin_frac) * width as f64;
    let b = (0.5 - margin_frac) * height as f64;
    Ok(BinaryMask::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5 - cx) / a;
        let v = (y as f64 + 0.5 - cy) / b;
        // Pixels touching the center stay inside however thin the ellipse.
        let central =
            (x as f64) <= cx && cx <= (x + 1) as f64 && (y as f64) <= cy && cy <= (y + 1) as f64;
        u * u + v * v <= 1.0 || central
    }))
}

/// Zeroes the periphery outside the inscribed ellipse and returns the
/// ellipse as the validity mask for all downstream processing.
pub fn peripheral_crop(r: &Raster, margin_frac: f64) -> Result<(Raster, BinaryMask), RasterError> {
    let mask = ellipse_mask(r.width, r.height, margin_frac)?;
    let mut out = r.clone();
    let c = r.channels;
    for (i, &inside) in mask.bits.iter().enumerate() {
        if !inside {
            out.data[i * c..(i + 1) * c].fill(0.0);
        }
    }
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_validates_shape() {
        assert!(Raster::new(2, 2, 1, vec![0.0; 4]).is_ok());
        assert_eq!(
            Raster::new(2, 2, 2, vec![0.0; 8]),
            Err(RasterError::ChannelCount(2))
        );
        assert!(matches!(
            Raster::new(2, 2, 3, vec![0.0; 4]),
            Err(RasterError::DataLength { .. })
        ));
        assert!(matches!(
            Raster::new(0, 2, 1, vec![]),
            Err(RasterError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn grayscale_weights() {
        let red = Raster::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((to_grayscale(&red).get(0, 0) - 0.299).abs() < 1e-15);
        let gray = Raster::new(1, 1, 3, vec![0.7, 0.7, 0.7]).unwrap();
        assert!((to_grayscale(&gray).get(0, 0) - 0.7).abs() < 1e-15);
        let mixed = Raster::new(1, 1, 3, vec![0.2, 0.4, 0.6]).unwrap();
        // 0.299*0.2 + 0.587*0.4 + 0.114*0.6
        assert!((to_grayscale(&mixed).get(0, 0) - 0.363).abs() < 1e-12);
        let single = Raster::filled(3, 2, 0.25);
        assert_eq!(to_grayscale(&single), single);
    }

    #[test]
    fn resize_same_size_is_identity() {
        let r = Raster::from_fn(7, 5, |x, y| (x * 3 + y) as f64 / 30.0);
        assert_eq!(resize_bilinear(&r, 7, 5), r);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let r = Raster::filled(13, 7, 0.37);
        let out = resize_bilinear(&r, 29, 4);
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn resize_upsample_two_to_four() {
        let r = Raster::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&r, 4, 1);
        let expected = [0.0, 0.25, 0.75, 1.0];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?}", out.data());
        }
    }

    #[test]
    fn ellipse_area_approaches_quarter_pi() {
        let (_, mask) = peripheral_crop(&Raster::filled(1024, 1024, 1.0), 0.0).unwrap();
        let frac = mask.count() as f64 / (1024.0 * 1024.0);
        let quarter_pi = core::f64::consts::PI / 4.0;
        assert!((frac - quarter_pi).abs() / quarter_pi < 0.005, "{frac}");
    }

    #[test]
    fn crop_center_in_corner_out() {
        for &(w, h) in &[(8usize, 8usize), (64, 48), (33, 97)] {
            for &m in &[0.0, 0.2, 0.45, 0.499] {
                let (img, mask) = peripheral_crop(&Raster::filled(w, h, 1.0), m).unwrap();
                assert!(mask.get(w / 2, h / 2), "{w}x{h} m={m}");
                assert!(!mask.get(0, 0) && !mask.get(w - 1, h - 1));
                assert_eq!(img.get(0, 0), 0.0);
                assert_eq!(img.get(w / 2, h / 2), 1.0);
            }
        }
    }

    #[test]
    fn crop_rejects_bad_margin() {
        let r = Raster::filled(4, 4, 1.0);
        assert!(peripheral_crop(&r, 0.5).is_err());
        assert!(peripheral_crop(&r, -0.1).is_err());
    }

    #[test]
    fn crop_zeroes_every_channel() {
        let r = Raster::new(8, 8, 3, vec![1.0; 192]).unwrap();
        let (out, mask) = peripheral_crop(&r, 0.1).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let expect = if mask.get(x, y) { 1.0 } else { 0.0 };
                for c in 0..3 {
                    assert_eq!(out.get_channel(x, y, c), expect);
                }
            }
        }
    }

    #[test]
    fn bilinear_sample_bounds() {
        let r = Raster::from_fn(4, 3, |x, y| (x + 10 * y) as f64);
        assert_eq!(r.sample_bilinear(1.5, 1.0), Some(11.5));
        assert_eq!(r.sample_bilinear(-0.4, 0.0), Some(0.0));
        assert_eq!(r.sample_bilinear(-0.6, 0.0), None);
        assert_eq!(r.sample_bilinear(3.5, 2.5), Some(23.0));
        assert_eq!(r.sample_bilinear(3.51, 2.0), None);
        assert_eq!(r.sample_bilinear(f64::NAN, 0.0), None);
    }

    #[test]
    fn rotate90_four_times_is_identity() {
        let r = Raster::from_fn(5, 3, |x, y| (x * 7 + y) as f64);
        let rot = r.rotate90();
        assert_eq!(rot.dims(), (3, 5));
        assert_eq!(rot.rotate90().rotate90().rotate90(), r);
    }

    fn arb_raster() -> impl Strategy<Value = Raster> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..=1.0, w * h * 3)
                .prop_map(move |d| Raster::new(w, h, 3, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn resize_never_overshoots(r in arb_raster(), w in 1usize..20, h in 1usize..20) {
            let g = to_grayscale(&r);
            let (lo, hi) = g.min_max();
            let out = resize_bilinear(&g, w, h);
            for &v in out.data() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn grayscale_commutes_with_resize(r in arb_raster(), w in 1usize..20, h in 1usize..20) {
            let a = to_grayscale(&resize_bilinear(&r, w, h));
            let b = resize_bilinear(&to_grayscale(&r), w, h);
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn crop_mask_symmetric_under_flips(w in 1usize..80, h in 1usize..80, m in 0.0f64..0.49) {
            let mask = ellipse_mask(w, h, m).unwrap();
            prop_assert_eq!(&mask.flip_horizontal(), &mask);
            prop_assert_eq!(&mask.flip_vertical(), &mask);
        }
    }
}
