//! Decoded RGB images and the per-view preprocessing chain.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Side length used by every published backbone this pipeline targets.
pub const DEFAULT_INPUT_SIZE: u32 = 224;

/// Center-crop ratio applied per dimension for the local view.
pub const LOCAL_CROP_RATIO: f64 = 0.62;

pub const IMAGENET_MEANS: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STDS: [f64; 3] = [0.229, 0.224, 0.225];

/// Row-major interleaved 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RawImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be at least 1".into()));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::shape(expected, data.len()));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

impl fmt::Debug for RawImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RawImage").field("width", &self.width).field("height", &self.height).finish_non_exhaustive()
    }
}

/// Fraction of each side kept by a center crop, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec(f64);

impl CropSpec {
    pub fn new(ratio: f64) -> Result<Self> {
        if ratio > 0.0 && ratio <= 1.0 {
            Ok(Self(ratio))
        } else {
            Err(Error::InvalidParameter(alloc::format!("crop ratio {ratio} outside (0, 1]")))
        }
    }

    pub fn ratio(self) -> f64 {
        self.0
    }
}

impl Default for CropSpec {
    fn default() -> Self {
        Self(LOCAL_CROP_RATIO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    input_size: u32,
    channel_means: [f64; 3],
    channel_stds: [f64; 3],
    crop: CropSpec,
}

impl PreprocessConfig {
    pub fn new(input_size: u32, channel_means: [f64; 3], channel_stds: [f64; 3], crop: CropSpec) -> Result<Self> {
        if input_size < 8 {
            return Err(Error::InvalidParameter(alloc::format!("input size {input_size} below 8")));
        }
        if channel_stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter("channel stds must be positive and finite".into()));
        }
        if channel_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("channel means must be finite".into()));
        }
        Ok(Self { input_size, channel_means, channel_stds, crop })
    }

    pub fn input_size(&self) -> u32 {
        self.input_size
    }

    pub fn channel_means(&self) -> [f64; 3] {
        self.channel_means
    }

    pub fn channel_stds(&self) -> [f64; 3] {
        self.channel_stds
    }

    pub fn crop(&self) -> CropSpec {
        self.crop
    }

    pub fn with_crop(mut self, crop: CropSpec) -> Self {
        self.crop = crop;
        self
    }
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            input_size: DEFAULT_INPUT_SIZE,
            channel_means: IMAGENET_MEANS,
            channel_stds: IMAGENET_STDS,
            crop: CropSpec::default(),
        }
    }
}

/// Normalized network input, laid out channels × height × width.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedTensor {
    side: usize,
    values: Vec<f32>,
}

impl PreprocessedTensor {
    pub fn new(side: usize, values: Vec<f32>) -> Result<Self> {
        let expected = 3 * side * side;
        if values.len() != expected {
            return Err(Error::shape(expected, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("tensor"));
        }
        Ok(Self { side, values })
    }

    pub fn zeros(side: usize) -> Self {
        Self { side, values: vec![0.0; 3 * side * side] }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.values[(c * self.side + y) * self.side + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewKind {
    Global,
    Local,
    Scene,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [ViewKind::Global, ViewKind::Local, ViewKind::Scene];

    pub fn letter(self) -> char {
        match self {
            ViewKind::Global => 'G',
            ViewKind::Local => 'L',
            ViewKind::Scene => 'S',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'G' => Some(ViewKind::Global),
            'L' => Some(ViewKind::Local),
            'S' => Some(ViewKind::Scene),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Global => "global",
            ViewKind::Local => "local",
            ViewKind::Scene => "scene",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "global" => Some(ViewKind::Global),
            "local" => Some(ViewKind::Local),
            "scene" => Some(ViewKind::Scene),
            _ => None,
        }
    }

    /// Position in the canonical G, L, S order.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output side length of a center crop along one axis.
pub fn crop_extent(side: u32, crop: CropSpec) -> u32 {
    let kept = libm::floor(crop.ratio() * side as f64) as u32;
    kept.clamp(1, side)
}

/// Keeps the centered `ratio` fraction of each side. Offsets round down.
pub fn center_crop(img: &RawImage, crop: CropSpec) -> RawImage {
    let cw = crop_extent(img.width, crop);
    let ch = crop_extent(img.height, crop);
    let x0 = (img.width - cw) / 2;
    let y0 = (img.height - ch) / 2;

    let row_bytes = cw as usize * 3;
    let mut data = Vec::with_capacity(row_bytes * ch as usize);
    for y in y0..y0 + ch {
        let start = (y as usize * img.width as usize + x0 as usize) * 3;
        data.extend_from_slice(&img.data[start..start + row_bytes]);
    }
    RawImage { width: cw, height: ch, data }
}

/// Source sample positions for one output axis: (lower index, upper index, weight of upper).
fn axis_taps(in_len: u32, out_len: u32) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = libm::floor(src);
            let hi = (lo as usize + 1).min(in_len as usize - 1);
            (lo as usize, hi, src - lo)
        })
        .collect()
}

/// Bilinear resampling with half-pixel centers; samples outside the image clamp to the edge.
/// No antialiasing filter is applied when shrinking.
pub fn resize_bilinear(img: &RawImage, out_w: u32, out_h: u32) -> RawImage {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be at least 1");
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let xs = axis_taps(img.width, out_w);
    let ys = axis_taps(img.height, out_h);
    let w = img.width as usize;
    let src = &img.data;

    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p = |y: usize, x: usize| src[(y * w + x) * 3 + c] as f64;
                let top = p(y0, x0) + (p(y0, x1) - p(y0, x0)) * fx;
                let bottom = p(y1, x0) + (p(y1, x1) - p(y1, x0)) * fx;
                let v = top + (bottom - top) * fy;
                data.push(libm::floor(v + 0.5).clamp(0.0, 255.0) as u8);
            }
        }
    }
    RawImage { width: out_w, height: out_h, data }
}

/// `(pixel / 255 - mean[c]) / std[c]`, channel-major.
pub fn to_tensor(img: &RawImage, cfg: &PreprocessConfig) -> Result<PreprocessedTensor> {
    let side = cfg.input_size as usize;
    if img.width != cfg.input_size {
        return Err(Error::shape(side, img.width as usize));
    }
    if img.height != cfg.input_size {
        return Err(Error::shape(side, img.height as usize));
    }
    let plane = side * side;
    let mut values = vec![0f32; 3 * plane];
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            let v = (px[c] as f64 / 255.0 - cfg.channel_means[c]) / cfg.channel_stds[c];
            values[c * plane + i] = v as f32;
        }
    }
    Ok(PreprocessedTensor { side, values })
}

/// Global and Scene see the whole image squashed to the input size; Local sees the center crop.
pub fn prepare_view(img: &RawImage, view: ViewKind, cfg: &PreprocessConfig) -> Result<PreprocessedTensor> {
    let side = cfg.input_size;
    let resized = match view {
        ViewKind::Global | ViewKind::Scene => resize_bilinear(img, side, side),
        ViewKind::Local => resize_bilinear(&center_crop(img, cfg.crop), side, side),
    };
    to_tensor(&resized, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RawImage {
        RawImage::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) % 256) as u8]).unwrap()
    }

    #[test]
    fn raw_image_rejects_bad_lengths() {
        assert!(matches!(RawImage::new(2, 2, vec![0; 11]), Err(Error::Shape { expected: 12, actual: 11 })));
        assert!(RawImage::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn crop_spec_bounds() {
        assert!(CropSpec::new(0.0).is_err());
        assert!(CropSpec::new(1.0000001).is_err());
        assert!(CropSpec::new(f64::NAN).is_err());
        assert!(CropSpec::new(1.0).is_ok());
    }

    #[test]
    fn crop_default_ratio_on_1000x800() {
        let img = gradient(1000, 800);
        let out = center_crop(&img, CropSpec::new(0.62).unwrap());
        assert_eq!((out.width(), out.height()), (620, 496));
        assert_eq!(out.pixel(0, 0), img.pixel(190, 152));
        assert_eq!(out.pixel(619, 495), img.pixel(809, 647));
    }

    #[test]
    fn crop_small_odd_image() {
        // floor(0.62 * 5) = 3, offset floor((5 - 3) / 2) = 1
        let img = gradient(5, 5);
        let out = center_crop(&img, CropSpec::new(0.62).unwrap());
        assert_eq!((out.width(), out.height()), (3, 3));
        assert_eq!(out.pixel(0, 0), img.pixel(1, 1));
        assert_eq!(out.pixel(2, 2), img.pixel(3, 3));
    }

    #[test]
    fn crop_ratio_one_is_identity() {
        let img = gradient(17, 9);
        assert_eq!(center_crop(&img, CropSpec::new(1.0).unwrap()), img);
    }

    #[test]
    fn crop_clamps_to_one_pixel() {
        let img = gradient(1, 3);
        let out = center_crop(&img, CropSpec::new(0.1).unwrap());
        assert_eq!((out.width(), out.height()), (1, 1));
        assert_eq!(out.pixel(0, 0), img.pixel(0, 1));
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = gradient(6, 4);
        assert_eq!(resize_bilinear(&img, 6, 4), img);

        let flat = RawImage::from_fn(2, 2, |_, _| [9, 130, 251]).unwrap();
        let up = resize_bilinear(&flat, 4, 4);
        assert!(up.data().chunks(3).all(|p| p == [9, 130, 251]));
    }

    #[test]
    fn resize_4x4_to_2x2_hand_evaluated() {
        // Half-pixel mapping at scale 2 puts every sample at the center of a
        // 2x2 block: src = 2*o + 0.5, so each output is the rounded block mean.
        let vals: [[u8; 4]; 4] = [[0, 10, 20, 30], [40, 50, 60, 70], [80, 90, 100, 110], [120, 131, 140, 150]];
        let img = RawImage::from_fn(4, 4, |x, y| {
            let v = vals[y as usize][x as usize];
            [v, 255 - v, v / 2]
        })
        .unwrap();
        let out = resize_bilinear(&img, 2, 2);
        // (0+10+40+50)/4 = 25; (20+30+60+70)/4 = 45; (80+90+120+131)/4 = 105.25 -> 105; (100+110+140+150)/4 = 125
        assert_eq!(out.pixel(0, 0)[0], 25);
        assert_eq!(out.pixel(1, 0)[0], 45);
        assert_eq!(out.pixel(0, 1)[0], 105);
        assert_eq!(out.pixel(1, 1)[0], 125);
        // second channel is 255 - v: 230, 210, 149.75 -> 150, 130
        assert_eq!(out.pixel(0, 1)[1], 150);
        // third channel v/2 with integer division: 0,5,20,25 -> 12.5 -> 13
        assert_eq!(out.pixel(0, 0)[2], 13);
    }

    #[test]
    fn tensor_scale_and_centering_identities() {
        let unit = PreprocessConfig::new(8, [0.0; 3], [1.0; 3], CropSpec::default()).unwrap();
        let white = RawImage::from_fn(8, 8, |_, _| [255; 3]).unwrap();
        let t = to_tensor(&white, &unit).unwrap();
        assert!(t.values().iter().all(|&v| v == 1.0));

        let half = PreprocessConfig::new(8, [0.2, 0.4, 0.6], [0.5; 3], CropSpec::default()).unwrap();
        let img = RawImage::from_fn(8, 8, |_, _| [51, 102, 153]).unwrap();
        let t = to_tensor(&img, &half).unwrap();
        assert!(t.values().iter().all(|&v| v.abs() < 1e-7), "{:?}", &t.values()[..3]);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn tensor_imagenet_constants() {
        // (1 - 0.485) / 0.229, (0 - 0.456) / 0.224, (128/255 - 0.406) / 0.225
        let cfg = PreprocessConfig::new(8, IMAGENET_MEANS, IMAGENET_STDS, CropSpec::default()).unwrap();
        let img = RawImage::from_fn(8, 8, |_, _| [255, 0, 128]).unwrap();
        let t = to_tensor(&img, &cfg).unwrap();
        let expect = [2.2489082969432315f32, -2.0357142857142856, 0.42649237472766875];
        for (c, want) in expect.iter().enumerate() {
            assert!((t.get(c, 3, 5) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn tensor_shape_error() {
        let cfg = PreprocessConfig::new(8, IMAGENET_MEANS, IMAGENET_STDS, CropSpec::default()).unwrap();
        let img = gradient(9, 8);
        assert!(matches!(to_tensor(&img, &cfg), Err(Error::Shape { .. })));
    }

    #[test]
    fn local_view_is_crop_then_resize() {
        let cfg = PreprocessConfig::new(31, IMAGENET_MEANS, IMAGENET_STDS, CropSpec::default()).unwrap();
        // 31 / 0.62 = 50
        let img = gradient(50, 50);
        let local = prepare_view(&img, ViewKind::Local, &cfg).unwrap();
        let manual = to_tensor(&resize_bilinear(&center_crop(&img, cfg.crop()), 31, 31), &cfg).unwrap();
        assert_eq!(local, manual);
        assert_eq!(local.side(), 31);
    }

    #[test]
    fn local_and_global_differ_on_framed_image() {
        let cfg = PreprocessConfig::new(8, IMAGENET_MEANS, IMAGENET_STDS, CropSpec::default()).unwrap();
        let img = RawImage::from_fn(40, 40, |x, y| {
            let border = !(8..32).contains(&x) || !(8..32).contains(&y);
            if border {
                [250, 10, 10]
            } else {
                [10, 10, 250]
            }
        })
        .unwrap();
        let g = prepare_view(&img, ViewKind::Global, &cfg).unwrap();
        let l = prepare_view(&img, ViewKind::Local, &cfg).unwrap();
        assert_ne!(g, l);
        assert_eq!(g, prepare_view(&img, ViewKind::Scene, &cfg).unwrap());
    }

    #[test]
    fn preprocess_config_validation() {
        assert!(PreprocessConfig::new(7, IMAGENET_MEANS, IMAGENET_STDS, CropSpec::default()).is_err());
        assert!(PreprocessConfig::new(8, IMAGENET_MEANS, [0.2, 0.0, 0.2], CropSpec::default()).is_err());
    }
}
