//! Pixel-level preprocessing: grayscale conversion, geometric normalization
//! from iris boxes, fixed-size cropping, patch tiling and bilinear resize.
//!
//! Images are immutable row-major rasters with intensities in `[0, 1]`. All
//! operations are pure; geometry is done in `f64`, pixels are stored as `f32`.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image has zero area ({width}x{height})")]
    ZeroArea { width: usize, height: usize },
    #[error("pixel buffer holds {len} values, expected {width}x{height} = {expected}")]
    PixelCountMismatch {
        len: usize,
        width: usize,
        height: usize,
        expected: usize,
    },
    #[error("pixel {index} is {value}, outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f32 },
    #[error("{width}x{height} image cannot be tiled into {rows}x{cols} equal patches")]
    NotDivisible {
        width: usize,
        height: usize,
        rows: usize,
        cols: usize,
    },
    #[error("iris box ({x}, {y}, {w}, {h}) extends outside the {img_w}x{img_h} image")]
    IrisBoxOutOfBounds {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        img_w: usize,
        img_h: usize,
    },
    #[error("iris centers coincide; rotation and scale are undefined")]
    CoincidentIrisCenters,
    #[error("target size {0}x{1} is empty")]
    EmptyTarget(usize, usize),
    #[error("failed to read image {path}: {source}")]
    Decode {
        path: String,
        source: image::ImageError,
    },
}

/// How a color raster is collapsed to a single intensity channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntensityMethod {
    /// HSI/HSV-style intensity: `max(R, G, B)`.
    #[default]
    MaxChannel,
    /// BT.601 luma: `0.299 R + 0.587 G + 0.114 B`.
    Luma,
}

/// Single-channel raster with row-major `f32` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

/// `a + t (b - a)`; exact when `a == b`, which keeps comparison-based codes
/// (LBP and friends) stable on locally constant regions.
#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + t * (b - a)
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroArea { width, height });
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(ImagingError::PixelCountMismatch {
                len: pixels.len(),
                width,
                height,
                expected,
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(ImagingError::PixelOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from any generator over `(x, y)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroArea { width, height });
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    /// Collapses an 8-bit RGB raster to intensities in `[0, 1]`.
    pub fn from_rgb(rgb: &image::RgbImage, method: IntensityMethod) -> Result<Self, ImagingError> {
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if w == 0 || h == 0 {
            return Err(ImagingError::ZeroArea {
                width: w,
                height: h,
            });
        }
        let pixels = rgb
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                match method {
                    IntensityMethod::MaxChannel => r.max(g).max(b) as f32 / 255.0,
                    IntensityMethod::Luma => {
                        (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
                    }
                }
            })
            .collect();
        Self::new(w, h, pixels)
    }

    /// Reads a PNG or JPEG raster from disk and converts it to intensities.
    pub fn load(path: &Path, method: IntensityMethod) -> Result<Self, ImagingError> {
        let img = image::open(path).map_err(|source| ImagingError::Decode {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_rgb(&img.to_rgb8(), method)
    }

    /// Writes the raster as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), ImagingError> {
        let buf = image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize);
            image::Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8])
        });
        buf.save(path).map_err(|source| ImagingError::Decode {
            path: path.display().to_string(),
            source,
        })
    }

    /// Bilinear sample with coordinates clamped to the image border.
    pub fn sample_clamped(&self, x: f64, y: f64) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = lerp(self.get(x0, y0), self.get(x1, y0), fx);
        let bot = lerp(self.get(x0, y1), self.get(x1, y1), fx);
        lerp(top, bot, fy)
    }

    /// Bilinear sample where out-of-bounds reads contribute zero. The second
    /// return value is false when any of the four taps fell outside.
    pub fn sample_zero_padded(&self, x: f64, y: f64) -> (f32, bool) {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let mut inside = true;
        let mut tap = |xi: f64, yi: f64| -> f32 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                inside = false;
                0.0
            } else {
                self.get(xi as usize, yi as usize)
            }
        };
        let p00 = tap(x0, y0);
        let p01 = tap(x0 + 1.0, y0);
        let p10 = tap(x0, y0 + 1.0);
        let p11 = tap(x0 + 1.0, y0 + 1.0);
        let top = lerp(p00, p01, fx);
        let bot = lerp(p10, p11, fx);
        (lerp(top, bot, fy), inside)
    }

    /// Bilinear resize to exactly `w`x`h`. Sample points sit at output pixel
    /// centers mapped into the source grid, so a same-size resize reproduces
    /// the input bit for bit; border taps clamp to the nearest source pixel.
    pub fn resize(&self, w: usize, h: usize) -> Result<GrayImage, ImagingError> {
        if w == 0 || h == 0 {
            return Err(ImagingError::EmptyTarget(w, h));
        }
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            for x in 0..w {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                pixels.push(self.sample_clamped(src_x, src_y));
            }
        }
        GrayImage::new(w, h, pixels)
    }
}

/// Non-overlapping tiling of an image, row-major patch order.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    patches: Vec<GrayImage>,
    rows: usize,
    cols: usize,
}

impl PatchGrid {
    pub fn patches(&self) -> &[GrayImage] {
        &self.patches
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Stitches the patches back into the original raster.
    pub fn reassemble(&self) -> GrayImage {
        let pw = self.patches[0].width();
        let ph = self.patches[0].height();
        let width = pw * self.cols;
        let height = ph * self.rows;
        let mut pixels = vec![0.0f32; width * height];
        for (i, patch) in self.patches.iter().enumerate() {
            let r = i / self.cols;
            let c = i % self.cols;
            for y in 0..ph {
                let dst = (r * ph + y) * width + c * pw;
                pixels[dst..dst + pw]
                    .copy_from_slice(&patch.pixels()[y * pw..(y + 1) * pw]);
            }
        }
        GrayImage::new(width, height, pixels).expect("reassembled raster is valid")
    }
}

/// Splits `img` into `rows`x`cols` equal non-overlapping patches.
pub fn tile_patches(img: &GrayImage, rows: usize, cols: usize) -> Result<PatchGrid, ImagingError> {
    if rows == 0
        || cols == 0
        || img.width() % cols != 0
        || img.height() % rows != 0
    {
        return Err(ImagingError::NotDivisible {
            width: img.width(),
            height: img.height(),
            rows,
            cols,
        });
    }
    let pw = img.width() / cols;
    let ph = img.height() / rows;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut pixels = Vec::with_capacity(pw * ph);
            for y in 0..ph {
                let src = (r * ph + y) * img.width() + c * pw;
                pixels.extend_from_slice(&img.pixels()[src..src + pw]);
            }
            patches.push(GrayImage::new(pw, ph, pixels)?);
        }
    }
    Ok(PatchGrid {
        patches,
        rows,
        cols,
    })
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    fn inside(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.w >= 0.0
            && self.h >= 0.0
            && self.x + self.w <= width as f64
            && self.y + self.h <= height as f64
    }
}

/// One periocular crop plus a flag recording whether any sample fell outside
/// the source raster (zero-padded).
#[derive(Debug, Clone)]
pub struct EyeCrop {
    pub image: GrayImage,
    pub padded: bool,
}

/// Fraction of the output side length the inter-iris distance is mapped to.
/// Keeps brows and part of the nose bridge in a 256x256 frame.
pub const IRIS_SPAN_FRACTION: f64 = 0.4;

/// Similarity transform used by [`align_and_crop`]: rotation that levels the
/// iris line, isotropic scale, origin at the iris midpoint.
#[derive(Debug, Clone, Copy)]
pub struct EyeAlignment {
    cos: f64,
    sin: f64,
    scale: f64,
    mid: (f64, f64),
}

impl EyeAlignment {
    pub fn from_iris_centers(
        left: (f64, f64),
        right: (f64, f64),
        out_size: usize,
    ) -> Result<Self, ImagingError> {
        let dx = right.0 - left.0;
        let dy = right.1 - left.1;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist == 0.0 {
            return Err(ImagingError::CoincidentIrisCenters);
        }
        let theta = dy.atan2(dx);
        Ok(Self {
            cos: theta.cos(),
            sin: theta.sin(),
            scale: IRIS_SPAN_FRACTION * out_size as f64 / dist,
            mid: ((left.0 + right.0) / 2.0, (left.1 + right.1) / 2.0),
        })
    }

    /// Source point -> aligned space (iris line horizontal, midpoint at origin).
    pub fn forward(&self, p: (f64, f64)) -> (f64, f64) {
        let dx = p.0 - self.mid.0;
        let dy = p.1 - self.mid.1;
        (
            self.scale * (self.cos * dx + self.sin * dy),
            self.scale * (-self.sin * dx + self.cos * dy),
        )
    }

    /// Aligned space -> source point.
    pub fn inverse(&self, q: (f64, f64)) -> (f64, f64) {
        let dx = q.0 / self.scale;
        let dy = q.1 / self.scale;
        (
            self.cos * dx - self.sin * dy + self.mid.0,
            self.sin * dx + self.cos * dy + self.mid.1,
        )
    }
}

/// Rotates and scales so the iris line is horizontal with a fixed inter-iris
/// span, then crops one `out_size` square per eye, each centered on its iris.
/// Crops that extend past the source raster are zero-padded and flagged.
pub fn align_and_crop(
    img: &GrayImage,
    left_iris: Rect,
    right_iris: Rect,
    out_size: usize,
) -> Result<(EyeCrop, EyeCrop), ImagingError> {
    if out_size == 0 {
        return Err(ImagingError::EmptyTarget(out_size, out_size));
    }
    for b in [left_iris, right_iris] {
        if !b.inside(img.width(), img.height()) {
            return Err(ImagingError::IrisBoxOutOfBounds {
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
                img_w: img.width(),
                img_h: img.height(),
            });
        }
    }
    let align =
        EyeAlignment::from_iris_centers(left_iris.center(), right_iris.center(), out_size)?;

    let crop = |center_src: (f64, f64)| -> Result<EyeCrop, ImagingError> {
        let center_aligned = align.forward(center_src);
        let half = (out_size as f64 - 1.0) / 2.0;
        let mut pixels = Vec::with_capacity(out_size * out_size);
        let mut padded = false;
        for v in 0..out_size {
            for u in 0..out_size {
                let q = (
                    center_aligned.0 + u as f64 - half,
                    center_aligned.1 + v as f64 - half,
                );
                let p = align.inverse(q);
                let (value, inside) = img.sample_zero_padded(p.0, p.1);
                padded |= !inside;
                pixels.push(value);
            }
        }
        Ok(EyeCrop {
            image: GrayImage::new(out_size, out_size, pixels)?,
            padded,
        })
    };

    Ok((crop(left_iris.center())?, crop(right_iris.center())?))
}

/// Rotates an image by `theta` radians about `center`, keeping dimensions and
/// zero-padding uncovered pixels. Used by the alignment equivariance tests.
pub fn rotate_about(img: &GrayImage, theta: f64, center: (f64, f64)) -> GrayImage {
    let (c, s) = (theta.cos(), theta.sin());
    let mut pixels = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            // inverse rotation of the output coordinate
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            let sx = c * dx + s * dy + center.0;
            let sy = -s * dx + c * dy + center.1;
            pixels.push(img.sample_zero_padded(sx, sy).0);
        }
    }
    GrayImage::new(img.width(), img.height(), pixels).expect("rotation preserves dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_max_channel() {
        let mut rgb = image::RgbImage::new(2, 1);
        rgb.put_pixel(0, 0, image::Rgb([255, 255, 255]));
        rgb.put_pixel(1, 0, image::Rgb([255, 0, 0]));
        let gray = GrayImage::from_rgb(&rgb, IntensityMethod::MaxChannel).unwrap();
        assert_eq!(gray.get(0, 0), 1.0);
        assert_eq!(gray.get(1, 0), 1.0);
    }

    #[test]
    fn grayscale_matches_per_pixel_oracle() {
        // 3x3 color raster against a scalar max-channel loop
        let mut rgb = image::RgbImage::new(3, 3);
        let mut k = 7u8;
        for y in 0..3 {
            for x in 0..3 {
                k = k.wrapping_mul(31).wrapping_add(17);
                rgb.put_pixel(x, y, image::Rgb([k, k.wrapping_add(60), k.wrapping_mul(3)]));
            }
        }
        let gray = GrayImage::from_rgb(&rgb, IntensityMethod::MaxChannel).unwrap();
        for y in 0..3u32 {
            for x in 0..3u32 {
                let [r, g, b] = rgb.get_pixel(x, y).0;
                let expected = *[r, g, b].iter().max().unwrap() as f32 / 255.0;
                assert_eq!(gray.get(x as usize, y as usize), expected);
            }
        }
    }

    #[test]
    fn grayscale_rejects_empty() {
        let rgb = image::RgbImage::new(0, 5);
        assert!(GrayImage::from_rgb(&rgb, IntensityMethod::MaxChannel).is_err());
    }

    #[test]
    fn resize_identity_is_exact() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 5 + y * 3) % 11) as f32 / 11.0).unwrap();
        let out = img.resize(7, 5).unwrap();
        assert_eq!(img.pixels(), out.pixels());
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = GrayImage::constant(5, 4, 0.375).unwrap();
        let out = img.resize(13, 9).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn resize_checkerboard_matches_bilinear_closed_form() {
        // 2x2 checkerboard [1 0; 0 1] up to 4x4. Output sample x maps to
        // source (x + 0.5)/2 - 0.5, clamped to [0, 1]: {0, 0.25, 0.75, 1}.
        // Value at (x, y) of the checkerboard plane is (1-x)(1-y) + xy.
        let img = GrayImage::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = img.resize(4, 4).unwrap();
        let coords = [0.0f32, 0.25, 0.75, 1.0];
        for (yi, &y) in coords.iter().enumerate() {
            for (xi, &x) in coords.iter().enumerate() {
                let expected = (1.0 - x) * (1.0 - y) + x * y;
                let got = out.get(xi, yi);
                assert!(
                    (got - expected).abs() < 1e-6,
                    "({xi},{yi}): got {got}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn tile_256_into_16_patches() {
        let img = GrayImage::from_fn(256, 256, |x, y| ((x + y) % 7) as f32 / 7.0).unwrap();
        let grid = tile_patches(&img, 4, 4).unwrap();
        assert_eq!(grid.patches().len(), 16);
        assert!(grid
            .patches()
            .iter()
            .all(|p| p.width() == 64 && p.height() == 64));
    }

    #[test]
    fn tile_identity() {
        let img = GrayImage::from_fn(64, 64, |x, _| x as f32 / 64.0).unwrap();
        let grid = tile_patches(&img, 1, 1).unwrap();
        assert_eq!(grid.patches().len(), 1);
        assert_eq!(grid.patches()[0].pixels(), img.pixels());
    }

    #[test]
    fn tile_rejects_non_divisible() {
        let img = GrayImage::constant(250, 256, 0.5).unwrap();
        assert!(tile_patches(&img, 4, 4).is_err());
    }

    #[test]
    fn tile_then_reassemble_roundtrips() {
        let img = GrayImage::from_fn(48, 32, |x, y| ((x * 13 + y * 7) % 29) as f32 / 29.0).unwrap();
        let grid = tile_patches(&img, 4, 6).unwrap();
        let back = grid.reassemble();
        assert_eq!(img.pixels(), back.pixels());
    }

    #[test]
    fn align_identity_geometry() {
        // Horizontal iris line with the target span: rotation 0, scale 1.
        let img = GrayImage::from_fn(256, 192, |x, y| ((x ^ y) % 17) as f32 / 17.0).unwrap();
        let out = 64usize;
        let span = IRIS_SPAN_FRACTION * out as f64; // 25.6 px
        let left = Rect {
            x: 100.0 - 4.0,
            y: 90.0 - 4.0,
            w: 8.0,
            h: 8.0,
        };
        let right = Rect {
            x: 100.0 + span - 4.0,
            y: 90.0 - 4.0,
            w: 8.0,
            h: 8.0,
        };
        let (l, r) = align_and_crop(&img, left, right, out).unwrap();
        assert!(!l.padded && !r.padded);
        // Pure crop: output pixel (u, v) reads source (cx + u - half, ...).
        let half = (out as f64 - 1.0) / 2.0;
        for v in [0usize, 13, 63] {
            for u in [0usize, 31, 63] {
                let sx = 100.0 + u as f64 - half;
                let sy = 90.0 + v as f64 - half;
                let expected = img.sample_zero_padded(sx, sy).0;
                assert!((l.image.get(u, v) - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn align_45_degrees_levels_the_iris_line() {
        let img = GrayImage::constant(256, 256, 0.5).unwrap();
        let left = Rect {
            x: 96.0,
            y: 96.0,
            w: 8.0,
            h: 8.0,
        };
        let right = Rect {
            x: 136.0,
            y: 136.0,
            w: 8.0,
            h: 8.0,
        };
        let out = 256usize;
        let align =
            EyeAlignment::from_iris_centers(left.center(), right.center(), out).unwrap();
        let fl = align.forward(left.center());
        let fr = align.forward(right.center());
        assert!(fl.1.abs() < 0.5, "left center off horizontal: {}", fl.1);
        assert!(fr.1.abs() < 0.5, "right center off horizontal: {}", fr.1);
        // Span maps to the configured fraction of the output size.
        assert!((fr.0 - fl.0 - IRIS_SPAN_FRACTION * out as f64).abs() < 1e-9);
        assert!(align_and_crop(&img, left, right, out).is_ok());
    }

    #[test]
    fn align_output_size_is_exact() {
        let img = GrayImage::constant(512, 512, 0.25).unwrap();
        let left = Rect {
            x: 150.0,
            y: 250.0,
            w: 20.0,
            h: 20.0,
        };
        let right = Rect {
            x: 330.0,
            y: 240.0,
            w: 20.0,
            h: 20.0,
        };
        let (l, r) = align_and_crop(&img, left, right, 256).unwrap();
        for crop in [&l, &r] {
            assert_eq!(crop.image.width(), 256);
            assert_eq!(crop.image.height(), 256);
        }
    }

    #[test]
    fn align_rejects_coincident_centers() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        let b = Rect {
            x: 30.0,
            y: 30.0,
            w: 4.0,
            h: 4.0,
        };
        assert!(matches!(
            align_and_crop(&img, b, b, 32),
            Err(ImagingError::CoincidentIrisCenters)
        ));
    }

    #[test]
    fn align_rejects_out_of_bounds_box() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        let left = Rect {
            x: -2.0,
            y: 10.0,
            w: 8.0,
            h: 8.0,
        };
        let right = Rect {
            x: 40.0,
            y: 10.0,
            w: 8.0,
            h: 8.0,
        };
        assert!(align_and_crop(&img, left, right, 32).is_err());
    }

    #[test]
    fn align_flags_padding() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        let left = Rect {
            x: 8.0,
            y: 28.0,
            w: 4.0,
            h: 4.0,
        };
        let right = Rect {
            x: 52.0,
            y: 28.0,
            w: 4.0,
            h: 4.0,
        };
        // 128-px crops from a 64-px image must spill over.
        let (l, r) = align_and_crop(&img, left, right, 128).unwrap();
        assert!(l.padded && r.padded);
    }

    #[test]
    fn align_equivariant_under_prerotation() {
        // Rotating the input (and boxes) about the iris midpoint must give
        // the same crops up to interpolation error.
        let img = GrayImage::from_fn(192, 192, |x, y| {
            let fx = x as f32 / 192.0;
            let fy = y as f32 / 192.0;
            0.5 + 0.3 * (8.0 * fx).sin() * (6.0 * fy).cos()
        })
        .unwrap();
        let left = Rect {
            x: 70.0,
            y: 92.0,
            w: 8.0,
            h: 8.0,
        };
        let right = Rect {
            x: 114.0,
            y: 92.0,
            w: 8.0,
            h: 8.0,
        };
        let out = 48usize;
        let (base_l, _) = align_and_crop(&img, left, right, out).unwrap();

        let theta = 0.3f64;
        let mid = (
            (left.center().0 + right.center().0) / 2.0,
            (left.center().1 + right.center().1) / 2.0,
        );
        let rotated = rotate_about(&img, theta, mid);
        // Forward-rotate the iris centers; synthesize boxes around them.
        let rot = |p: (f64, f64)| {
            let (c, s) = (theta.cos(), theta.sin());
            let dx = p.0 - mid.0;
            let dy = p.1 - mid.1;
            (c * dx - s * dy + mid.0, s * dx + c * dy + mid.1)
        };
        let lc = rot(left.center());
        let rc = rot(right.center());
        let boxed = |c: (f64, f64)| Rect {
            x: c.0 - 4.0,
            y: c.1 - 4.0,
            w: 8.0,
            h: 8.0,
        };
        let (rot_l, _) = align_and_crop(&rotated, boxed(lc), boxed(rc), out).unwrap();

        let mad: f32 = base_l
            .image
            .pixels()
            .iter()
            .zip(rot_l.image.pixels())
            .map(|(a, b)| (a - b).abs())
            .sum::<f32>()
            / (out * out) as f32;
        assert!(mad < 0.02, "mean absolute difference {mad}");
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let img = GrayImage::from_fn(60, 60, |x, y| ((x * y) % 13) as f32 / 13.0).unwrap();
        let resized = img.resize(91, 33).unwrap();
        assert!(resized.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
