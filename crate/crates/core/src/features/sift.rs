//! SIFT keypoint detection and description on a difference-of-Gaussians
//! scale space: 3 scales per octave with base sigma 1.6, extrema refined by
//! a quadratic fit, contrast threshold 0.03 and edge-ratio threshold 10,
//! gradient-histogram orientation assignment and a 4x4x8 descriptor,
//! L2-normalized with 0.2 clipping.

use super::{FeatureError, Keypoint, KeypointSet};
use crate::imaging::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct SiftParams {
    pub scales_per_octave: usize,
    pub base_sigma: f64,
    /// Blur assumed already present in the input image.
    pub assumed_blur: f64,
    pub contrast_threshold: f64,
    pub edge_ratio: f64,
    pub max_octaves: usize,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            scales_per_octave: 3,
            base_sigma: 1.6,
            assumed_blur: 0.5,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            max_octaves: 8,
        }
    }
}

const MIN_SIDE: usize = 32;
/// Extrema closer to the border than this cannot be refined or described.
const BORDER: usize = 5;
const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const ORI_PEAK_RATIO: f64 = 0.8;
const DESC_WIDTH: usize = 4;
const DESC_ORI_BINS: usize = 8;
const DESC_SCALE_FACTOR: f64 = 3.0;
const DESC_CLIP: f64 = 0.2;

/// Plain float raster; DoG levels go negative so this is not a [`GrayImage`].
struct Img {
    w: usize,
    h: usize,
    px: Vec<f32>,
}

impl Img {
    fn from_gray(img: &GrayImage) -> Self {
        Self {
            w: img.width(),
            h: img.height(),
            px: img.pixels().to_vec(),
        }
    }

    #[inline]
    fn get(&self, x: usize, y: usize) -> f32 {
        self.px[y * self.w + x]
    }

    fn gaussian_blur(&self, sigma: f64) -> Img {
        if sigma <= 0.0 {
            return Img {
                w: self.w,
                h: self.h,
                px: self.px.clone(),
            };
        }
        let radius = ((3.0 * sigma).ceil() as usize).max(1);
        let mut kernel = Vec::with_capacity(2 * radius + 1);
        let denom = 2.0 * sigma * sigma;
        for t in -(radius as i64)..=(radius as i64) {
            kernel.push((-(t * t) as f64 / denom).exp());
        }
        let total: f64 = kernel.iter().sum();
        for k in kernel.iter_mut() {
            *k /= total;
        }

        let clamp = |v: i64, max: usize| v.clamp(0, max as i64 - 1) as usize;
        let mut tmp = vec![0.0f32; self.w * self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0f64;
                for (i, k) in kernel.iter().enumerate() {
                    let sx = clamp(x as i64 + i as i64 - radius as i64, self.w);
                    acc += k * self.get(sx, y) as f64;
                }
                tmp[y * self.w + x] = acc as f32;
            }
        }
        let mut out = vec![0.0f32; self.w * self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0f64;
                for (i, k) in kernel.iter().enumerate() {
                    let sy = clamp(y as i64 + i as i64 - radius as i64, self.h);
                    acc += k * tmp[sy * self.w + x] as f64;
                }
                out[y * self.w + x] = acc as f32;
            }
        }
        Img {
            w: self.w,
            h: self.h,
            px: out,
        }
    }

    fn halve(&self) -> Img {
        let w = (self.w / 2).max(1);
        let h = (self.h / 2).max(1);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                px.push(self.get(x * 2, y * 2));
            }
        }
        Img { w, h, px }
    }
}

struct ScaleSpace {
    /// gaussians[octave][level], level = 0..scales_per_octave + 3
    gaussians: Vec<Vec<Img>>,
    /// dog[octave][level], level = 0..scales_per_octave + 2
    dog: Vec<Vec<Img>>,
}

fn build_scale_space(img: &GrayImage, params: &SiftParams) -> ScaleSpace {
    let s = params.scales_per_octave;
    let min_side = img.width().min(img.height());
    let n_octaves = (((min_side as f64).log2().floor() as i64) - 3)
        .clamp(1, params.max_octaves as i64) as usize;

    let initial_sigma =
        (params.base_sigma * params.base_sigma - params.assumed_blur * params.assumed_blur)
            .max(0.0)
            .sqrt();
    let mut base = Img::from_gray(img).gaussian_blur(initial_sigma);

    let k = 2f64.powf(1.0 / s as f64);
    let mut gaussians = Vec::with_capacity(n_octaves);
    let mut dog = Vec::with_capacity(n_octaves);
    for _ in 0..n_octaves {
        let mut levels = Vec::with_capacity(s + 3);
        levels.push(base);
        for l in 1..s + 3 {
            let sigma_prev = params.base_sigma * k.powi(l as i32 - 1);
            let sigma_inc = sigma_prev * (k * k - 1.0).sqrt();
            levels.push(levels[l - 1].gaussian_blur(sigma_inc));
        }
        let diffs = (0..s + 2)
            .map(|l| {
                let a = &levels[l + 1];
                let b = &levels[l];
                Img {
                    w: a.w,
                    h: a.h,
                    px: a.px.iter().zip(&b.px).map(|(x, y)| x - y).collect(),
                }
            })
            .collect();
        // level s carries blur 2 * base_sigma: the seed of the next octave
        base = levels[s].halve();
        gaussians.push(levels);
        dog.push(diffs);
    }
    ScaleSpace { gaussians, dog }
}

fn is_extremum(dog: &[Img], l: usize, x: usize, y: usize) -> bool {
    let v = dog[l].get(x, y);
    let mut greater = true;
    let mut less = true;
    for layer in &dog[l - 1..=l + 1] {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let n = layer.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                if std::ptr::eq(layer, &dog[l]) && dx == 0 && dy == 0 {
                    continue;
                }
                greater &= v > n;
                less &= v < n;
            }
        }
    }
    greater || less
}

struct Refined {
    x: f64,
    y: f64,
    layer: f64,
    contrast: f64,
}

/// Quadratic interpolation of an extremum; returns None when the fit
/// diverges, leaves the valid region, or fails the contrast/edge tests.
fn refine(dog: &[Img], params: &SiftParams, mut l: usize, mut x: usize, mut y: usize) -> Option<Refined> {
    let s = params.scales_per_octave;
    let (w, h) = (dog[0].w, dog[0].h);
    let mut offset = [0.0f64; 3];
    for attempt in 0..5 {
        let d = |dl: i64, dx: i64, dy: i64| -> f64 {
            dog[(l as i64 + dl) as usize].get((x as i64 + dx) as usize, (y as i64 + dy) as usize)
                as f64
        };
        let v = d(0, 0, 0);
        let gx = (d(0, 1, 0) - d(0, -1, 0)) / 2.0;
        let gy = (d(0, 0, 1) - d(0, 0, -1)) / 2.0;
        let gl = (d(1, 0, 0) - d(-1, 0, 0)) / 2.0;
        let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
        let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
        let dll = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
        let dxy = (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1)) / 4.0;
        let dxl = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4.0;
        let dyl = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4.0;

        // Solve H * delta = -grad for the 3x3 Hessian by Cramer's rule.
        let hm = [[dxx, dxy, dxl], [dxy, dyy, dyl], [dxl, dyl, dll]];
        let det = det3(&hm);
        if det.abs() < 1e-12 {
            return None;
        }
        let rhs = [-gx, -gy, -gl];
        let mut delta = [0.0f64; 3];
        for col in 0..3 {
            let mut m = hm;
            for row in 0..3 {
                m[row][col] = rhs[row];
            }
            delta[col] = det3(&m) / det;
        }
        offset = delta;
        if delta[0].abs() < 0.5 && delta[1].abs() < 0.5 && delta[2].abs() < 0.5 {
            let contrast = v + 0.5 * (gx * delta[0] + gy * delta[1] + gl * delta[2]);
            if contrast.abs() < params.contrast_threshold {
                return None;
            }
            // Principal-curvature ratio test on the spatial Hessian.
            let trace = dxx + dyy;
            let det2 = dxx * dyy - dxy * dxy;
            let r = params.edge_ratio;
            if det2 <= 0.0 || trace * trace * r >= (r + 1.0) * (r + 1.0) * det2 {
                return None;
            }
            return Some(Refined {
                x: x as f64 + delta[0],
                y: y as f64 + delta[1],
                layer: l as f64 + delta[2],
                contrast,
            });
        }
        if attempt == 4 {
            return None;
        }
        x = (x as i64 + delta[0].round() as i64) as usize;
        y = (y as i64 + delta[1].round() as i64) as usize;
        l = (l as i64 + delta[2].round() as i64).max(0) as usize;
        if l < 1 || l > s || x < BORDER || x >= w - BORDER || y < BORDER || y >= h - BORDER {
            return None;
        }
    }
    let _ = offset;
    None
}

/// Gradient magnitude/orientation on a gaussian level; `None` at the border.
#[inline]
fn gradient(img: &Img, x: i64, y: i64) -> Option<(f64, f64)> {
    if x < 1 || y < 1 || x as usize >= img.w - 1 || y as usize >= img.h - 1 {
        return None;
    }
    let (x, y) = (x as usize, y as usize);
    let dx = (img.get(x + 1, y) - img.get(x - 1, y)) as f64;
    let dy = (img.get(x, y + 1) - img.get(x, y - 1)) as f64;
    let mag = (dx * dx + dy * dy).sqrt();
    Some((mag, dy.atan2(dx)))
}

/// Dominant gradient orientations around a keypoint: every smoothed
/// histogram peak within 80% of the maximum.
fn orientations(img: &Img, x: f64, y: f64, scale: f64) -> Vec<f64> {
    let sigma = ORI_SIGMA_FACTOR * scale;
    let radius = (3.0 * sigma).round().max(1.0) as i64;
    let denom = 2.0 * sigma * sigma;
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    let mut hist = [0.0f64; ORI_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let Some((mag, angle)) = gradient(img, cx + dx, cy + dy) else {
                continue;
            };
            let weight = (-((dx * dx + dy * dy) as f64) / denom).exp();
            let mut bin = (angle.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU
                * ORI_BINS as f64)
                .floor() as usize;
            bin %= ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    // two circular passes of a 3-tap box filter
    for _ in 0..2 {
        let prev = hist;
        for b in 0..ORI_BINS {
            hist[b] = (prev[(b + ORI_BINS - 1) % ORI_BINS] + prev[b] + prev[(b + 1) % ORI_BINS]) / 3.0;
        }
    }
    let max = hist.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in 0..ORI_BINS {
        let left = hist[(b + ORI_BINS - 1) % ORI_BINS];
        let right = hist[(b + 1) % ORI_BINS];
        if hist[b] >= ORI_PEAK_RATIO * max && hist[b] > left && hist[b] > right {
            let denom = left - 2.0 * hist[b] + right;
            let shift = if denom.abs() > 1e-12 {
                0.5 * (left - right) / denom
            } else {
                0.0
            };
            let angle = (b as f64 + 0.5 + shift) / ORI_BINS as f64 * std::f64::consts::TAU;
            out.push(angle.rem_euclid(std::f64::consts::TAU));
        }
    }
    out
}

/// 4x4x8 gradient histogram descriptor with trilinear voting, rotated to the
/// keypoint orientation, L2-normalized with 0.2 clipping and renormalized.
fn describe(img: &Img, x: f64, y: f64, scale: f64, theta: f64) -> Option<Vec<f64>> {
    let d = DESC_WIDTH;
    let n = DESC_ORI_BINS;
    let hist_width = DESC_SCALE_FACTOR * scale;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d as f64 + 1.0) * 0.5).round() as i64;
    let radius = radius.min((img.w.max(img.h)) as i64);
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let denom = 2.0 * (0.5 * d as f64) * (0.5 * d as f64);
    let (cx, cy) = (x.round() as i64, y.round() as i64);

    let mut hist = vec![0.0f64; d * d * n];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            // rotate into the descriptor frame
            let c_rot = (cos_t * dx as f64 + sin_t * dy as f64) / hist_width;
            let r_rot = (-sin_t * dx as f64 + cos_t * dy as f64) / hist_width;
            let rbin = r_rot + d as f64 / 2.0 - 0.5;
            let cbin = c_rot + d as f64 / 2.0 - 0.5;
            if !(-1.0 < rbin && rbin < d as f64 && -1.0 < cbin && cbin < d as f64) {
                continue;
            }
            let Some((mag, angle)) = gradient(img, cx + dx, cy + dy) else {
                continue;
            };
            let obin = ((angle - theta).rem_euclid(std::f64::consts::TAU))
                / std::f64::consts::TAU
                * n as f64;
            let weight = (-(c_rot * c_rot + r_rot * r_rot) / denom).exp();
            let value = mag * weight;

            let r0 = rbin.floor();
            let c0 = cbin.floor();
            let o0 = obin.floor();
            let fr = rbin - r0;
            let fc = cbin - c0;
            let fo = obin - o0;
            for (ir, wr) in [(r0, 1.0 - fr), (r0 + 1.0, fr)] {
                if ir < 0.0 || ir >= d as f64 {
                    continue;
                }
                for (ic, wc) in [(c0, 1.0 - fc), (c0 + 1.0, fc)] {
                    if ic < 0.0 || ic >= d as f64 {
                        continue;
                    }
                    for (io, wo) in [(o0, 1.0 - fo), (o0 + 1.0, fo)] {
                        let io = (io as usize) % n;
                        let idx = (ir as usize * d + ic as usize) * n + io;
                        hist[idx] += value * wr * wc * wo;
                    }
                }
            }
        }
    }

    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return None;
    }
    for v in hist.iter_mut() {
        *v = (*v / norm).min(DESC_CLIP);
    }
    let renorm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if renorm <= 0.0 {
        return None;
    }
    for v in hist.iter_mut() {
        *v /= renorm;
    }
    Some(hist)
}

pub fn extract_sift(img: &GrayImage) -> Result<KeypointSet, FeatureError> {
    extract_sift_with(img, &SiftParams::default())
}

pub fn extract_sift_with(img: &GrayImage, params: &SiftParams) -> Result<KeypointSet, FeatureError> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(FeatureError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min_w: MIN_SIDE,
            min_h: MIN_SIDE,
            extractor: "sift",
        });
    }
    let s = params.scales_per_octave;
    let space = build_scale_space(img, params);
    let prefilter = 0.5 * params.contrast_threshold;

    let mut keypoints = Vec::new();
    for (octave, dog) in space.dog.iter().enumerate() {
        let (w, h) = (dog[0].w, dog[0].h);
        if w <= 2 * BORDER || h <= 2 * BORDER {
            continue;
        }
        let octave_scale = (1usize << octave) as f64;
        for l in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if dog[l].get(x, y).abs() < prefilter as f32 {
                        continue;
                    }
                    if !is_extremum(dog, l, x, y) {
                        continue;
                    }
                    let Some(refined) = refine(dog, params, l, x, y) else {
                        continue;
                    };
                    let scale_rel =
                        params.base_sigma * 2f64.powf(refined.layer / s as f64);
                    let level = (refined.layer.round() as usize).clamp(1, s);
                    let gauss = &space.gaussians[octave][level];
                    for theta in orientations(gauss, refined.x, refined.y, scale_rel) {
                        let Some(descriptor) =
                            describe(gauss, refined.x, refined.y, scale_rel, theta)
                        else {
                            continue;
                        };
                        keypoints.push(Keypoint {
                            x: refined.x * octave_scale,
                            y: refined.y * octave_scale,
                            scale: scale_rel * octave_scale,
                            orientation: theta,
                            response: refined.contrast.abs(),
                            descriptor,
                        });
                    }
                }
            }
        }
    }
    Ok(KeypointSet { keypoints })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        let kps = extract_sift(&img).unwrap();
        assert!(kps.is_empty());
    }

    #[test]
    fn rejects_small_images() {
        let img = GrayImage::constant(16, 16, 0.5).unwrap();
        assert!(extract_sift(&img).is_err());
    }

    #[test]
    fn descriptors_are_unit_norm_128d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let coarse = GrayImage::from_fn(16, 16, |_, _| rng.gen_range(0.0..1.0)).unwrap();
        let img = coarse.resize(128, 128).unwrap();
        let kps = extract_sift(&img).unwrap();
        assert!(!kps.is_empty(), "textured image should yield keypoints");
        for kp in &kps.keypoints {
            assert_eq!(kp.descriptor.len(), 128);
            let norm: f64 = kp.descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-6, "norm {norm}");
        }
    }

    #[test]
    fn gaussian_blob_is_located_at_the_analytic_scale() {
        // A Gaussian spot of sigma_b is itself a scale-space kernel: blurring
        // by sigma leaves amplitude sigma_b^2 / (sigma_b^2 + sigma^2), so the
        // DoG response across the pyramid's levels is known in closed form.
        let sigma_b = 6.0f64;
        let (cx, cy) = (48.0, 48.0);
        let img = GrayImage::from_fn(96, 96, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            (-(dx * dx + dy * dy) / (2.0 * sigma_b * sigma_b)).exp() as f32
        })
        .unwrap();

        let params = SiftParams::default();
        let s = params.scales_per_octave;
        let k = 2f64.powf(1.0 / s as f64);
        let amplitude = |sigma: f64| sigma_b * sigma_b / (sigma_b * sigma_b + sigma * sigma);
        let mut best = (0.0f64, 0.0f64); // (|response|, sigma)
        for octave in 0..3 {
            for l in 1..=s {
                let sigma = params.base_sigma * k.powi(l as i32) * (1 << octave) as f64;
                let response = (amplitude(sigma * k) - amplitude(sigma)).abs();
                if response > best.0 {
                    best = (response, sigma);
                }
            }
        }
        let sigma_star = best.1;

        let kps = extract_sift(&img).unwrap();
        assert!(!kps.is_empty(), "blob produced no keypoints");
        let hit = kps.keypoints.iter().any(|kp| {
            let dist = ((kp.x - cx).powi(2) + (kp.y - cy).powi(2)).sqrt();
            dist <= 3.0 && (kp.scale / sigma_star).log2().abs() <= 1.0
        });
        assert!(
            hit,
            "no keypoint near ({cx},{cy}) at scale ~{sigma_star}: {:?}",
            kps.keypoints
                .iter()
                .map(|k| (k.x, k.y, k.scale))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let coarse = GrayImage::from_fn(12, 12, |_, _| rng.gen_range(0.0..1.0)).unwrap();
        let img = coarse.resize(96, 96).unwrap();
        let a = extract_sift(&img).unwrap();
        let b = extract_sift(&img).unwrap();
        assert_eq!(a, b);
    }
}
