//! Histogram of oriented gradients over the whole image.
//!
//! The input is resized to 368x368 so the standard layout (8x8-pixel cells,
//! 9 unsigned orientation bins, 2x2-cell blocks at 1-cell stride with
//! L2-hysteresis normalization) concatenates to 45 * 45 * 36 = 72,900
//! dimensions. Orientation votes are split linearly between the two bins
//! adjacent to the gradient angle, anchored at bin lower edges, so an exact
//! 0-degree gradient votes into bin 0 alone.

use super::{FeatureError, FeatureVector};
use crate::imaging::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct HogParams {
    /// Square side the input is resized to before extraction.
    pub resize_to: usize,
    /// Cell side in pixels.
    pub cell_size: usize,
    /// Block side in cells.
    pub block_size: usize,
    /// Unsigned orientation bins over [0, 180).
    pub bins: usize,
    /// L2-hysteresis clipping threshold.
    pub clip: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            resize_to: 368,
            cell_size: 8,
            block_size: 2,
            bins: 9,
            clip: 0.2,
        }
    }
}

impl HogParams {
    pub fn output_dims(&self) -> usize {
        let cells = self.resize_to / self.cell_size;
        let blocks = cells - self.block_size + 1;
        blocks * blocks * self.block_size * self.block_size * self.bins
    }

    pub fn extractor_id(&self) -> String {
        format!("hog-{}", self.resize_to)
    }
}

/// Central-difference gradients with replicated borders.
fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let xp = img.get((x + 1).min(w - 1), y) as f64;
            let xm = img.get(x.saturating_sub(1), y) as f64;
            let yp = img.get(x, (y + 1).min(h - 1)) as f64;
            let ym = img.get(x, y.saturating_sub(1)) as f64;
            gx[y * w + x] = xp - xm;
            gy[y * w + x] = yp - ym;
        }
    }
    (gx, gy)
}

pub fn extract_hog(img: &GrayImage) -> Result<FeatureVector, FeatureError> {
    extract_hog_with(img, &HogParams::default())
}

pub fn extract_hog_with(img: &GrayImage, params: &HogParams) -> Result<FeatureVector, FeatureError> {
    if img.width() != img.height() {
        return Err(FeatureError::NotSquare {
            width: img.width(),
            height: img.height(),
            extractor: "hog",
        });
    }
    let resized = img.resize(params.resize_to, params.resize_to)?;
    let side = params.resize_to;
    let (gx, gy) = gradients(&resized);

    let cells = side / params.cell_size;
    let bins = params.bins;
    let bin_width = 180.0 / bins as f64;
    let mut cell_hist = vec![0.0f64; cells * cells * bins];
    for y in 0..side {
        let cy = (y / params.cell_size).min(cells - 1);
        for x in 0..side {
            let cx = (x / params.cell_size).min(cells - 1);
            let dx = gx[y * side + x];
            let dy = gy[y * side + x];
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = dy.atan2(dx).to_degrees();
            angle = angle.rem_euclid(180.0);
            let pos = angle / bin_width;
            let lower = pos.floor() as usize % bins;
            let frac = pos - pos.floor();
            let base = (cy * cells + cx) * bins;
            cell_hist[base + lower] += mag * (1.0 - frac);
            cell_hist[base + (lower + 1) % bins] += mag * frac;
        }
    }

    let blocks = cells - params.block_size + 1;
    let block_dim = params.block_size * params.block_size * bins;
    let mut values = Vec::with_capacity(blocks * blocks * block_dim);
    let mut block = vec![0.0f64; block_dim];
    for by in 0..blocks {
        for bx in 0..blocks {
            for j in 0..params.block_size {
                for i in 0..params.block_size {
                    let src = ((by + j) * cells + bx + i) * bins;
                    let dst = (j * params.block_size + i) * bins;
                    block[dst..dst + bins].copy_from_slice(&cell_hist[src..src + bins]);
                }
            }
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in block.iter_mut() {
                    *v = (*v / norm).min(params.clip);
                }
                let renorm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                if renorm > 0.0 {
                    for v in block.iter_mut() {
                        *v /= renorm;
                    }
                }
            }
            values.extend_from_slice(&block);
        }
    }
    FeatureVector::new(values, params.extractor_id())
}
