//! Multi-block transitional local binary patterns.
//!
//! The image is mean-pooled into block x block cells; at each interior pooled
//! location an 8-bit transitional code compares consecutive circular
//! neighbors (bit i set when neighbor (i+1) mod 8 >= neighbor i, same
//! counter-clockwise-from-+x order as LBP but on integer grid offsets).
//! Codes are histogrammed into 256 bins over a 4x4 partition of the pooled
//! grid and the 16 region histograms are concatenated: 4096 dimensions.

use super::{l1_normalize, FeatureError, FeatureVector};
use crate::imaging::GrayImage;

/// The pooled grid is split into 4x4 = 16 regions.
pub const MBTLBP_REGIONS: usize = 4;

/// Circular neighbor offsets on the pooled grid, counter-clockwise from +x.
const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Transitional code of one interior location of a pooled grid.
pub fn transitional_code(pooled: &[f64], grid_w: usize, x: usize, y: usize) -> u8 {
    let at = |k: usize| {
        let (dx, dy) = NEIGHBORS[k];
        pooled[(y as i64 + dy) as usize * grid_w + (x as i64 + dx) as usize]
    };
    let mut code = 0u8;
    for i in 0..8 {
        if at((i + 1) % 8) >= at(i) {
            code |= 1 << i;
        }
    }
    code
}

fn mean_pool(img: &GrayImage, block: usize) -> (Vec<f64>, usize, usize) {
    let gw = img.width() / block;
    let gh = img.height() / block;
    let mut pooled = vec![0.0f64; gw * gh];
    let inv = 1.0 / (block * block) as f64;
    for gy in 0..gh {
        for gx in 0..gw {
            let mut sum = 0.0f64;
            for y in 0..block {
                for x in 0..block {
                    sum += img.get(gx * block + x, gy * block + y) as f64;
                }
            }
            pooled[gy * gw + gx] = sum * inv;
        }
    }
    (pooled, gw, gh)
}

/// MB-TLBP descriptor: 16 region histograms of 256 bins each. Regions that
/// contain no interior code (tiny pooled grids) stay all-zero.
pub fn extract_mbtlbp(img: &GrayImage, block: usize) -> Result<FeatureVector, FeatureError> {
    let min = 3 * block.max(1);
    if block == 0 || img.width() < min || img.height() < min {
        return Err(FeatureError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min_w: min,
            min_h: min,
            extractor: "mbtlbp",
        });
    }
    let (pooled, gw, gh) = mean_pool(img, block);

    let regions = MBTLBP_REGIONS;
    let mut hists = vec![[0.0f64; 256]; regions * regions];
    for y in 1..gh - 1 {
        for x in 1..gw - 1 {
            let code = transitional_code(&pooled, gw, x, y);
            let rx = (x * regions / gw).min(regions - 1);
            let ry = (y * regions / gh).min(regions - 1);
            hists[ry * regions + rx][code as usize] += 1.0;
        }
    }
    let mut values = Vec::with_capacity(regions * regions * 256);
    for hist in hists.iter_mut() {
        l1_normalize(hist);
        values.extend_from_slice(hist);
    }
    FeatureVector::new(values, format!("mbtlbp-{block}x{block}"))
}
