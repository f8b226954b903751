//! Uniform local binary patterns (8 neighbors, radius 1, u2 mapping).
//!
//! Each interior pixel gets an 8-bit code: bit k is set when the bilinearly
//! sampled neighbor at angle k*45 degrees is >= the center value. Codes with
//! at most two circular bit transitions are "uniform" and keep their own
//! histogram bin (58 of them); everything else falls into one catch-all bin.

use std::sync::OnceLock;

use super::{l1_normalize, FeatureError, FeatureVector};
use crate::imaging::{GrayImage, PatchGrid};

/// 58 uniform patterns plus the non-uniform catch-all.
pub const LBP_BINS: usize = 59;

/// Neighbor offsets at radius 1, counter-clockwise from +x; diagonal taps
/// land between pixels and are sampled bilinearly.
const DIAG: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub(crate) const LBP_OFFSETS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (DIAG, DIAG),
    (0.0, 1.0),
    (-DIAG, DIAG),
    (-1.0, 0.0),
    (-DIAG, -DIAG),
    (0.0, -1.0),
    (DIAG, -DIAG),
];

fn circular_transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Maps an LBP code to its u2 histogram bin. Uniform codes are indexed in
/// ascending numeric order; non-uniform codes share bin 58.
pub fn uniform_bin(code: u8) -> usize {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut table = [0u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            table[code as usize] = if circular_transitions(code) <= 2 {
                let bin = next;
                next += 1;
                bin
            } else {
                (LBP_BINS - 1) as u8
            };
        }
        debug_assert_eq!(next as usize, LBP_BINS - 1);
        table
    });
    table[code as usize] as usize
}

/// The LBP code of an interior pixel (`1 <= x < w-1`, `1 <= y < h-1`).
pub fn lbp_code(img: &GrayImage, x: usize, y: usize) -> u8 {
    debug_assert!(x >= 1 && x + 1 < img.width() && y >= 1 && y + 1 < img.height());
    let center = img.get(x, y);
    let mut code = 0u8;
    for (k, (dx, dy)) in LBP_OFFSETS.iter().enumerate() {
        let neighbor = img.sample_clamped(x as f64 + dx, y as f64 + dy);
        if neighbor >= center {
            code |= 1 << k;
        }
    }
    code
}

/// L1-normalized 59-bin uniform-LBP histogram of one patch.
pub fn lbp_histogram(patch: &GrayImage) -> Result<[f64; LBP_BINS], FeatureError> {
    if patch.width() < 3 || patch.height() < 3 {
        return Err(FeatureError::PatchTooSmall {
            width: patch.width(),
            height: patch.height(),
            min: 3,
            extractor: "lbp",
        });
    }
    let mut hist = [0.0f64; LBP_BINS];
    for y in 1..patch.height() - 1 {
        for x in 1..patch.width() - 1 {
            hist[uniform_bin(lbp_code(patch, x, y))] += 1.0;
        }
    }
    l1_normalize(&mut hist);
    Ok(hist)
}

/// Concatenated per-patch uniform-LBP histograms in row-major patch order;
/// a 4x4 grid yields 944 dimensions.
pub fn extract_lbp(grid: &PatchGrid) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(grid.patches().len() * LBP_BINS);
    for patch in grid.patches() {
        values.extend_from_slice(&lbp_histogram(patch)?);
    }
    FeatureVector::new(values, "lbp-u2-8-1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::tile_patches;
    use rand::{Rng, SeedableRng};

    /// Independent brute-force oracle: recomputes every code from literal
    /// neighbor arithmetic and bins by counting smaller uniform codes.
    fn oracle_histogram(patch: &GrayImage) -> Vec<f64> {
        let diag = 0.7071067811865476f64;
        let offsets: [(f64, f64); 8] = [
            (1.0, 0.0),
            (diag, diag),
            (0.0, 1.0),
            (-diag, diag),
            (-1.0, 0.0),
            (-diag, -diag),
            (0.0, -1.0),
            (diag, -diag),
        ];
        let bilinear = |px: f64, py: f64| -> f32 {
            let x0 = px.floor() as usize;
            let y0 = py.floor() as usize;
            let fx = (px - x0 as f64) as f32;
            let fy = (py - y0 as f64) as f32;
            // clamp the far taps; their weight is zero when they would clamp
            let x1 = (x0 + 1).min(patch.width() - 1);
            let y1 = (y0 + 1).min(patch.height() - 1);
            let top = {
                let a = patch.get(x0, y0);
                let b = patch.get(x1, y0);
                a + fx * (b - a)
            };
            let bot = {
                let a = patch.get(x0, y1);
                let b = patch.get(x1, y1);
                a + fx * (b - a)
            };
            top + fy * (bot - top)
        };
        let is_uniform = |code: u8| -> bool {
            let mut transitions = 0;
            for b in 0..8 {
                let this = (code >> b) & 1;
                let next = (code >> ((b + 1) % 8)) & 1;
                if this != next {
                    transitions += 1;
                }
            }
            transitions <= 2
        };
        let bin_of = |code: u8| -> usize {
            if !is_uniform(code) {
                return 58;
            }
            (0..code).filter(|&c| is_uniform(c)).count()
        };
        let mut hist = vec![0.0f64; 59];
        let mut count = 0usize;
        for y in 1..patch.height() - 1 {
            for x in 1..patch.width() - 1 {
                let c = patch.get(x, y);
                let mut code = 0u8;
                for (k, (dx, dy)) in offsets.iter().enumerate() {
                    if bilinear(x as f64 + dx, y as f64 + dy) >= c {
                        code |= 1 << k;
                    }
                }
                hist[bin_of(code)] += 1.0;
                count += 1;
            }
        }
        for v in hist.iter_mut() {
            *v /= count as f64;
        }
        hist
    }

    fn random_patch(seed: u64, size: usize) -> GrayImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(size, size, |_, _| rng.gen_range(0.0..1.0)).unwrap()
    }

    #[test]
    fn uniform_table_has_58_uniform_codes() {
        let uniform = (0..=255u8).filter(|&c| circular_transitions(c) <= 2).count();
        assert_eq!(uniform, 58);
        assert_eq!(uniform_bin(0b0000_0000), 0);
        assert_eq!(uniform_bin(0b1111_1111), 57);
        // 0b0101 has more than two transitions -> catch-all
        assert_eq!(uniform_bin(0b0101_0101), 58);
    }

    #[test]
    fn constant_patches_produce_all_ones_code() {
        // Neighbors tie with the center, >= resolves to 1 everywhere.
        let img = GrayImage::constant(256, 256, 0.42).unwrap();
        let grid = tile_patches(&img, 4, 4).unwrap();
        let fv = extract_lbp(&grid).unwrap();
        assert_eq!(fv.dims(), 944);
        let all_ones_bin = uniform_bin(0xFF);
        for (patch_idx, hist) in fv.values.chunks(LBP_BINS).enumerate() {
            for (bin, &v) in hist.iter().enumerate() {
                let expected = if bin == all_ones_bin { 1.0 } else { 0.0 };
                assert_eq!(v, expected, "patch {patch_idx}, bin {bin}");
            }
        }
    }

    #[test]
    fn dims_are_944_for_a_4x4_grid() {
        let img = random_patch(3, 256);
        let grid = tile_patches(&img, 4, 4).unwrap();
        assert_eq!(extract_lbp(&grid).unwrap().dims(), 944);
    }

    #[test]
    fn matches_brute_force_oracle_on_random_patch() {
        for seed in 0..5 {
            let patch = random_patch(100 + seed, 64);
            let hist = lbp_histogram(&patch).unwrap();
            let oracle = oracle_histogram(&patch);
            for (bin, (a, b)) in hist.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() <= 1e-12, "seed {seed}, bin {bin}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn histogram_sums_to_one() {
        let patch = random_patch(7, 33);
        let hist = lbp_histogram(&patch).unwrap();
        let total: f64 = hist.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invariant_to_positive_affine_remap() {
        let patch = random_patch(11, 48);
        let remapped = GrayImage::from_fn(48, 48, |x, y| 0.2 + 0.6 * patch.get(x, y)).unwrap();
        let a = lbp_histogram(&patch).unwrap();
        let b = lbp_histogram(&remapped).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_undersized_patch() {
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        let grid = tile_patches(&img, 2, 2).unwrap(); // 2x2 patches
        assert!(extract_lbp(&grid).is_err());
    }
}
