//! Local phase quantization over a 7x7 short-term Fourier window.
//!
//! At every pixel whose full window fits, four low-frequency STFT
//! coefficients are evaluated with a rectangular window:
//! u1 = (a, 0), u2 = (0, a), u3 = (a, a), u4 = (a, -a), a = 1/7, using the
//! kernel exp(-j 2 pi u . d) over displacements d in [-3, 3]^2. Signs of the
//! real and imaginary parts quantize to an 8-bit code (>= 0 maps to 1), bit
//! layout [Re u1, Im u1, Re u2, Im u2, Re u3, Im u3, Re u4, Im u4] from bit 0
//! up. Codes are histogrammed into 256 bins per patch and L1-normalized.
//!
//! Because displacements span a full period of a = 1/7, the kernels sum to
//! zero and the codes are unaffected by adding a constant to the patch.

use super::{l1_normalize, FeatureError, FeatureVector};
use crate::imaging::{GrayImage, PatchGrid};

/// Side length of the STFT window.
pub const LPQ_WINDOW: usize = 7;
/// 8-bit codes.
pub const LPQ_BINS: usize = 256;

const RADIUS: usize = LPQ_WINDOW / 2;

/// cos / sin tables for exp(-j 2 pi t / 7), t = 1..=3. Negative t uses the
/// exact symmetry cos(-x) = cos(x), sin(-x) = -sin(x).
fn kernel_tables() -> ([f64; RADIUS], [f64; RADIUS]) {
    let mut cos_t = [0.0; RADIUS];
    let mut sin_t = [0.0; RADIUS];
    for t in 1..=RADIUS {
        let phase = 2.0 * std::f64::consts::PI * t as f64 / LPQ_WINDOW as f64;
        cos_t[t - 1] = phase.cos();
        sin_t[t - 1] = phase.sin();
    }
    (cos_t, sin_t)
}

/// The per-pixel LPQ codes of a patch, row-major over the valid interior
/// (`RADIUS <= x < w - RADIUS`, same for y), plus the interior dimensions.
pub fn lpq_codes(patch: &GrayImage) -> Result<(Vec<u8>, usize, usize), FeatureError> {
    let (w, h) = (patch.width(), patch.height());
    if w < LPQ_WINDOW || h < LPQ_WINDOW {
        return Err(FeatureError::PatchTooSmall {
            width: w,
            height: h,
            min: LPQ_WINDOW,
            extractor: "lpq",
        });
    }
    let (cos_t, sin_t) = kernel_tables();

    // Horizontal pass. For each pixel with full horizontal support:
    //   plain[x] = sum_dx f(x+dx)              (kernel of u2's x factor)
    //   row_re/row_im = sum_dx f(x+dx) e^{-j 2 pi a dx}
    // Antisymmetric pairing keeps the imaginary part exactly zero on
    // constant rows.
    let iw = w - 2 * RADIUS;
    let ih = h - 2 * RADIUS;
    let mut plain = vec![0.0f64; iw * h];
    let mut row_re = vec![0.0f64; iw * h];
    let mut row_im = vec![0.0f64; iw * h];
    for y in 0..h {
        for ix in 0..iw {
            let x = ix + RADIUS;
            let center = patch.get(x, y) as f64;
            let mut s = center;
            let mut re = center;
            let mut im = 0.0;
            for t in 1..=RADIUS {
                let right = patch.get(x + t, y) as f64;
                let left = patch.get(x - t, y) as f64;
                s += right + left;
                re += cos_t[t - 1] * (right + left);
                im += -sin_t[t - 1] * (right - left);
            }
            let idx = y * iw + ix;
            plain[idx] = s;
            row_re[idx] = re;
            row_im[idx] = im;
        }
    }

    // Vertical pass combines the horizontal responses into the four
    // frequencies: u1 sums row_* plainly, u2 modulates plain, u3/u4 modulate
    // row_* with e^{-+j 2 pi a dy}.
    let mut codes = vec![0u8; iw * ih];
    for iy in 0..ih {
        let y = iy + RADIUS;
        for ix in 0..iw {
            let at = |dy: i64| -> (f64, f64, f64) {
                let idx = (y as i64 + dy) as usize * iw + ix;
                (plain[idx], row_re[idx], row_im[idx])
            };
            let (p0, r0, i0) = at(0);
            let (mut f1_re, mut f1_im) = (r0, i0);
            let (mut f2_re, mut f2_im) = (p0, 0.0);
            let (mut f3_re, mut f3_im) = (r0, i0);
            let (mut f4_re, mut f4_im) = (r0, i0);
            for t in 1..=RADIUS {
                let (pd, rd, id) = at(t as i64);
                let (pu, ru, iu) = at(-(t as i64));
                let c = cos_t[t - 1];
                let s = sin_t[t - 1];
                f1_re += rd + ru;
                f1_im += id + iu;
                f2_re += c * (pd + pu);
                f2_im += -s * (pd - pu);
                // u3: modulate downwards displacement by e^{-j.}, upwards by e^{+j.}
                f3_re += c * (rd + ru) + s * (id - iu);
                f3_im += c * (id + iu) - s * (rd - ru);
                // u4: conjugate modulation
                f4_re += c * (rd + ru) - s * (id - iu);
                f4_im += c * (id + iu) + s * (rd - ru);
            }
            let mut code = 0u8;
            for (k, v) in [f1_re, f1_im, f2_re, f2_im, f3_re, f3_im, f4_re, f4_im]
                .iter()
                .enumerate()
            {
                if *v >= 0.0 {
                    code |= 1 << k;
                }
            }
            codes[iy * iw + ix] = code;
        }
    }
    Ok((codes, iw, ih))
}

/// L1-normalized 256-bin LPQ histogram of one patch.
pub fn lpq_histogram(patch: &GrayImage) -> Result<[f64; LPQ_BINS], FeatureError> {
    let (codes, _, _) = lpq_codes(patch)?;
    let mut hist = [0.0f64; LPQ_BINS];
    for &c in &codes {
        hist[c as usize] += 1.0;
    }
    l1_normalize(&mut hist);
    Ok(hist)
}

/// Concatenated per-patch LPQ histograms in row-major patch order; a 4x4
/// grid yields 4096 dimensions.
pub fn extract_lpq(grid: &PatchGrid) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(grid.patches().len() * LPQ_BINS);
    for patch in grid.patches() {
        values.extend_from_slice(&lpq_histogram(patch)?);
    }
    FeatureVector::new(values, "lpq-7")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::tile_patches;
    use rand::{Rng, SeedableRng};

    /// Independent oracle: the windowed DFT evaluated directly per pixel,
    /// O(pixels * window^2) complex accumulation in scan order.
    fn oracle_histogram(patch: &GrayImage) -> Vec<f64> {
        let a = 1.0 / 7.0;
        let freqs = [(a, 0.0), (0.0, a), (a, a), (a, -a)];
        let mut hist = vec![0.0f64; 256];
        let mut count = 0usize;
        for y in 3..patch.height() - 3 {
            for x in 3..patch.width() - 3 {
                let mut comps = [0.0f64; 8];
                for (fi, (ux, uy)) in freqs.iter().enumerate() {
                    let mut re = 0.0f64;
                    let mut im = 0.0f64;
                    for dy in -3i64..=3 {
                        for dx in -3i64..=3 {
                            let v = patch
                                .get((x as i64 + dx) as usize, (y as i64 + dy) as usize)
                                as f64;
                            let phase =
                                -2.0 * std::f64::consts::PI * (ux * dx as f64 + uy * dy as f64);
                            re += v * phase.cos();
                            im += v * phase.sin();
                        }
                    }
                    comps[2 * fi] = re;
                    comps[2 * fi + 1] = im;
                }
                let mut code = 0usize;
                for (k, v) in comps.iter().enumerate() {
                    if *v >= 0.0 {
                        code |= 1 << k;
                    }
                }
                hist[code] += 1.0;
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
    fn dims_are_4096_for_a_4x4_grid() {
        let img = random_patch(2, 256);
        let grid = tile_patches(&img, 4, 4).unwrap();
        assert_eq!(extract_lpq(&grid).unwrap().dims(), 4096);
    }

    #[test]
    fn constant_patch_yields_one_hot_histogram() {
        // Identical STFT response everywhere -> a single code.
        let patch = GrayImage::constant(64, 64, 0.37).unwrap();
        let hist = lpq_histogram(&patch).unwrap();
        let nonzero: Vec<usize> = hist
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero.len(), 1, "expected one-hot, got bins {nonzero:?}");
        assert_eq!(hist[nonzero[0]], 1.0);
    }

    #[test]
    fn matches_direct_windowed_dft_oracle() {
        for seed in 0..3 {
            let patch = random_patch(40 + seed, 64);
            let hist = lpq_histogram(&patch).unwrap();
            let oracle = oracle_histogram(&patch);
            for (bin, (a, b)) in hist.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() <= 1e-12, "seed {seed}, bin {bin}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn histogram_sums_to_one() {
        let patch = random_patch(5, 32);
        let hist = lpq_histogram(&patch).unwrap();
        let total: f64 = hist.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invariant_to_positive_affine_remap() {
        let patch = random_patch(9, 48);
        let remapped = GrayImage::from_fn(48, 48, |x, y| 0.15 + 0.7 * patch.get(x, y)).unwrap();
        let a = lpq_histogram(&patch).unwrap();
        let b = lpq_histogram(&remapped).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_patch_smaller_than_window() {
        let patch = GrayImage::constant(6, 6, 0.5).unwrap();
        assert!(lpq_histogram(&patch).is_err());
    }
}
