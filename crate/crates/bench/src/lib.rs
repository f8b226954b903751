//! Shared fixtures for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use periocular_core::imaging::GrayImage;

/// Textured image: coarse random field upsampled so gradients and keypoints
/// resemble a real crop rather than white noise.
pub fn textured_image(side: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = GrayImage::from_fn(16, 16, |_, _| rng.gen_range(0.1..0.9)).unwrap();
    coarse.resize(side, side).unwrap()
}

/// Two Gaussian score clouds of the given sizes.
pub fn score_clouds(n_genuine: usize, n_impostor: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    periocular_core::synthetic::gaussian_scores(n_genuine, n_impostor, 1.5, seed)
}
