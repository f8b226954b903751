//! Seeded synthetic datasets for tests, benchmarks and demos.
//!
//! Each class gets a base texture (a coarse random field upsampled
//! bilinearly, so it has smooth blobs and usable gradients); samples of the
//! class are the base plus per-sample Gaussian noise. Genuine pairs are
//! therefore noisy copies of one texture, impostor pairs are independent
//! textures.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{AttributeOfInterest, DataError, Eye, Gaze, Manifest, SampleRecord, Variant};
use crate::imaging::GrayImage;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    /// Square image side in pixels.
    pub image_size: usize,
    /// Coarse grid side the base texture is sampled on before upsampling.
    pub texture_grid: usize,
    /// Standard deviation of the per-sample additive noise.
    pub noise_sigma: f64,
    /// Classes at the end of the roster rendered as constant images
    /// (featureless: no gradients, no keypoints).
    pub constant_classes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            samples_per_class: 6,
            image_size: 256,
            texture_grid: 16,
            noise_sigma: 0.05,
            constant_classes: 0,
            seed: 7,
        }
    }
}

fn base_texture(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> GrayImage {
    let g = spec.texture_grid;
    let coarse = GrayImage::from_fn(g, g, |_, _| rng.gen_range(0.15..0.85)).unwrap();
    coarse.resize(spec.image_size, spec.image_size).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Writes PNGs under `dir` and returns the manifest describing them. Sample
/// attributes alternate the eyeglasses flag within each class so the
/// attribute-differing filter keeps within-class pairs.
pub fn generate_dataset(spec: &SyntheticSpec, dir: &Path) -> Result<Manifest, DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for class in 0..spec.classes {
        let mut class_rng =
            ChaCha8Rng::seed_from_u64(spec.seed ^ (class as u64).wrapping_mul(0x9E37_79B9));
        let constant = class >= spec.classes - spec.constant_classes;
        let base = if constant {
            GrayImage::constant(spec.image_size, spec.image_size, 0.5).unwrap()
        } else {
            base_texture(&mut class_rng, spec)
        };
        for sample in 0..spec.samples_per_class {
            let image = if constant {
                base.clone()
            } else {
                let mut noise_rng = ChaCha8Rng::seed_from_u64(
                    spec.seed
                        .wrapping_add((class as u64) << 20)
                        .wrapping_add(sample as u64 + 1),
                );
                GrayImage::from_fn(spec.image_size, spec.image_size, |x, y| {
                    (base.get(x, y) as f64 + spec.noise_sigma * gaussian(&mut noise_rng)) as f32
                })
                .unwrap()
            };
            let subject = format!("s{class:03}");
            let sample_id = format!("{subject}_L_{sample}");
            let file = format!("{sample_id}.png");
            image
                .save_png(&dir.join(&file))
                .map_err(|e| DataError::Io {
                    path: dir.join(&file).display().to_string(),
                    source: std::io::Error::other(e),
                })?;
            records.push(SampleRecord {
                sample_id,
                subject_id: subject,
                eye: Eye::Left,
                session: (sample % 3) as u32 + 1,
                eyeglasses: sample % 2 == 1,
                gaze: Gaze::Frontal,
                image_path: file.into(),
                variant: Variant::Original,
                iris_box: None,
            });
        }
    }
    Manifest::from_records("synthetic", AttributeOfInterest::Eyeglasses, records, dir)
}

/// Convenience for metric-scale tests: two seeded Gaussian score clouds.
pub fn gaussian_scores(
    n_genuine: usize,
    n_impostor: usize,
    separation: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genuine = (0..n_genuine)
        .map(|_| separation + 0.5 * gaussian(&mut rng))
        .collect();
    let impostor = (0..n_impostor).map(|_| 0.5 * gaussian(&mut rng)).collect();
    (genuine, impostor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_deterministic_and_complete() {
        let spec = SyntheticSpec {
            classes: 3,
            samples_per_class: 2,
            image_size: 64,
            ..Default::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let m_a = generate_dataset(&spec, dir_a.path()).unwrap();
        let m_b = generate_dataset(&spec, dir_b.path()).unwrap();
        assert_eq!(m_a.len(), 6);
        m_a.verify_paths().unwrap();
        for (a, b) in m_a.samples().iter().zip(m_b.samples()) {
            let img_a = std::fs::read(m_a.resolve_image_path(a)).unwrap();
            let img_b = std::fs::read(m_b.resolve_image_path(b)).unwrap();
            assert_eq!(img_a, img_b, "sample {} differs between runs", a.sample_id);
        }
    }

    #[test]
    fn constant_classes_render_flat() {
        let spec = SyntheticSpec {
            classes: 2,
            samples_per_class: 1,
            image_size: 48,
            constant_classes: 1,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&spec, dir.path()).unwrap();
        let constant = m.samples().last().unwrap();
        let img = GrayImage::load(
            &m.resolve_image_path(constant),
            crate::imaging::IntensityMethod::MaxChannel,
        )
        .unwrap();
        let first = img.get(0, 0);
        assert!(img.pixels().iter().all(|&v| v == first));
    }
}
