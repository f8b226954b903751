//! Feature representations: uniform LBP, LPQ, HOG, SIFT keypoint descriptors,
//! MB-TLBP, and ingestion of externally computed embeddings.
//!
//! Extractors are pure functions of their pixel input; identical inputs yield
//! byte-identical outputs. Histogram-based descriptors are L1-normalized per
//! patch, HOG blocks and SIFT descriptors L2-normalized with 0.2 clipping.

mod embedding;
mod hog;
mod lbp;
mod lpq;
mod mbtlbp;
mod sift;

pub use embedding::{load_embedding, write_embedding, EMBEDDING_MAGIC};
pub use hog::{extract_hog, extract_hog_with, HogParams};
pub use lbp::{extract_lbp, lbp_code, lbp_histogram, uniform_bin, LBP_BINS};
pub use lpq::{extract_lpq, lpq_codes, lpq_histogram, LPQ_BINS, LPQ_WINDOW};
pub use mbtlbp::{extract_mbtlbp, transitional_code, MBTLBP_REGIONS};
pub use sift::{extract_sift, extract_sift_with, SiftParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("patch {width}x{height} is below the {min}x{min} minimum for {extractor}")]
    PatchTooSmall {
        width: usize,
        height: usize,
        min: usize,
        extractor: &'static str,
    },
    #[error("image {width}x{height} is below the minimum {min_w}x{min_h} for {extractor}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_w: usize,
        min_h: usize,
        extractor: &'static str,
    },
    #[error("{extractor} requires a square input, got {width}x{height}")]
    NotSquare {
        width: usize,
        height: usize,
        extractor: &'static str,
    },
    #[error("feature value {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("cannot read embedding {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("embedding {path}: bad magic bytes")]
    BadMagic { path: String },
    #[error("embedding {path}: unsupported version {version}")]
    UnsupportedVersion { path: String, version: u8 },
    #[error("embedding {path}: header declares {declared} values, file holds {actual}")]
    DimMismatch {
        path: String,
        declared: usize,
        actual: usize,
    },
    #[error("embedding {path}: value {index} is not finite")]
    NonFinite { path: String, index: usize },
    #[error("embedding {path}: vector has zero norm")]
    ZeroNorm { path: String },
    #[error("imaging: {0}")]
    Imaging(#[from] crate::imaging::ImagingError),
}

/// Dense descriptor vector tagged with the extractor that produced it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub extractor_id: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, extractor_id: impl Into<String>) -> Result<Self, FeatureError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue { index });
        }
        Ok(Self {
            values,
            extractor_id: extractor_id.into(),
        })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One localized SIFT keypoint with its 128-dimensional descriptor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
    /// Contrast magnitude at the refined extremum; used to rank keypoints.
    pub response: f64,
    pub descriptor: Vec<f64>,
}

/// The keypoints detected in one image. May be empty (featureless input).
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct KeypointSet {
    pub keypoints: Vec<Keypoint>,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// The `n` strongest keypoints by response, ties broken by (y, x, scale)
    /// so the subset is deterministic.
    pub fn top_by_response(&self, n: usize) -> KeypointSet {
        if self.len() <= n {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| {
            let a = &self.keypoints[i];
            let b = &self.keypoints[j];
            b.response
                .partial_cmp(&a.response)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal))
                .then(
                    a.scale
                        .partial_cmp(&b.scale)
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
        });
        KeypointSet {
            keypoints: order[..n].iter().map(|&i| self.keypoints[i].clone()).collect(),
        }
    }
}

/// L1-normalizes a histogram in place; all-zero histograms are left alone.
pub(crate) fn l1_normalize(hist: &mut [f64]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for v in hist.iter_mut() {
            *v /= total;
        }
    }
}
