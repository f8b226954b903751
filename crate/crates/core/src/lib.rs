//! Periocular verification evaluation toolkit.
//!
//! The crate covers the full desk-scale evaluation loop for periocular
//! biometrics: manifest ingestion and subject-disjoint splits, all-against-all
//! comparison pair generation, pixel-level preprocessing, handcrafted texture
//! descriptors (uniform LBP, LPQ, HOG, SIFT keypoints, MB-TLBP) plus ingestion
//! of externally computed embeddings, cosine and ratio-test matching with
//! score-level fusion, and verification metrics (decidability, AUC, EER, ROC).
//!
//! [`pipeline`] ties the stages together behind a reproducible experiment
//! runner with a feature cache and an out-of-process image-normalizer
//! contract; `periocular-cli` exposes each stage as a subcommand.

pub mod data;
pub mod features;
pub mod imaging;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod synthetic;

pub use data::{AttributeOfInterest, Manifest, PairLabel, PairList, SampleRecord, Variant};
pub use features::{FeatureVector, Keypoint, KeypointSet};
pub use imaging::{GrayImage, PatchGrid};
pub use matching::{FusionConfig, ScoreRecord};
pub use metrics::{ScoreSet, VerificationReport};
pub use pipeline::{ComparisonSummary, ExperimentConfig, Preset, RunArtifacts};
