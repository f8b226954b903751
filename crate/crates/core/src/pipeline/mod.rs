//! End-to-end experiment orchestration: split, optional external
//! normalization, cached feature extraction, pair scoring, fusion, reports
//! and original-vs-normalized comparison. Two runs with the same config and
//! inputs produce byte-identical artifacts.

mod cache;
mod normalize;

pub use cache::{CachedFeature, FeatureCache};
pub use normalize::{normalize_batch, IDENTITY_NORMALIZER};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    generate_pairs, load_manifest, split_subjects, AttributeOfInterest, DataError, Manifest,
    PairList, SubjectOrdering, Variant,
};
use crate::features::{
    extract_hog_with, extract_lbp, extract_lpq, extract_mbtlbp, extract_sift_with, load_embedding,
    FeatureError, FeatureVector, HogParams, KeypointSet, SiftParams,
};
use crate::imaging::{tile_patches, GrayImage, ImagingError, IntensityMethod};
use crate::matching::{
    cosine_similarity, fuse_scores, sift_match_score, write_fused_csv, write_scores_csv,
    FusionConfig, MatchError, ScoreIoError, ScoreRecord,
};
use crate::metrics::{build_all_reports, MetricsError, VerificationReport};
use crate::plot::{write_histograms_svg, write_roc_svg};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {source}")]
    Data {
        stage: &'static str,
        source: DataError,
    },
    #[error("[{stage}] {source}")]
    Imaging {
        stage: &'static str,
        source: ImagingError,
    },
    #[error("[{stage}] {source}")]
    Feature {
        stage: &'static str,
        source: FeatureError,
    },
    #[error("[{stage}] {source}")]
    Match {
        stage: &'static str,
        source: MatchError,
    },
    #[error("[{stage}] {source}")]
    Metrics {
        stage: &'static str,
        source: MetricsError,
    },
    #[error("[{stage}] {source}")]
    ScoreIo {
        stage: &'static str,
        source: ScoreIoError,
    },
    #[error("[{stage}] {source}")]
    Io {
        stage: &'static str,
        source: std::io::Error,
    },
    #[error("[{stage}] {message}")]
    Contract { stage: &'static str, message: String },
}

impl PipelineError {
    pub(crate) fn contract(stage: &'static str, message: impl Into<String>) -> Self {
        Self::Contract {
            stage,
            message: message.into(),
        }
    }
}

/// Attaches the pipeline stage to a module error.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, PipelineError>;
}

macro_rules! impl_stage {
    ($err:ty, $variant:ident) => {
        impl<T> Stage<T> for Result<T, $err> {
            fn stage(self, stage: &'static str) -> Result<T, PipelineError> {
                self.map_err(|source| PipelineError::$variant { stage, source })
            }
        }
    };
}

impl_stage!(DataError, Data);
impl_stage!(ImagingError, Imaging);
impl_stage!(FeatureError, Feature);
impl_stage!(MatchError, Match);
impl_stage!(MetricsError, Metrics);
impl_stage!(ScoreIoError, ScoreIo);
impl_stage!(std::io::Error, Io);

/// Matcher roster of one evaluation run. Presets mirror the baselines a
/// verification study compares: two published handcrafted methods, the
/// four-descriptor fusion, and ingested deep embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// LBP + HOG + SIFT.
    Park,
    /// MB-TLBP only.
    Ahmed,
    /// LBP + LPQ + HOG + SIFT.
    ProposedFusion,
    /// Externally computed embeddings.
    Deep,
}

impl Preset {
    pub fn matcher_ids(&self) -> Vec<&'static str> {
        match self {
            Preset::Park => vec!["lbp", "hog", "sift"],
            Preset::Ahmed => vec!["mbtlbp"],
            Preset::ProposedFusion => vec!["lbp", "lpq", "hog", "sift"],
            Preset::Deep => vec!["deep"],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Park => "park",
            Preset::Ahmed => "ahmed",
            Preset::ProposedFusion => "proposed_fusion",
            Preset::Deep => "deep",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "park" => Ok(Preset::Park),
            "ahmed" => Ok(Preset::Ahmed),
            "proposed_fusion" => Ok(Preset::ProposedFusion),
            "deep" => Ok(Preset::Deep),
            other => Err(format!(
                "unknown preset {other:?}, expected park | ahmed | proposed_fusion | deep"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariantUnderTest {
    #[default]
    Original,
    Normalized,
    Both,
}

impl VariantUnderTest {
    fn variants(&self) -> Vec<Variant> {
        match self {
            VariantUnderTest::Original => vec![Variant::Original],
            VariantUnderTest::Normalized => vec![Variant::Normalized],
            VariantUnderTest::Both => vec![Variant::Original, Variant::Normalized],
        }
    }
}

fn default_split_fraction() -> f64 {
    0.5
}

fn default_sift_ratio() -> f64 {
    0.75
}

fn default_sift_max_keypoints() -> usize {
    300
}

fn default_mbtlbp_block() -> usize {
    3
}

fn default_work_size() -> usize {
    256
}

/// One experiment, JSON-serializable. CLI flags override file values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest_path: PathBuf,
    #[serde(default)]
    pub attribute: AttributeOfInterest,
    #[serde(default)]
    pub variant_under_test: VariantUnderTest,
    /// External normalizer command with `{in_dir}`/`{out_dir}` placeholders,
    /// or `"identity"` for the built-in byte-copy.
    #[serde(default)]
    pub normalizer_command: Option<String>,
    pub preset: Preset,
    /// Fusion weights over the preset's matchers; uniform when omitted.
    #[serde(default)]
    pub fusion_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub attribute_differing_only: bool,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default)]
    pub split_ordering: SubjectOrdering,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Directory of `<sample_id>.pemb` files for the deep preset.
    #[serde(default)]
    pub embeddings_dir: Option<PathBuf>,
    #[serde(default = "default_sift_ratio")]
    pub sift_ratio: f64,
    /// Strongest keypoints used per image at match time; 0 = no cap.
    #[serde(default = "default_sift_max_keypoints")]
    pub sift_max_keypoints: usize,
    #[serde(default = "default_mbtlbp_block")]
    pub mbtlbp_block: usize,
    /// Square side images are resized to before handcrafted extraction.
    #[serde(default = "default_work_size")]
    pub work_size: usize,
}

impl ExperimentConfig {
    pub fn load_json(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).stage("config")?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::contract("config", format!("{}: {e}", path.display())))
    }
}

/// All features of one sample relevant to the configured preset.
#[derive(Debug, Clone, Default)]
pub struct SampleFeatures {
    pub vectors: BTreeMap<String, FeatureVector>,
    pub keypoints: Option<KeypointSet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub computed: usize,
    pub cache_hits: usize,
}

fn fingerprint(cfg: &ExperimentConfig, matcher: &str) -> String {
    match matcher {
        "lbp" => format!("lbp:u2-8-1;grid=4x4;work={}", cfg.work_size),
        "lpq" => format!("lpq:m=7;grid=4x4;work={}", cfg.work_size),
        "hog" => format!("hog:368/8/2/9/0.2;work={}", cfg.work_size),
        "mbtlbp" => format!("mbtlbp:block={};work={}", cfg.mbtlbp_block, cfg.work_size),
        "sift" => format!("sift:s=3;sigma=1.6;c=0.03;e=10;work={}", cfg.work_size),
        other => other.to_string(),
    }
}

const EXTRACT_STAGE: &str = "extract";

fn extract_sample(
    m: &Manifest,
    sample_idx: usize,
    cfg: &ExperimentConfig,
    cache: &FeatureCache,
) -> Result<(String, SampleFeatures, ExtractStats), PipelineError> {
    let record = &m.samples()[sample_idx];
    let matchers = cfg.preset.matcher_ids();
    let mut features = SampleFeatures::default();
    let mut stats = ExtractStats::default();

    if cfg.preset == Preset::Deep {
        let dir = cfg.embeddings_dir.as_ref().ok_or_else(|| {
            PipelineError::contract(EXTRACT_STAGE, "deep preset requires embeddings_dir")
        })?;
        let path = dir.join(format!("{}.pemb", record.sample_id));
        let fv = load_embedding(&path).stage(EXTRACT_STAGE)?;
        features.vectors.insert("deep".to_string(), fv);
        stats.computed += 1;
        return Ok((record.sample_id.clone(), features, stats));
    }

    let image_path = m.resolve_image_path(record);
    let image_bytes = std::fs::read(&image_path).stage(EXTRACT_STAGE)?;
    let mut gray: Option<GrayImage> = None;
    // decoded lazily: full cache hits never touch the pixels
    let load_gray = |bytes: &[u8]| -> Result<GrayImage, PipelineError> {
        let img = image::load_from_memory(bytes).map_err(|e| {
            PipelineError::contract(
                EXTRACT_STAGE,
                format!("cannot decode {}: {e}", image_path.display()),
            )
        })?;
        let gray = GrayImage::from_rgb(&img.to_rgb8(), IntensityMethod::MaxChannel)
            .stage(EXTRACT_STAGE)?;
        gray.resize(cfg.work_size, cfg.work_size).stage(EXTRACT_STAGE)
    };

    for matcher in matchers {
        let fp = fingerprint(cfg, matcher);
        let extractor_id = match matcher {
            "lbp" => "lbp-u2-8-1".to_string(),
            "lpq" => "lpq-7".to_string(),
            "hog" => "hog-368".to_string(),
            "mbtlbp" => format!("mbtlbp-{0}x{0}", cfg.mbtlbp_block),
            "sift" => "sift".to_string(),
            other => other.to_string(),
        };
        let key = FeatureCache::key(&image_bytes, &extractor_id, &fp);
        if let Some(cached) = cache.load(&record.sample_id, &extractor_id, &key) {
            stats.cache_hits += 1;
            match cached {
                CachedFeature::Vector(fv) => {
                    features.vectors.insert(matcher.to_string(), fv);
                }
                CachedFeature::Keypoints(set) => features.keypoints = Some(set),
            }
            continue;
        }
        if gray.is_none() {
            gray = Some(load_gray(&image_bytes)?);
        }
        let img = gray.as_ref().expect("decoded above");
        let computed = match matcher {
            "lbp" => {
                let grid = tile_patches(img, 4, 4).stage(EXTRACT_STAGE)?;
                CachedFeature::Vector(extract_lbp(&grid).stage(EXTRACT_STAGE)?)
            }
            "lpq" => {
                let grid = tile_patches(img, 4, 4).stage(EXTRACT_STAGE)?;
                CachedFeature::Vector(extract_lpq(&grid).stage(EXTRACT_STAGE)?)
            }
            "hog" => CachedFeature::Vector(
                extract_hog_with(img, &HogParams::default()).stage(EXTRACT_STAGE)?,
            ),
            "mbtlbp" => CachedFeature::Vector(
                extract_mbtlbp(img, cfg.mbtlbp_block).stage(EXTRACT_STAGE)?,
            ),
            "sift" => CachedFeature::Keypoints(
                extract_sift_with(img, &SiftParams::default()).stage(EXTRACT_STAGE)?,
            ),
            other => {
                return Err(PipelineError::contract(
                    EXTRACT_STAGE,
                    format!("unknown matcher {other:?}"),
                ))
            }
        };
        stats.computed += 1;
        cache
            .store(&record.sample_id, &extractor_id, &key, &computed)
            .stage(EXTRACT_STAGE)?;
        match computed {
            CachedFeature::Vector(fv) => {
                features.vectors.insert(matcher.to_string(), fv);
            }
            CachedFeature::Keypoints(set) => features.keypoints = Some(set),
        }
    }
    Ok((record.sample_id.clone(), features, stats))
}

/// Runs the preset's extractors over every sample, consulting the cache.
/// Returns per-sample features plus hit/miss statistics.
pub fn extract_all(
    m: &Manifest,
    cfg: &ExperimentConfig,
    cache_dir: &Path,
) -> Result<(BTreeMap<String, SampleFeatures>, ExtractStats), PipelineError> {
    let cache = FeatureCache::open(cache_dir).stage(EXTRACT_STAGE)?;
    let results: Result<Vec<_>, PipelineError> = (0..m.len())
        .into_par_iter()
        .map(|i| extract_sample(m, i, cfg, &cache))
        .collect();
    let mut features = BTreeMap::new();
    let mut stats = ExtractStats::default();
    for (sample_id, f, s) in results? {
        stats.computed += s.computed;
        stats.cache_hits += s.cache_hits;
        features.insert(sample_id, f);
    }
    Ok((features, stats))
}

const MATCH_STAGE: &str = "match";

/// Scores every pair under every matcher of the preset. Comparisons against
/// a degenerate feature (zero-norm vector, empty keypoint set) score 0
/// instead of failing: featureless inputs carry no match evidence.
pub fn score_pairs(
    features: &BTreeMap<String, SampleFeatures>,
    pairs: &PairList,
    cfg: &ExperimentConfig,
) -> Result<Vec<ScoreRecord>, PipelineError> {
    let matchers = cfg.preset.matcher_ids();
    // cap keypoint rosters once, not per pair
    let capped: BTreeMap<&str, KeypointSet> = if matchers.contains(&"sift") {
        features
            .iter()
            .map(|(id, f)| {
                let set = f.keypoints.clone().unwrap_or_default();
                let set = if cfg.sift_max_keypoints > 0 {
                    set.top_by_response(cfg.sift_max_keypoints)
                } else {
                    set
                };
                (id.as_str(), set)
            })
            .collect()
    } else {
        BTreeMap::new()
    };

    let lookup = |id: &str| {
        features.get(id).ok_or_else(|| {
            PipelineError::contract(MATCH_STAGE, format!("no features extracted for sample {id:?}"))
        })
    };

    (0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let pair = pairs.get(i);
            let fa = lookup(pair.sample_id_a)?;
            let fb = lookup(pair.sample_id_b)?;
            let mut record = ScoreRecord::new(pair.sample_id_a, pair.sample_id_b, pair.label);
            for matcher in &matchers {
                let score = if *matcher == "sift" {
                    let a = &capped[pair.sample_id_a];
                    let b = &capped[pair.sample_id_b];
                    sift_match_score(a, b, cfg.sift_ratio).stage(MATCH_STAGE)?
                } else {
                    let a = fa.vectors.get(*matcher).ok_or_else(|| {
                        PipelineError::contract(
                            MATCH_STAGE,
                            format!("sample {:?} lacks {matcher} features", pair.sample_id_a),
                        )
                    })?;
                    let b = fb.vectors.get(*matcher).ok_or_else(|| {
                        PipelineError::contract(
                            MATCH_STAGE,
                            format!("sample {:?} lacks {matcher} features", pair.sample_id_b),
                        )
                    })?;
                    match cosine_similarity(a, b) {
                        Ok(s) => s,
                        Err(MatchError::ZeroNorm { .. }) => 0.0,
                        Err(e) => return Err(PipelineError::Match {
                            stage: MATCH_STAGE,
                            source: e,
                        }),
                    }
                };
                record.matcher_scores.insert(matcher.to_string(), score);
            }
            Ok(record)
        })
        .collect()
}

/// Relative change of decidability and AUC between two reports of the same
/// matcher. `gain_percent` fields truncate toward zero, matching how such
/// gains are conventionally quoted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub matcher_id: String,
    pub variant_a: Variant,
    pub variant_b: Variant,
    pub auc_a: f64,
    pub auc_b: f64,
    pub auc_abs_delta: f64,
    pub auc_rel_delta: Option<f64>,
    pub auc_gain_percent: Option<i64>,
    pub decidability_a: Option<f64>,
    pub decidability_b: Option<f64>,
    pub decidability_abs_delta: Option<f64>,
    pub decidability_rel_delta: Option<f64>,
    pub decidability_gain_percent: Option<i64>,
}

fn rel_delta(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| b / a - 1.0)
}

fn gain_percent(rel: Option<f64>) -> Option<i64> {
    rel.map(|r| {
        let v = r * 100.0;
        let nearest = v.round();
        // snap float noise at integer boundaries, otherwise truncate toward
        // zero (a 28.6% ratio gain is quoted as +28%)
        if (v - nearest).abs() < 1e-9 {
            nearest as i64
        } else {
            v.trunc() as i64
        }
    })
}

/// Compares variant `b` against baseline `a` for one matcher.
pub fn compare_reports(
    a: &VerificationReport,
    b: &VerificationReport,
) -> Result<ComparisonSummary, PipelineError> {
    if a.matcher_id != b.matcher_id {
        return Err(PipelineError::contract(
            "compare",
            format!(
                "matcher mismatch: {:?} vs {:?}",
                a.matcher_id, b.matcher_id
            ),
        ));
    }
    let auc_rel = rel_delta(a.auc, b.auc);
    let dec = match (a.decidability, b.decidability) {
        (Some(da), Some(db)) => Some((da, db)),
        _ => None,
    };
    Ok(ComparisonSummary {
        matcher_id: a.matcher_id.clone(),
        variant_a: a.variant,
        variant_b: b.variant,
        auc_a: a.auc,
        auc_b: b.auc,
        auc_abs_delta: b.auc - a.auc,
        auc_rel_delta: auc_rel,
        auc_gain_percent: gain_percent(auc_rel),
        decidability_a: a.decidability,
        decidability_b: b.decidability,
        decidability_abs_delta: dec.map(|(da, db)| db - da),
        decidability_rel_delta: dec.and_then(|(da, db)| rel_delta(da, db)),
        decidability_gain_percent: gain_percent(dec.and_then(|(da, db)| rel_delta(da, db))),
    })
}

/// Mean and sample stddev of repeated-run metrics, for baselines evaluated
/// over several embedding sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSetSummary {
    pub matcher_id: String,
    pub n_runs_a: usize,
    pub n_runs_b: usize,
    pub auc_mean_a: f64,
    pub auc_stddev_a: f64,
    pub auc_mean_b: f64,
    pub auc_stddev_b: f64,
    pub decidability_mean_a: Option<f64>,
    pub decidability_stddev_a: Option<f64>,
    pub decidability_mean_b: Option<f64>,
    pub decidability_stddev_b: Option<f64>,
    pub auc_gain_percent: Option<i64>,
    pub decidability_gain_percent: Option<i64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt())
}

pub fn compare_report_sets(
    a: &[VerificationReport],
    b: &[VerificationReport],
) -> Result<ComparisonSetSummary, PipelineError> {
    let first = a.first().or(b.first()).ok_or_else(|| {
        PipelineError::contract("compare", "no reports to compare")
    })?;
    let matcher_id = first.matcher_id.clone();
    for r in a.iter().chain(b) {
        if r.matcher_id != matcher_id {
            return Err(PipelineError::contract(
                "compare",
                format!("matcher mismatch: {:?} vs {:?}", matcher_id, r.matcher_id),
            ));
        }
    }
    let aucs_a: Vec<f64> = a.iter().map(|r| r.auc).collect();
    let aucs_b: Vec<f64> = b.iter().map(|r| r.auc).collect();
    let decs_a: Vec<f64> = a.iter().filter_map(|r| r.decidability).collect();
    let decs_b: Vec<f64> = b.iter().filter_map(|r| r.decidability).collect();
    let (auc_mean_a, auc_stddev_a) = mean_std(&aucs_a);
    let (auc_mean_b, auc_stddev_b) = mean_std(&aucs_b);
    let dec_a = (!decs_a.is_empty()).then(|| mean_std(&decs_a));
    let dec_b = (!decs_b.is_empty()).then(|| mean_std(&decs_b));
    let dec_rel = match (dec_a, dec_b) {
        (Some((ma, _)), Some((mb, _))) => rel_delta(ma, mb),
        _ => None,
    };
    Ok(ComparisonSetSummary {
        matcher_id,
        n_runs_a: a.len(),
        n_runs_b: b.len(),
        auc_mean_a,
        auc_stddev_a,
        auc_mean_b,
        auc_stddev_b,
        decidability_mean_a: dec_a.map(|(m, _)| m),
        decidability_stddev_a: dec_a.map(|(_, s)| s),
        decidability_mean_b: dec_b.map(|(m, _)| m),
        decidability_stddev_b: dec_b.map(|(_, s)| s),
        auc_gain_percent: gain_percent(rel_delta(auc_mean_a, auc_mean_b)),
        decidability_gain_percent: gain_percent(dec_rel),
    })
}

/// Paths and in-memory results of one experiment run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub pair_list_path: PathBuf,
    pub genuine_pairs: usize,
    pub impostor_pairs: usize,
    pub score_paths: BTreeMap<Variant, PathBuf>,
    pub fused_paths: BTreeMap<Variant, PathBuf>,
    pub report_paths: BTreeMap<(String, Variant), PathBuf>,
    pub reports: BTreeMap<(String, Variant), VerificationReport>,
    pub comparisons: BTreeMap<String, ComparisonSummary>,
    pub extract_stats: BTreeMap<Variant, ExtractStats>,
    pub summary_path: PathBuf,
}

/// Executes split -> (optional) normalize -> extract -> pairs -> match ->
/// fuse -> report for each requested variant, writing every artifact under
/// `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, PipelineError> {
    std::fs::create_dir_all(&cfg.out_dir).stage("setup")?;
    let manifest = load_manifest(&cfg.manifest_path, cfg.attribute).stage("manifest")?;
    let (_train, eval) =
        split_subjects(&manifest, cfg.split_fraction, cfg.split_ordering).stage("split")?;

    let pairs = generate_pairs(&eval, cfg.attribute_differing_only).stage("pairs")?;
    let pair_list_path = cfg.out_dir.join("pairs.csv");
    pairs.save_csv(&pair_list_path).stage("pairs")?;

    let fusion = match &cfg.fusion_weights {
        Some(weights) => FusionConfig::new(
            cfg.preset.matcher_ids().iter().map(|s| s.to_string()).collect(),
            weights.clone(),
        )
        .stage("fuse")?,
        None => FusionConfig::uniform(
            cfg.preset.matcher_ids().iter().map(|s| s.to_string()).collect(),
        )
        .stage("fuse")?,
    };

    let mut artifacts = RunArtifacts {
        out_dir: cfg.out_dir.clone(),
        pair_list_path,
        genuine_pairs: pairs.genuine_count(),
        impostor_pairs: pairs.impostor_count(),
        score_paths: BTreeMap::new(),
        fused_paths: BTreeMap::new(),
        report_paths: BTreeMap::new(),
        reports: BTreeMap::new(),
        comparisons: BTreeMap::new(),
        extract_stats: BTreeMap::new(),
        summary_path: cfg.out_dir.join("run-summary.json"),
    };

    for variant in cfg.variant_under_test.variants() {
        let variant_manifest = match variant {
            Variant::Original => eval.clone(),
            Variant::Normalized => {
                let command = cfg.normalizer_command.as_deref().ok_or_else(|| {
                    PipelineError::contract(
                        "normalize",
                        "variant_under_test includes normalized but no normalizer_command is set",
                    )
                })?;
                normalize_batch(&eval, command, &cfg.out_dir.join("normalized"))?
            }
        };
        let (features, stats) = extract_all(&variant_manifest, cfg, &cfg.cache_dir)?;
        artifacts.extract_stats.insert(variant, stats);

        let records = score_pairs(&features, &pairs, cfg)?;
        let score_path = cfg.out_dir.join(format!("scores-{variant}.csv"));
        write_scores_csv(&records, &score_path).stage(MATCH_STAGE)?;
        artifacts.score_paths.insert(variant, score_path);

        let fused = fuse_scores(&records, &fusion).stage("fuse")?;
        let fused_path = cfg.out_dir.join(format!("fused-{variant}.csv"));
        write_fused_csv(&fused, &fused_path).stage("fuse")?;
        artifacts.fused_paths.insert(variant, fused_path);

        let reports = build_all_reports(&fused, variant).stage("report")?;
        for (matcher_id, report) in reports {
            let base = format!("{matcher_id}-{variant}");
            let report_path = cfg.out_dir.join(format!("report-{base}.json"));
            report.save_json(&report_path).stage("report")?;
            report
                .save_roc_csv(&cfg.out_dir.join(format!("roc-{base}.csv")))
                .stage("report")?;
            write_roc_svg(&report, &cfg.out_dir.join(format!("roc-{base}.svg")))
                .stage("report")?;
            let (genuine, impostor) = split_scores(&fused, &matcher_id);
            write_histograms_svg(
                &genuine,
                &impostor,
                &format!("{matcher_id} ({variant}) scores"),
                &cfg.out_dir.join(format!("hist-{base}.svg")),
            )
            .stage("report")?;
            artifacts
                .report_paths
                .insert((matcher_id.clone(), variant), report_path);
            artifacts.reports.insert((matcher_id, variant), report);
        }
    }

    if cfg.variant_under_test == VariantUnderTest::Both {
        let matcher_ids: Vec<String> = artifacts
            .reports
            .keys()
            .map(|(m, _)| m.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for matcher_id in matcher_ids {
            let original = &artifacts.reports[&(matcher_id.clone(), Variant::Original)];
            let normalized = &artifacts.reports[&(matcher_id.clone(), Variant::Normalized)];
            let summary = compare_reports(original, normalized)?;
            let path = cfg.out_dir.join(format!("comparison-{matcher_id}.json"));
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&summary).expect("summary serializes"),
            )
            .stage("compare")?;
            artifacts.comparisons.insert(matcher_id, summary);
        }
    }

    let summary = serde_json::json!({
        "config": cfg,
        "pairs": {
            "genuine": artifacts.genuine_pairs,
            "impostor": artifacts.impostor_pairs,
            "path": artifacts.pair_list_path,
        },
        "reports": artifacts.report_paths.iter()
            .map(|((m, v), p)| serde_json::json!({"matcher": m, "variant": v, "path": p}))
            .collect::<Vec<_>>(),
    });
    std::fs::write(
        &artifacts.summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .stage("summary")?;
    Ok(artifacts)
}

fn split_scores(records: &[ScoreRecord], matcher_id: &str) -> (Vec<f64>, Vec<f64>) {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for r in records {
        let score = if matcher_id == "fused" {
            r.fused_score
        } else {
            r.matcher_scores.get(matcher_id).copied()
        };
        if let Some(s) = score {
            match r.label {
                crate::data::PairLabel::Genuine => genuine.push(s),
                crate::data::PairLabel::Impostor => impostor.push(s),
            }
        }
    }
    (genuine, impostor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RocPoint;

    fn report(matcher: &str, variant: Variant, auc: f64, dec: Option<f64>) -> VerificationReport {
        VerificationReport {
            matcher_id: matcher.to_string(),
            variant,
            auc,
            decidability: dec,
            infinite_separation: false,
            eer: 0.1,
            n_genuine: 10,
            n_impostor: 20,
            genuine_mean: 0.8,
            genuine_stddev: 0.05,
            impostor_mean: 0.2,
            impostor_stddev: 0.05,
            roc: vec![
                RocPoint { threshold: None, far: 0.0, tar: 0.0 },
                RocPoint { threshold: Some(0.5), far: 1.0, tar: 1.0 },
            ],
        }
    }

    #[test]
    fn comparison_reports_published_decidability_gains() {
        let a = report("park", Variant::Original, 0.788, Some(1.1093));
        let b = report("park", Variant::Normalized, 0.852, Some(1.4261));
        let summary = compare_reports(&a, &b).unwrap();
        assert_eq!(summary.decidability_gain_percent, Some(28));

        let a = report("fused", Variant::Original, 0.759, Some(0.9206));
        let b = report("fused", Variant::Normalized, 0.872, Some(1.5764));
        let summary = compare_reports(&a, &b).unwrap();
        assert_eq!(summary.decidability_gain_percent, Some(71));
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let a = report("lbp", Variant::Original, 0.9, Some(1.5));
        let summary = compare_reports(&a, &a).unwrap();
        assert_eq!(summary.auc_abs_delta, 0.0);
        assert_eq!(summary.auc_rel_delta, Some(0.0));
        assert_eq!(summary.decidability_abs_delta, Some(0.0));
        assert_eq!(summary.decidability_gain_percent, Some(0));
    }

    #[test]
    fn comparison_rejects_matcher_mismatch() {
        let a = report("lbp", Variant::Original, 0.9, Some(1.5));
        let b = report("hog", Variant::Normalized, 0.9, Some(1.5));
        assert!(compare_reports(&a, &b).is_err());
    }

    #[test]
    fn comparison_set_reports_mean_and_std() {
        let a: Vec<_> = [0.85, 0.86, 0.87]
            .iter()
            .map(|&auc| report("deep", Variant::Original, auc, Some(1.5)))
            .collect();
        let b: Vec<_> = [0.88, 0.90]
            .iter()
            .map(|&auc| report("deep", Variant::Normalized, auc, Some(1.8)))
            .collect();
        let s = compare_report_sets(&a, &b).unwrap();
        assert_eq!(s.n_runs_a, 3);
        assert!((s.auc_mean_a - 0.86).abs() < 1e-12);
        assert!((s.auc_mean_b - 0.89).abs() < 1e-12);
        assert_eq!(s.decidability_gain_percent, Some(20));
    }

    #[test]
    fn preset_rosters() {
        assert_eq!(Preset::Park.matcher_ids(), vec!["lbp", "hog", "sift"]);
        assert_eq!(Preset::Ahmed.matcher_ids(), vec!["mbtlbp"]);
        assert_eq!(
            Preset::ProposedFusion.matcher_ids(),
            vec!["lbp", "lpq", "hog", "sift"]
        );
        assert_eq!(Preset::Deep.matcher_ids(), vec!["deep"]);
        assert_eq!("proposed_fusion".parse::<Preset>().unwrap(), Preset::ProposedFusion);
        assert!("nope".parse::<Preset>().is_err());
    }
}
