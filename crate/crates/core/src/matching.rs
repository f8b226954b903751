//! Pairwise similarity scoring and score-level fusion.
//!
//! All scores live in similarity orientation (higher = more alike). Cosine
//! similarity compares dense feature vectors; SIFT keypoint sets are scored
//! by Lowe's ratio test with the accepted-match count normalized by the
//! smaller set. Fusion min-max normalizes each matcher's score column over
//! the full comparison list and then takes a weighted sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PairLabel;
use crate::features::{FeatureVector, KeypointSet};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("dimension mismatch: {a} ({a_dims} dims) vs {b} ({b_dims} dims)")]
    DimMismatch {
        a: String,
        a_dims: usize,
        b: String,
        b_dims: usize,
    },
    #[error("cosine similarity is undefined for a zero-norm vector ({extractor_id})")]
    ZeroNorm { extractor_id: String },
    #[error("ratio {0} must lie strictly inside (0, 1)")]
    InvalidRatio(f64),
    #[error("min-max normalization needs at least 2 scores, got {0}")]
    TooFewScores(usize),
    #[error("fusion weights {0:?} are invalid: {1}")]
    InvalidWeights(Vec<f64>, String),
    #[error("pair ({a}, {b}) is missing a score for matcher {matcher_id:?}")]
    MissingMatcherScore {
        a: String,
        b: String,
        matcher_id: String,
    },
}

/// Cosine similarity in [-1, 1]; errors on dimension mismatch or zero norm.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64, MatchError> {
    if a.dims() != b.dims() {
        return Err(MatchError::DimMismatch {
            a: a.extractor_id.clone(),
            a_dims: a.dims(),
            b: b.extractor_id.clone(),
            b_dims: b.dims(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 {
        return Err(MatchError::ZeroNorm {
            extractor_id: a.extractor_id.clone(),
        });
    }
    if nb == 0.0 {
        return Err(MatchError::ZeroNorm {
            extractor_id: b.extractor_id.clone(),
        });
    }
    // sqrt(na * nb) keeps self-similarity exactly 1
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Squared Euclidean distance with early exit once `bound` is exceeded.
fn sq_distance(a: &[f64], b: &[f64], bound: f64) -> f64 {
    let mut acc = 0.0f64;
    for (chunk_a, chunk_b) in a.chunks(16).zip(b.chunks(16)) {
        for (x, y) in chunk_a.iter().zip(chunk_b) {
            let d = x - y;
            acc += d * d;
        }
        if acc > bound {
            return acc;
        }
    }
    acc
}

/// Lowe ratio-test match score between two keypoint sets: the fraction of
/// keypoints in `a` whose nearest descriptor in `b` is closer than `ratio`
/// times the second nearest, normalized by the smaller set size and clamped
/// to [0, 1]. Either set empty scores 0. With a single candidate in `b` the
/// second-nearest distance is taken as infinite, so the nearest always
/// passes.
pub fn sift_match_score(a: &KeypointSet, b: &KeypointSet, ratio: f64) -> Result<f64, MatchError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(MatchError::InvalidRatio(ratio));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let mut matches = 0usize;
    for kp in &a.keypoints {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for other in &b.keypoints {
            let d = sq_distance(&kp.descriptor, &other.descriptor, second);
            if d < best {
                second = best;
                best = d;
            } else if d < second {
                second = d;
            }
        }
        // ratio test on true distances: d1 < ratio * d2
        if best.sqrt() < ratio * second.sqrt() {
            matches += 1;
        }
    }
    let denom = a.len().min(b.len()) as f64;
    Ok((matches as f64 / denom).clamp(0.0, 1.0))
}

/// Symmetrized variant: the average of both match directions.
pub fn sift_match_score_symmetric(
    a: &KeypointSet,
    b: &KeypointSet,
    ratio: f64,
) -> Result<f64, MatchError> {
    Ok((sift_match_score(a, b, ratio)? + sift_match_score(b, a, ratio)?) / 2.0)
}

/// Affine map sending min to 0 and max to 1; constant lists map to all 0.5.
pub fn minmax_normalize(scores: &[f64]) -> Result<Vec<f64>, MatchError> {
    if scores.len() < 2 {
        return Err(MatchError::TooFewScores(scores.len()));
    }
    Ok(minmax_column(scores))
}

fn minmax_column(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let span = max - min;
        scores.iter().map(|s| (s - min) / span).collect()
    } else {
        // a constant matcher is uninformative; park it mid-range
        vec![0.5; scores.len()]
    }
}

/// One labeled comparison with per-matcher scores and the optional fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id_a: String,
    pub sample_id_b: String,
    pub label: PairLabel,
    pub matcher_scores: BTreeMap<String, f64>,
    pub fused_score: Option<f64>,
}

impl ScoreRecord {
    pub fn new(
        sample_id_a: impl Into<String>,
        sample_id_b: impl Into<String>,
        label: PairLabel,
    ) -> Self {
        Self {
            sample_id_a: sample_id_a.into(),
            sample_id_b: sample_id_b.into(),
            label,
            matcher_scores: BTreeMap::new(),
            fused_score: None,
        }
    }

    pub fn with_score(mut self, matcher_id: impl Into<String>, score: f64) -> Self {
        self.matcher_scores.insert(matcher_id.into(), score);
        self
    }
}

/// Which matchers participate in fusion and with what weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub matcher_ids: Vec<String>,
    pub weights: Vec<f64>,
}

impl FusionConfig {
    pub fn new(matcher_ids: Vec<String>, weights: Vec<f64>) -> Result<Self, MatchError> {
        if matcher_ids.len() != weights.len() {
            return Err(MatchError::InvalidWeights(
                weights,
                format!("expected {} weights", matcher_ids.len()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MatchError::InvalidWeights(
                weights,
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MatchError::InvalidWeights(
                weights,
                format!("weights sum to {total}, expected 1"),
            ));
        }
        Ok(Self {
            matcher_ids,
            weights,
        })
    }

    /// Equal weights over the given matchers.
    pub fn uniform(matcher_ids: Vec<String>) -> Result<Self, MatchError> {
        let n = matcher_ids.len().max(1);
        // distribute the remainder so the weights sum to exactly 1
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        let partial: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - partial;
        Self::new(matcher_ids, weights)
    }
}

/// Min-max normalizes every matcher column over the whole record list, then
/// writes `fused = sum_i w_i * normalized_i` into each record. Record order
/// is preserved; every record must carry every configured matcher.
pub fn fuse_scores(
    records: &[ScoreRecord],
    cfg: &FusionConfig,
) -> Result<Vec<ScoreRecord>, MatchError> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cfg.matcher_ids.len());
    for matcher_id in &cfg.matcher_ids {
        let mut column = Vec::with_capacity(records.len());
        for r in records {
            let score = r.matcher_scores.get(matcher_id).ok_or_else(|| {
                MatchError::MissingMatcherScore {
                    a: r.sample_id_a.clone(),
                    b: r.sample_id_b.clone(),
                    matcher_id: matcher_id.clone(),
                }
            })?;
            column.push(*score);
        }
        columns.push(minmax_column(&column));
    }
    let mut out = records.to_vec();
    for (i, record) in out.iter_mut().enumerate() {
        let fused = cfg
            .weights
            .iter()
            .zip(&columns)
            .map(|(w, col)| w * col[i])
            .sum::<f64>();
        record.fused_score = Some(fused);
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum ScoreIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed score row {line} in {path}: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },
}

fn score_csv_err(path: &Path, e: csv::Error) -> ScoreIoError {
    ScoreIoError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

use std::path::Path;

/// Long-format score CSV: `sample_id_a,sample_id_b,label,matcher_id,score`,
/// one row per (pair, matcher).
pub fn write_scores_csv(records: &[ScoreRecord], path: &Path) -> Result<(), ScoreIoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| score_csv_err(path, e))?;
    w.write_record(["sample_id_a", "sample_id_b", "label", "matcher_id", "score"])
        .map_err(|e| score_csv_err(path, e))?;
    for r in records {
        for (matcher_id, score) in &r.matcher_scores {
            w.write_record([
                r.sample_id_a.as_str(),
                r.sample_id_b.as_str(),
                &r.label.to_string(),
                matcher_id,
                &format!("{score}"),
            ])
            .map_err(|e| score_csv_err(path, e))?;
        }
    }
    w.flush().map_err(|source| ScoreIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a long-format score CSV back, grouping matcher rows by pair.
/// Pair order follows first appearance in the file.
pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRecord>, ScoreIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| score_csv_err(path, e))?;
    let mut order: Vec<(String, String)> = Vec::new();
    let mut by_pair: BTreeMap<(String, String), ScoreRecord> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| score_csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| ScoreIoError::MalformedRow {
            path: path.display().to_string(),
            line,
            message,
        };
        if record.len() != 5 {
            return Err(row_err(format!("expected 5 columns, found {}", record.len())));
        }
        let a = record.get(0).unwrap_or("").to_string();
        let b = record.get(1).unwrap_or("").to_string();
        let label = match record.get(2).unwrap_or("") {
            "genuine" => PairLabel::Genuine,
            "impostor" => PairLabel::Impostor,
            other => return Err(row_err(format!("label {other:?} not in {{genuine,impostor}}"))),
        };
        let matcher_id = record.get(3).unwrap_or("").to_string();
        let score: f64 = record
            .get(4)
            .unwrap_or("")
            .parse()
            .map_err(|_| row_err(format!("score {:?} is not numeric", record.get(4))))?;
        let key = (a.clone(), b.clone());
        let entry = by_pair.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            ScoreRecord::new(a, b, label)
        });
        entry.matcher_scores.insert(matcher_id, score);
    }
    Ok(order
        .into_iter()
        .map(|key| by_pair.remove(&key).expect("ordered key exists"))
        .collect())
}

/// Fused score CSV: `sample_id_a,sample_id_b,label,fused_score`.
pub fn write_fused_csv(records: &[ScoreRecord], path: &Path) -> Result<(), ScoreIoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| score_csv_err(path, e))?;
    w.write_record(["sample_id_a", "sample_id_b", "label", "fused_score"])
        .map_err(|e| score_csv_err(path, e))?;
    for r in records {
        let fused = r.fused_score.unwrap_or(f64::NAN);
        w.write_record([
            r.sample_id_a.as_str(),
            r.sample_id_b.as_str(),
            &r.label.to_string(),
            &format!("{fused}"),
        ])
        .map_err(|e| score_csv_err(path, e))?;
    }
    w.flush().map_err(|source| ScoreIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a fused score CSV; the fused column is also exposed as matcher
/// `"fused"` so reports can be built directly.
pub fn read_fused_csv(path: &Path) -> Result<Vec<ScoreRecord>, ScoreIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| score_csv_err(path, e))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| score_csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| ScoreIoError::MalformedRow {
            path: path.display().to_string(),
            line,
            message,
        };
        if record.len() != 4 {
            return Err(row_err(format!("expected 4 columns, found {}", record.len())));
        }
        let label = match record.get(2).unwrap_or("") {
            "genuine" => PairLabel::Genuine,
            "impostor" => PairLabel::Impostor,
            other => return Err(row_err(format!("label {other:?} not in {{genuine,impostor}}"))),
        };
        let fused: f64 = record
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| row_err(format!("fused_score {:?} is not numeric", record.get(3))))?;
        let mut r = ScoreRecord::new(
            record.get(0).unwrap_or("").to_string(),
            record.get(1).unwrap_or("").to_string(),
            label,
        );
        r.fused_score = Some(fused);
        out.push(r);
    }
    Ok(out)
}
