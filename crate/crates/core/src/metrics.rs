//! Verification metrics over labeled score sets: decidability index, AUC,
//! equal error rate, ROC curves and distribution summaries.
//!
//! AUC is the Mann-Whitney statistic (ties count one half) computed from
//! midranks in O(n log n); the ROC sweep and the EER interpolation share the
//! same threshold semantics (a comparison is accepted when score >= t), so
//! the trapezoidal ROC area reproduces the rank statistic exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{PairLabel, Variant};
use crate::matching::ScoreRecord;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("{side} score list is empty")]
    EmptySide { side: &'static str },
    #[error("decidability needs at least 2 scores per side ({n_genuine} genuine / {n_impostor} impostor)")]
    TooFewScores { n_genuine: usize, n_impostor: usize },
    #[error("pooled variance is zero: distributions are degenerate (infinite separation)")]
    InfiniteSeparation,
    #[error("no {label} records for matcher {matcher_id:?}")]
    MissingLabel { matcher_id: String, label: PairLabel },
    #[error("record ({a}, {b}) has no score for matcher {matcher_id:?}")]
    MissingScore { a: String, b: String, matcher_id: String },
}

/// Genuine and impostor similarity scores of one matcher.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Result<Self, MetricsError> {
        if genuine.is_empty() {
            return Err(MetricsError::EmptySide { side: "genuine" });
        }
        if impostor.is_empty() {
            return Err(MetricsError::EmptySide { side: "impostor" });
        }
        for &v in genuine.iter().chain(&impostor) {
            if !v.is_finite() {
                return Err(MetricsError::NonFiniteScore(v));
            }
        }
        Ok(Self { genuine, impostor })
    }

    pub fn genuine(&self) -> &[f64] {
        &self.genuine
    }

    pub fn impostor(&self) -> &[f64] {
        &self.impostor
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample (n-1) variance; zero for singleton lists.
fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Decidability index `d' = |mu_G - mu_I| / sqrt((var_G + var_I) / 2)` with
/// sample variances. Degenerate zero-variance sets are an explicit error
/// (infinite separation), never a silent infinity.
pub fn decidability(s: &ScoreSet) -> Result<f64, MetricsError> {
    if s.genuine.len() < 2 || s.impostor.len() < 2 {
        return Err(MetricsError::TooFewScores {
            n_genuine: s.genuine.len(),
            n_impostor: s.impostor.len(),
        });
    }
    let pooled = (sample_variance(&s.genuine) + sample_variance(&s.impostor)) / 2.0;
    if pooled <= 0.0 {
        return Err(MetricsError::InfiniteSeparation);
    }
    Ok((mean(&s.genuine) - mean(&s.impostor)).abs() / pooled.sqrt())
}

/// Mann-Whitney AUC: the fraction of (genuine, impostor) pairs where the
/// genuine score is higher, ties counting one half. Computed from midranks
/// in O(n log n).
pub fn auc(s: &ScoreSet) -> Result<f64, MetricsError> {
    let n_g = s.genuine.len();
    let n_i = s.impostor.len();
    let mut combined: Vec<(f64, bool)> = Vec::with_capacity(n_g + n_i);
    combined.extend(s.genuine.iter().map(|&v| (v, true)));
    combined.extend(s.impostor.iter().map(|&v| (v, false)));
    combined.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));

    // midranks: tie groups share the average of their 1-based ranks
    let mut rank_sum_genuine = 0.0f64;
    let mut i = 0usize;
    while i < combined.len() {
        let mut j = i;
        while j < combined.len() && combined[j].0 == combined[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &combined[i..j] {
            if item.1 {
                rank_sum_genuine += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_genuine - (n_g * (n_g + 1)) as f64 / 2.0;
    Ok(u / (n_g as f64 * n_i as f64))
}

/// One operating point of the ROC sweep. `threshold` is `None` for the
/// accept-nothing sentinel (conceptually +infinity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub far: f64,
    pub tar: f64,
}

/// Threshold sweep over the sorted union of scores (plus the accept-nothing
/// sentinel). FAR/TAR are the fractions of impostor/genuine scores >= t.
/// Points run from (0, 0) to (1, 1), non-decreasing in both coordinates.
pub fn roc_curve(s: &ScoreSet) -> Result<Vec<RocPoint>, MetricsError> {
    let mut genuine = s.genuine.clone();
    let mut impostor = s.impostor.clone();
    genuine.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    impostor.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let (n_g, n_i) = (genuine.len() as f64, impostor.len() as f64);

    let mut points = vec![RocPoint {
        threshold: None,
        far: 0.0,
        tar: 0.0,
    }];
    let (mut gi, mut ii) = (0usize, 0usize);
    while gi < genuine.len() || ii < impostor.len() {
        let next_g = genuine.get(gi).copied();
        let next_i = impostor.get(ii).copied();
        let t = match (next_g, next_i) {
            (Some(g), Some(i)) => g.max(i),
            (Some(g), None) => g,
            (None, Some(i)) => i,
            (None, None) => unreachable!(),
        };
        while gi < genuine.len() && genuine[gi] == t {
            gi += 1;
        }
        while ii < impostor.len() && impostor[ii] == t {
            ii += 1;
        }
        points.push(RocPoint {
            threshold: Some(t),
            far: ii as f64 / n_i,
            tar: gi as f64 / n_g,
        });
    }
    points.dedup_by(|a, b| a.far == b.far && a.tar == b.tar);
    Ok(points)
}

/// Trapezoidal area under a ROC point list.
pub fn roc_trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].far - w[0].far) * (w[1].tar + w[0].tar) / 2.0)
        .sum()
}

/// Equal error rate: the FAR where FAR = FRR = 1 - TAR on the piecewise
/// linear ROC, found by interpolating between the two sweep points that
/// bracket the crossing.
pub fn eer(s: &ScoreSet) -> Result<f64, MetricsError> {
    let points = roc_curve(s)?;
    let diff = |p: &RocPoint| p.far - (1.0 - p.tar);
    // diff runs from -1 at (0,0) to +1 at (1,1)
    for w in points.windows(2) {
        let (d0, d1) = (diff(&w[0]), diff(&w[1]));
        if d1 < 0.0 {
            continue;
        }
        if d1 == 0.0 {
            return Ok(w[1].far);
        }
        // d0 < 0 <= d1: interpolate the crossing on this segment
        let t = d0 / (d0 - d1);
        return Ok(w[0].far + t * (w[1].far - w[0].far));
    }
    Ok(points.last().map(|p| p.far).unwrap_or(0.5))
}

/// Everything reportable about one matcher on one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub matcher_id: String,
    pub variant: Variant,
    pub auc: f64,
    /// `None` when the distributions are degenerate (see
    /// `infinite_separation`) or either side has fewer than 2 scores.
    pub decidability: Option<f64>,
    pub infinite_separation: bool,
    pub eer: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub genuine_mean: f64,
    pub genuine_stddev: f64,
    pub impostor_mean: f64,
    pub impostor_stddev: f64,
    pub roc: Vec<RocPoint>,
}

impl VerificationReport {
    pub fn save_json(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json)
    }

    pub fn load_json(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Writes the ROC as CSV `threshold,far,tar` (sentinel threshold = inf).
    pub fn save_roc_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut out = String::from("threshold,far,tar\n");
        for p in &self.roc {
            let t = match p.threshold {
                Some(t) => format!("{t}"),
                None => "inf".to_string(),
            };
            out.push_str(&format!("{t},{},{}\n", p.far, p.tar));
        }
        std::fs::write(path, out)
    }
}

/// Splits the matcher's scores by label and computes the full report.
/// `matcher_id` may name a raw matcher column or `"fused"`.
pub fn build_report(
    records: &[ScoreRecord],
    matcher_id: &str,
    variant: Variant,
) -> Result<VerificationReport, MetricsError> {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for r in records {
        let score = if matcher_id == "fused" {
            r.fused_score
        } else {
            r.matcher_scores.get(matcher_id).copied()
        }
        .ok_or_else(|| MetricsError::MissingScore {
            a: r.sample_id_a.clone(),
            b: r.sample_id_b.clone(),
            matcher_id: matcher_id.to_string(),
        })?;
        match r.label {
            PairLabel::Genuine => genuine.push(score),
            PairLabel::Impostor => impostor.push(score),
        }
    }
    if genuine.is_empty() {
        return Err(MetricsError::MissingLabel {
            matcher_id: matcher_id.to_string(),
            label: PairLabel::Genuine,
        });
    }
    if impostor.is_empty() {
        return Err(MetricsError::MissingLabel {
            matcher_id: matcher_id.to_string(),
            label: PairLabel::Impostor,
        });
    }
    let set = ScoreSet::new(genuine, impostor)?;
    let (decidability_value, infinite) = match decidability(&set) {
        Ok(d) => (Some(d), false),
        Err(MetricsError::InfiniteSeparation) => (None, true),
        Err(MetricsError::TooFewScores { .. }) => (None, false),
        Err(e) => return Err(e),
    };
    Ok(VerificationReport {
        matcher_id: matcher_id.to_string(),
        variant,
        auc: auc(&set)?,
        decidability: decidability_value,
        infinite_separation: infinite,
        eer: eer(&set)?,
        n_genuine: set.genuine.len(),
        n_impostor: set.impostor.len(),
        genuine_mean: mean(&set.genuine),
        genuine_stddev: sample_variance(&set.genuine).sqrt(),
        impostor_mean: mean(&set.impostor),
        impostor_stddev: sample_variance(&set.impostor).sqrt(),
        roc: roc_curve(&set)?,
    })
}

/// Per-matcher score column -> report, for every matcher present plus the
/// fusion column when any record carries one.
pub fn build_all_reports(
    records: &[ScoreRecord],
    variant: Variant,
) -> Result<BTreeMap<String, VerificationReport>, MetricsError> {
    let mut matcher_ids: Vec<String> = records
        .first()
        .map(|r| r.matcher_scores.keys().cloned().collect())
        .unwrap_or_default();
    if records.iter().any(|r| r.fused_score.is_some()) {
        matcher_ids.push("fused".to_string());
    }
    let mut out = BTreeMap::new();
    for matcher_id in matcher_ids {
        out.insert(
            matcher_id.clone(),
            build_report(records, &matcher_id, variant)?,
        );
    }
    Ok(out)
}
