//! Manifest ingestion, subject-disjoint splitting and generation of
//! genuine/impostor comparison pairs under an all-against-all protocol.
//!
//! Manifests are CSV files with the header
//! `sample_id,subject_id,eye,session,eyeglasses,gaze,image_path,variant,iris_x,iris_y,iris_w,iris_h`.
//! A class is one eye of one subject, so every manifest carries up to two
//! classes per subject and cross-eye comparisons count as impostors.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::Rect;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest row {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("duplicate sample_id {sample_id:?} (row {line})")]
    DuplicateSampleId { sample_id: String, line: u64 },
    #[error("sample {sample_id:?}: image path {path} does not resolve to a file")]
    UnresolvedImagePath { sample_id: String, path: String },
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("split fraction {0} must lie strictly inside (0, 1)")]
    InvalidFraction(f64),
    #[error("split leaves a side empty ({train} train / {eval} eval subjects)")]
    EmptySplitSide { train: usize, eval: usize },
    #[error("need at least 2 samples to generate pairs, manifest has {0}")]
    TooFewSamples(usize),
    #[error("variant manifests do not mirror: {0}")]
    VariantMismatch(String),
    #[error("malformed pair list row {line}: {message}")]
    MalformedPairRow { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
}

impl fmt::Display for Eye {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Eye::Left => "left",
            Eye::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Gaze {
    Frontal,
    Left,
    Right,
    Up,
    Unknown,
}

impl fmt::Display for Gaze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gaze::Frontal => "frontal",
            Gaze::Left => "left",
            Gaze::Right => "right",
            Gaze::Up => "up",
            Gaze::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Normalized,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Normalized => "normalized",
        })
    }
}

/// The nuisance attribute a dataset varies and the pair filter keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttributeOfInterest {
    #[default]
    Eyeglasses,
    Gaze,
}

impl fmt::Display for AttributeOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeOfInterest::Eyeglasses => "eyeglasses",
            AttributeOfInterest::Gaze => "gaze",
        })
    }
}

/// One labeled periocular image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub eye: Eye,
    pub session: u32,
    pub eyeglasses: bool,
    pub gaze: Gaze,
    pub image_path: PathBuf,
    pub variant: Variant,
    pub iris_box: Option<Rect>,
}

impl SampleRecord {
    /// A class is one eye of one subject.
    pub fn class_id(&self) -> String {
        format!("{}_{}", self.subject_id, self.eye)
    }

    fn attribute_differs(&self, other: &Self, attribute: AttributeOfInterest) -> bool {
        match attribute {
            AttributeOfInterest::Eyeglasses => self.eyeglasses != other.eyeglasses,
            // Unknown gaze never matches the filter: we refuse to fabricate
            // an attribute difference from a missing label.
            AttributeOfInterest::Gaze => {
                self.gaze != other.gaze
                    && self.gaze != Gaze::Unknown
                    && other.gaze != Gaze::Unknown
            }
        }
    }
}

/// An ordered collection of samples plus the attribute the protocol keys on.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dataset_name: String,
    pub attribute_of_interest: AttributeOfInterest,
    samples: Vec<SampleRecord>,
    /// Directory relative image paths resolve against.
    base_dir: PathBuf,
}

const MANIFEST_HEADER: [&str; 12] = [
    "sample_id",
    "subject_id",
    "eye",
    "session",
    "eyeglasses",
    "gaze",
    "image_path",
    "variant",
    "iris_x",
    "iris_y",
    "iris_w",
    "iris_h",
];

impl Manifest {
    /// Builds a manifest from in-memory records, validating uniqueness and
    /// non-emptiness. Image paths resolve against `base_dir`; they are only
    /// checked against the filesystem by [`Manifest::verify_paths`].
    pub fn from_records(
        dataset_name: impl Into<String>,
        attribute_of_interest: AttributeOfInterest,
        samples: Vec<SampleRecord>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::EmptyManifest);
        }
        let mut seen = BTreeSet::new();
        for (i, s) in samples.iter().enumerate() {
            if !seen.insert(s.sample_id.clone()) {
                return Err(DataError::DuplicateSampleId {
                    sample_id: s.sample_id.clone(),
                    line: i as u64 + 2,
                });
            }
        }
        Ok(Self {
            dataset_name: dataset_name.into(),
            attribute_of_interest,
            samples,
            base_dir: base_dir.into(),
        })
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn get(&self, sample_id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    /// Absolute location of a sample's image file.
    pub fn resolve_image_path(&self, record: &SampleRecord) -> PathBuf {
        if record.image_path.is_absolute() {
            record.image_path.clone()
        } else {
            self.base_dir.join(&record.image_path)
        }
    }

    pub fn subject_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.samples {
            if seen.insert(s.subject_id.as_str()) {
                out.push(s.subject_id.clone());
            }
        }
        out
    }

    pub fn class_ids(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.samples.iter().map(|s| s.class_id()).collect();
        set.into_iter().collect()
    }

    /// Checks that every image path resolves to an existing file.
    pub fn verify_paths(&self) -> Result<(), DataError> {
        for s in &self.samples {
            let path = self.resolve_image_path(s);
            if !path.is_file() {
                return Err(DataError::UnresolvedImagePath {
                    sample_id: s.sample_id.clone(),
                    path: path.display().to_string(),
                });
            }
        }
        Ok(())
    }

    /// Writes the manifest back out in the CSV schema, paths verbatim.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
        w.write_record(MANIFEST_HEADER)
            .map_err(|e| csv_io_error(path, e))?;
        let fmt_f64 = |v: f64| {
            if v.fract() == 0.0 {
                format!("{}", v as i64)
            } else {
                format!("{v}")
            }
        };
        for s in &self.samples {
            let (ix, iy, iw, ih) = match s.iris_box {
                Some(r) => (fmt_f64(r.x), fmt_f64(r.y), fmt_f64(r.w), fmt_f64(r.h)),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            w.write_record([
                s.sample_id.as_str(),
                s.subject_id.as_str(),
                &s.eye.to_string(),
                &s.session.to_string(),
                if s.eyeglasses { "1" } else { "0" },
                &s.gaze.to_string(),
                &s.image_path.display().to_string(),
                &s.variant.to_string(),
                &ix,
                &iy,
                &iw,
                &ih,
            ])
            .map_err(|e| csv_io_error(path, e))?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Checks that `normalized` mirrors `original` 1:1 by sample_id.
    pub fn verify_variant_mirror(original: &Manifest, normalized: &Manifest) -> Result<(), DataError> {
        let orig: BTreeSet<&str> = original.samples.iter().map(|s| s.sample_id.as_str()).collect();
        let norm: BTreeSet<&str> = normalized.samples.iter().map(|s| s.sample_id.as_str()).collect();
        if let Some(missing) = orig.difference(&norm).next() {
            return Err(DataError::VariantMismatch(format!(
                "sample {missing:?} has no normalized counterpart"
            )));
        }
        if let Some(extra) = norm.difference(&orig).next() {
            return Err(DataError::VariantMismatch(format!(
                "normalized sample {extra:?} has no original counterpart"
            )));
        }
        if let Some(s) = normalized.samples.iter().find(|s| s.variant != Variant::Normalized) {
            return Err(DataError::VariantMismatch(format!(
                "sample {:?} in the normalized manifest has variant {}",
                s.sample_id, s.variant
            )));
        }
        Ok(())
    }
}

fn csv_io_error(path: &Path, e: csv::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

/// Parses and validates a manifest CSV. Every row becomes one
/// [`SampleRecord`]; image paths must resolve (relative to the manifest's
/// directory) to existing files.
pub fn load_manifest(
    path: &Path,
    attribute_of_interest: AttributeOfInterest,
) -> Result<Manifest, DataError> {
    let manifest = load_manifest_unchecked(path, attribute_of_interest)?;
    manifest.verify_paths()?;
    Ok(manifest)
}

/// [`load_manifest`] without the image-path existence check; used by stages
/// that only manipulate metadata (splitting, pair generation).
pub fn load_manifest_unchecked(
    path: &Path,
    attribute_of_interest: AttributeOfInterest,
) -> Result<Manifest, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io_error(path, e))?;

    {
        let headers = reader.headers().map_err(|e| csv_io_error(path, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MANIFEST_HEADER {
            return Err(DataError::MalformedRow {
                line: 1,
                message: format!("unexpected header {got:?}"),
            });
        }
    }

    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_io_error(path, e))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(samples.len() as u64 + 2);
        let sample = parse_row(&record, line)?;
        if !seen.insert(sample.sample_id.clone()) {
            return Err(DataError::DuplicateSampleId {
                sample_id: sample.sample_id,
                line,
            });
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(DataError::EmptyManifest);
    }

    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(Manifest {
        dataset_name,
        attribute_of_interest,
        samples,
        base_dir,
    })
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<SampleRecord, DataError> {
    let err = |message: String| DataError::MalformedRow { line, message };
    if record.len() != MANIFEST_HEADER.len() {
        return Err(err(format!(
            "expected {} columns, found {}",
            MANIFEST_HEADER.len(),
            record.len()
        )));
    }
    let field = |i: usize| record.get(i).unwrap_or("").trim();

    let sample_id = field(0).to_string();
    if sample_id.is_empty() {
        return Err(err("empty sample_id".into()));
    }
    let subject_id = field(1).to_string();
    if subject_id.is_empty() {
        return Err(err(format!("sample {sample_id:?}: empty subject_id")));
    }
    let eye = match field(2) {
        "left" => Eye::Left,
        "right" => Eye::Right,
        other => return Err(err(format!("sample {sample_id:?}: eye {other:?} not in {{left,right}}"))),
    };
    let session: u32 = field(3)
        .parse()
        .ok()
        .filter(|&s| s >= 1)
        .ok_or_else(|| err(format!("sample {sample_id:?}: session {:?} is not an integer >= 1", field(3))))?;
    let eyeglasses = match field(4) {
        "0" => false,
        "1" => true,
        other => {
            return Err(err(format!(
                "sample {sample_id:?}: eyeglasses {other:?} not in {{0,1}}"
            )))
        }
    };
    let gaze = match field(5) {
        "frontal" => Gaze::Frontal,
        "left" => Gaze::Left,
        "right" => Gaze::Right,
        "up" => Gaze::Up,
        "unknown" => Gaze::Unknown,
        other => {
            return Err(err(format!(
                "sample {sample_id:?}: gaze {other:?} not in {{frontal,left,right,up,unknown}}"
            )))
        }
    };
    let image_path = PathBuf::from(field(6));
    if image_path.as_os_str().is_empty() {
        return Err(err(format!("sample {sample_id:?}: empty image_path")));
    }
    let variant = match field(7) {
        "original" => Variant::Original,
        "normalized" => Variant::Normalized,
        other => {
            return Err(err(format!(
                "sample {sample_id:?}: variant {other:?} not in {{original,normalized}}"
            )))
        }
    };
    let iris_fields = [field(8), field(9), field(10), field(11)];
    let iris_box = if iris_fields.iter().all(|f| f.is_empty()) {
        None
    } else if iris_fields.iter().any(|f| f.is_empty()) {
        return Err(err(format!(
            "sample {sample_id:?}: iris box fields must be all present or all empty"
        )));
    } else {
        let mut vals = [0.0f64; 4];
        for (i, f) in iris_fields.iter().enumerate() {
            vals[i] = f.parse().map_err(|_| {
                err(format!("sample {sample_id:?}: iris field {f:?} is not numeric"))
            })?;
        }
        Some(Rect {
            x: vals[0],
            y: vals[1],
            w: vals[2],
            h: vals[3],
        })
    };

    Ok(SampleRecord {
        sample_id,
        subject_id,
        eye,
        session,
        eyeglasses,
        gaze,
        image_path,
        variant,
        iris_box,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SubjectOrdering {
    /// Sort subject ids lexicographically before taking the first fraction.
    #[default]
    Lexicographic,
    /// Keep subjects in manifest first-appearance order.
    #[serde(rename = "manifest_order")]
    ManifestOrder,
}

/// Partitions subjects (never samples) into train and eval manifests. The
/// first `ceil(fraction * S)` subjects under `ordering` go to train; no
/// subject appears on both sides.
pub fn split_subjects(
    m: &Manifest,
    fraction: f64,
    ordering: SubjectOrdering,
) -> Result<(Manifest, Manifest), DataError> {
    if m.is_empty() {
        return Err(DataError::EmptyManifest);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let mut subjects = m.subject_ids();
    if ordering == SubjectOrdering::Lexicographic {
        subjects.sort();
    }
    let n_train = (fraction * subjects.len() as f64).ceil() as usize;
    let n_eval = subjects.len() - n_train;
    if n_train == 0 || n_eval == 0 {
        return Err(DataError::EmptySplitSide {
            train: n_train,
            eval: n_eval,
        });
    }
    let train_set: BTreeSet<&str> = subjects[..n_train].iter().map(String::as_str).collect();
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for s in &m.samples {
        if train_set.contains(s.subject_id.as_str()) {
            train.push(s.clone());
        } else {
            eval.push(s.clone());
        }
    }
    let make = |samples: Vec<SampleRecord>| Manifest {
        dataset_name: m.dataset_name.clone(),
        attribute_of_interest: m.attribute_of_interest,
        samples,
        base_dir: m.base_dir.clone(),
    };
    Ok((make(train), make(eval)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Genuine,
    Impostor,
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLabel::Genuine => "genuine",
            PairLabel::Impostor => "impostor",
        })
    }
}

/// Settings a pair list was generated under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDescriptor {
    pub dataset_name: String,
    pub attribute: AttributeOfInterest,
    pub attribute_differing_only: bool,
    pub n_samples: usize,
}

/// A borrowed view of one comparison pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRef<'a> {
    pub sample_id_a: &'a str,
    pub sample_id_b: &'a str,
    pub label: PairLabel,
}

/// All labeled comparisons of a protocol. Sample ids are interned once and
/// pairs stored as indices, which keeps million-pair protocols compact.
#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    ids: Vec<String>,
    pairs: Vec<(u32, u32, PairLabel)>,
    pub protocol: ProtocolDescriptor,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn genuine_count(&self) -> usize {
        self.pairs
            .iter()
            .filter(|(_, _, l)| *l == PairLabel::Genuine)
            .count()
    }

    pub fn impostor_count(&self) -> usize {
        self.len() - self.genuine_count()
    }

    pub fn get(&self, i: usize) -> PairRef<'_> {
        let (a, b, label) = self.pairs[i];
        PairRef {
            sample_id_a: &self.ids[a as usize],
            sample_id_b: &self.ids[b as usize],
            label,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PairRef<'_>> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Serializes as CSV `sample_id_a,sample_id_b,label`.
    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
        w.write_record(["sample_id_a", "sample_id_b", "label"])
            .map_err(|e| csv_io_error(path, e))?;
        for p in self.iter() {
            w.write_record([p.sample_id_a, p.sample_id_b, &p.label.to_string()])
                .map_err(|e| csv_io_error(path, e))?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Reads a pair list back from its CSV serialization. The protocol
    /// descriptor is not stored in the CSV and is reconstructed minimally.
    pub fn load_csv(path: &Path) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_io_error(path, e))?;
        let mut ids: Vec<String> = Vec::new();
        let mut index = std::collections::BTreeMap::<String, u32>::new();
        let mut intern = |s: &str, ids: &mut Vec<String>| -> u32 {
            if let Some(&i) = index.get(s) {
                return i;
            }
            let i = ids.len() as u32;
            ids.push(s.to_string());
            index.insert(s.to_string(), i);
            i
        };
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_io_error(path, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 3 {
                return Err(DataError::MalformedPairRow {
                    line,
                    message: format!("expected 3 columns, found {}", record.len()),
                });
            }
            let label = match record.get(2).unwrap_or("") {
                "genuine" => PairLabel::Genuine,
                "impostor" => PairLabel::Impostor,
                other => {
                    return Err(DataError::MalformedPairRow {
                        line,
                        message: format!("label {other:?} not in {{genuine,impostor}}"),
                    })
                }
            };
            let a = intern(record.get(0).unwrap_or(""), &mut ids);
            let b = intern(record.get(1).unwrap_or(""), &mut ids);
            pairs.push((a, b, label));
        }
        Ok(Self {
            ids,
            pairs,
            protocol: ProtocolDescriptor {
                dataset_name: path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                attribute: AttributeOfInterest::Eyeglasses,
                attribute_differing_only: false,
                n_samples: 0,
            },
        })
    }
}

/// All-against-all unordered comparison pairs over the manifest's samples,
/// labeled genuine exactly when the class ids match. With
/// `attribute_differing_only`, only pairs whose attribute of interest differs
/// survive. Samples are ordered by sample_id, so identical manifests yield
/// byte-identical pair lists regardless of row order.
pub fn generate_pairs(m: &Manifest, attribute_differing_only: bool) -> Result<PairList, DataError> {
    if m.len() < 2 {
        return Err(DataError::TooFewSamples(m.len()));
    }
    let mut order: Vec<&SampleRecord> = m.samples.iter().collect();
    order.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let ids: Vec<String> = order.iter().map(|s| s.sample_id.clone()).collect();
    let class_ids: Vec<String> = order.iter().map(|s| s.class_id()).collect();

    let mut pairs = Vec::new();
    for i in 0..order.len() {
        for j in (i + 1)..order.len() {
            if attribute_differing_only
                && !order[i].attribute_differs(order[j], m.attribute_of_interest)
            {
                continue;
            }
            let label = if class_ids[i] == class_ids[j] {
                PairLabel::Genuine
            } else {
                PairLabel::Impostor
            };
            pairs.push((i as u32, j as u32, label));
        }
    }
    Ok(PairList {
        ids,
        pairs,
        protocol: ProtocolDescriptor {
            dataset_name: m.dataset_name.clone(),
            attribute: m.attribute_of_interest,
            attribute_differing_only,
            n_samples: m.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn sample(id: &str, subject: &str, eye: Eye, glasses: bool) -> SampleRecord {
        SampleRecord {
            sample_id: id.to_string(),
            subject_id: subject.to_string(),
            eye,
            session: 1,
            eyeglasses: glasses,
            gaze: Gaze::Frontal,
            image_path: PathBuf::from(format!("{id}.png")),
            variant: Variant::Original,
            iris_box: None,
        }
    }

    fn two_class_manifest() -> Manifest {
        // class A: a1 (glasses), a2, a3; class B: b1 (glasses), b2
        Manifest::from_records(
            "fixture",
            AttributeOfInterest::Eyeglasses,
            vec![
                sample("a1", "sa", Eye::Left, true),
                sample("a2", "sa", Eye::Left, false),
                sample("a3", "sa", Eye::Left, false),
                sample("b1", "sb", Eye::Left, true),
                sample("b2", "sb", Eye::Left, false),
            ],
            ".",
        )
        .unwrap()
    }

    fn write_manifest_csv(dir: &Path, rows: &[&str]) -> PathBuf {
        let path = dir.join("manifest.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            "sample_id,subject_id,eye,session,eyeglasses,gaze,image_path,variant,iris_x,iris_y,iris_w,iris_h"
        )
        .unwrap();
        for row in rows {
            writeln!(f, "{row}").unwrap();
        }
        path
    }

    fn touch(dir: &Path, name: &str) {
        std::fs::File::create(dir.join(name)).unwrap();
    }

    #[test]
    fn load_well_formed_manifest() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["i1.png", "i2.png", "i3.png", "i4.png"] {
            touch(dir.path(), n);
        }
        let path = write_manifest_csv(
            dir.path(),
            &[
                "s1,subj1,left,1,0,frontal,i1.png,original,,,,",
                "s2,subj1,right,1,1,frontal,i2.png,original,10,12,30,30",
                "s3,subj2,left,2,0,left,i3.png,original,,,,",
                "s4,subj2,right,3,1,up,i4.png,normalized,,,,",
            ],
        );
        let m = load_manifest(&path, AttributeOfInterest::Eyeglasses).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.samples()[1].iris_box.unwrap().w, 30.0);
        assert_eq!(m.samples()[0].class_id(), "subj1_left");
        assert_eq!(m.subject_ids(), vec!["subj1", "subj2"]);
        assert_eq!(m.class_ids().len(), 4);
    }

    #[test]
    fn load_rejects_duplicate_sample_id() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "i.png");
        let path = write_manifest_csv(
            dir.path(),
            &[
                "s1,subj1,left,1,0,frontal,i.png,original,,,,",
                "s1,subj1,right,1,0,frontal,i.png,original,,,,",
            ],
        );
        let err = load_manifest(&path, AttributeOfInterest::Eyeglasses).unwrap_err();
        match err {
            DataError::DuplicateSampleId { sample_id, .. } => assert_eq!(sample_id, "s1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_eyeglasses_flag() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "i.png");
        let path = write_manifest_csv(
            dir.path(),
            &["s1,subj1,left,1,2,frontal,i.png,original,,,,"],
        );
        let err = load_manifest(&path, AttributeOfInterest::Eyeglasses).unwrap_err();
        assert!(matches!(err, DataError::MalformedRow { .. }), "{err:?}");
        assert!(err.to_string().contains("eyeglasses"));
    }

    #[test]
    fn load_rejects_wrong_column_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(dir.path(), &["s1,subj1,left,1,0,frontal,i.png,original"]);
        let err = load_manifest(&path, AttributeOfInterest::Eyeglasses).unwrap_err();
        assert!(matches!(err, DataError::MalformedRow { .. }), "{err:?}");
    }

    #[test]
    fn load_rejects_missing_image() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_csv(
            dir.path(),
            &["s1,subj1,left,1,0,frontal,missing.png,original,,,,"],
        );
        let err = load_manifest(&path, AttributeOfInterest::Eyeglasses).unwrap_err();
        match err {
            DataError::UnresolvedImagePath { sample_id, .. } => assert_eq!(sample_id, "s1"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn split_half_lexicographic() {
        let samples = ["s1", "s2", "s3", "s4"]
            .iter()
            .enumerate()
            .map(|(i, subj)| sample(&format!("x{i}"), subj, Eye::Left, false))
            .collect();
        let m = Manifest::from_records("d", AttributeOfInterest::Eyeglasses, samples, ".").unwrap();
        let (train, eval) = split_subjects(&m, 0.5, SubjectOrdering::Lexicographic).unwrap();
        assert_eq!(train.subject_ids(), vec!["s1", "s2"]);
        assert_eq!(eval.subject_ids(), vec!["s3", "s4"]);
    }

    #[test]
    fn split_three_subjects_gives_ceiling_to_train() {
        let samples = ["s1", "s2", "s3"]
            .iter()
            .enumerate()
            .map(|(i, subj)| sample(&format!("x{i}"), subj, Eye::Left, false))
            .collect();
        let m = Manifest::from_records("d", AttributeOfInterest::Eyeglasses, samples, ".").unwrap();
        let (train, eval) = split_subjects(&m, 0.5, SubjectOrdering::Lexicographic).unwrap();
        assert_eq!(train.subject_ids().len(), 2);
        assert_eq!(eval.subject_ids().len(), 1);
    }

    #[test]
    fn split_sides_partition_subjects() {
        let samples = (0..7)
            .map(|i| sample(&format!("x{i}"), &format!("s{}", i % 5), Eye::Left, false))
            .collect();
        let m = Manifest::from_records("d", AttributeOfInterest::Eyeglasses, samples, ".").unwrap();
        let (train, eval) = split_subjects(&m, 0.4, SubjectOrdering::Lexicographic).unwrap();
        let t: BTreeSet<_> = train.subject_ids().into_iter().collect();
        let e: BTreeSet<_> = eval.subject_ids().into_iter().collect();
        assert!(t.is_disjoint(&e));
        assert_eq!(t.len() + e.len(), 5);
        assert_eq!(train.len() + eval.len(), m.len());
    }

    #[test]
    fn split_rejects_degenerate_fraction() {
        let samples = vec![sample("x0", "s1", Eye::Left, false)];
        let m = Manifest::from_records("d", AttributeOfInterest::Eyeglasses, samples, ".").unwrap();
        assert!(split_subjects(&m, 0.5, SubjectOrdering::Lexicographic).is_err());
        assert!(split_subjects(&m, 1.0, SubjectOrdering::Lexicographic).is_err());
    }

    #[test]
    fn pairs_with_attribute_filter() {
        let pairs = generate_pairs(&two_class_manifest(), true).unwrap();
        assert_eq!(pairs.genuine_count(), 3);
        assert_eq!(pairs.impostor_count(), 3);
        let genuine: Vec<(String, String)> = pairs
            .iter()
            .filter(|p| p.label == PairLabel::Genuine)
            .map(|p| (p.sample_id_a.to_string(), p.sample_id_b.to_string()))
            .collect();
        assert_eq!(
            genuine,
            vec![
                ("a1".into(), "a2".into()),
                ("a1".into(), "a3".into()),
                ("b1".into(), "b2".into())
            ]
        );
    }

    #[test]
    fn pairs_without_filter() {
        let pairs = generate_pairs(&two_class_manifest(), false).unwrap();
        assert_eq!(pairs.genuine_count(), 4);
        assert_eq!(pairs.impostor_count(), 6);
        assert_eq!(pairs.len(), 10); // C(5, 2)
    }

    #[test]
    fn pairs_unknown_gaze_never_matches_filter() {
        let mut s1 = sample("g1", "s1", Eye::Left, false);
        let mut s2 = sample("g2", "s1", Eye::Left, false);
        let mut s3 = sample("g3", "s2", Eye::Left, false);
        s1.gaze = Gaze::Unknown;
        s2.gaze = Gaze::Frontal;
        s3.gaze = Gaze::Left;
        let m = Manifest::from_records("d", AttributeOfInterest::Gaze, vec![s1, s2, s3], ".").unwrap();
        let pairs = generate_pairs(&m, true).unwrap();
        // (g1,g2) and (g1,g3) carry an unknown label and are dropped.
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs.get(0).sample_id_a, "g2");
        assert_eq!(pairs.get(0).sample_id_b, "g3");
    }

    #[test]
    fn pairs_cross_eye_same_subject_is_impostor() {
        let m = Manifest::from_records(
            "d",
            AttributeOfInterest::Eyeglasses,
            vec![
                sample("l1", "s1", Eye::Left, false),
                sample("r1", "s1", Eye::Right, true),
            ],
            ".",
        )
        .unwrap();
        let pairs = generate_pairs(&m, false).unwrap();
        assert_eq!(pairs.get(0).label, PairLabel::Impostor);
    }

    #[test]
    fn pairs_deterministic_under_row_order() {
        let m1 = two_class_manifest();
        let mut samples: Vec<SampleRecord> = m1.samples().to_vec();
        samples.reverse();
        let m2 = Manifest::from_records("fixture", AttributeOfInterest::Eyeglasses, samples, ".").unwrap();
        let p1 = generate_pairs(&m1, true).unwrap();
        let p2 = generate_pairs(&m2, true).unwrap();
        let v1: Vec<_> = p1.iter().map(|p| (p.sample_id_a.to_string(), p.sample_id_b.to_string(), p.label)).collect();
        let v2: Vec<_> = p2.iter().map(|p| (p.sample_id_a.to_string(), p.sample_id_b.to_string(), p.label)).collect();
        assert_eq!(v1, v2);
    }

    #[test]
    fn pair_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = generate_pairs(&two_class_manifest(), true).unwrap();
        let path = dir.path().join("pairs.csv");
        pairs.save_csv(&path).unwrap();
        let back = PairList::load_csv(&path).unwrap();
        assert_eq!(back.len(), pairs.len());
        assert_eq!(back.genuine_count(), pairs.genuine_count());
        let a: Vec<_> = pairs.iter().map(|p| (p.sample_id_a.to_string(), p.label)).collect();
        let b: Vec<_> = back.iter().map(|p| (p.sample_id_a.to_string(), p.label)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_never_increases_counts() {
        let m = two_class_manifest();
        let unfiltered = generate_pairs(&m, false).unwrap();
        let filtered = generate_pairs(&m, true).unwrap();
        assert!(filtered.genuine_count() <= unfiltered.genuine_count());
        assert!(filtered.impostor_count() <= unfiltered.impostor_count());
    }
}
