//! Out-of-process attribute-normalizer contract.
//!
//! The external editor (a generative model, or any stand-in) is invoked once
//! per batch with two directories: `{in_dir}` holding one image per sample
//! (named `<sample_id>.<ext>`) and `{out_dir}` it must fill with the same
//! filenames. The pipeline verifies the 1:1 mapping and builds a
//! variant=normalized manifest over the outputs. The template `identity`
//! short-circuits to a byte-copy, which is the reference normalizer for
//! pipeline-purity tests.

use std::path::Path;
use std::process::Command;

use crate::data::{Manifest, Variant};

use super::{PipelineError, Stage};

const STAGE: &str = "normalize";

/// Name of the built-in byte-copy normalizer.
pub const IDENTITY_NORMALIZER: &str = "identity";

pub fn normalize_batch(
    m: &Manifest,
    command_template: &str,
    out_dir: &Path,
) -> Result<Manifest, PipelineError> {
    let in_dir = out_dir.join("in");
    let norm_dir = out_dir.join("out");
    std::fs::create_dir_all(&in_dir).stage(STAGE)?;
    std::fs::create_dir_all(&norm_dir).stage(STAGE)?;

    // Stage inputs under stable names the external tool can mirror.
    let mut staged = Vec::with_capacity(m.len());
    for s in m.samples() {
        let src = m.resolve_image_path(s);
        let ext = src
            .extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_else(|| "png".to_string());
        let name = format!("{}.{ext}", s.sample_id);
        std::fs::copy(&src, in_dir.join(&name)).stage(STAGE)?;
        staged.push((s.clone(), name));
    }

    if command_template == IDENTITY_NORMALIZER {
        for (_, name) in &staged {
            std::fs::copy(in_dir.join(name), norm_dir.join(name)).stage(STAGE)?;
        }
    } else {
        if !command_template.contains("{in_dir}") || !command_template.contains("{out_dir}") {
            return Err(PipelineError::contract(
                STAGE,
                format!(
                    "normalizer command {command_template:?} must contain {{in_dir}} and {{out_dir}} placeholders"
                ),
            ));
        }
        let command = command_template
            .replace("{in_dir}", &in_dir.display().to_string())
            .replace("{out_dir}", &norm_dir.display().to_string());
        let status = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .status()
            .stage(STAGE)?;
        if !status.success() {
            return Err(PipelineError::contract(
                STAGE,
                format!("normalizer command exited with {status}: {command}"),
            ));
        }
    }

    // 1:1 completeness check, then mirror the manifest onto the outputs.
    let mut records = Vec::with_capacity(staged.len());
    for (sample, name) in staged {
        let out_path = norm_dir.join(&name);
        let metadata = std::fs::metadata(&out_path).map_err(|_| {
            PipelineError::contract(
                STAGE,
                format!("normalizer produced no output for sample {:?}", sample.sample_id),
            )
        })?;
        if metadata.len() == 0 {
            return Err(PipelineError::contract(
                STAGE,
                format!("normalizer output for sample {:?} is empty", sample.sample_id),
            ));
        }
        let mut record = sample;
        record.variant = Variant::Normalized;
        record.image_path = Path::new("out").join(&name);
        records.push(record);
    }
    let normalized = Manifest::from_records(
        format!("{}-normalized", m.dataset_name),
        m.attribute_of_interest,
        records,
        out_dir,
    )
    .stage(STAGE)?;
    Manifest::verify_variant_mirror(m, &normalized).stage(STAGE)?;
    Ok(normalized)
}
