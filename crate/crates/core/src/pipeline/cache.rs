//! On-disk feature cache keyed by image content and extractor configuration.
//!
//! One file per (sample, extractor) pair. The key is
//! sha256(image bytes || extractor id || config fingerprint), so edited
//! images or changed extractor parameters miss cleanly while everything else
//! hits. Files carry a payload checksum; truncation or corruption is
//! detected on read and treated as a miss (the caller recomputes and
//! overwrites, with a warning).

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::features::{FeatureVector, Keypoint, KeypointSet};

const CACHE_MAGIC: &[u8; 4] = b"PFC1";

#[derive(Debug, Clone, PartialEq)]
pub enum CachedFeature {
    Vector(FeatureVector),
    Keypoints(KeypointSet),
}

pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn key(image_bytes: &[u8], extractor_id: &str, fingerprint: &str) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(image_bytes);
        hasher.update(extractor_id.as_bytes());
        hasher.update(fingerprint.as_bytes());
        hasher.finalize().into()
    }

    fn path_for(&self, sample_id: &str, extractor_id: &str, key: &[u8; 32]) -> PathBuf {
        let sanitized: String = format!("{sample_id}_{extractor_id}")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let hex: String = key[..8].iter().map(|b| format!("{b:02x}")).collect();
        self.dir.join(format!("{sanitized}-{hex}.feat"))
    }

    /// Returns the cached feature, or None on miss or integrity failure.
    pub fn load(
        &self,
        sample_id: &str,
        extractor_id: &str,
        key: &[u8; 32],
    ) -> Option<CachedFeature> {
        let path = self.path_for(sample_id, extractor_id, key);
        let bytes = std::fs::read(&path).ok()?;
        match decode(&bytes, key) {
            Some(feature) => Some(feature),
            None => {
                log::warn!(
                    "feature cache entry {} is corrupt; recomputing",
                    path.display()
                );
                None
            }
        }
    }

    /// Writes atomically (temp file + rename) so concurrent writers of the
    /// same key can never expose a torn entry.
    pub fn store(
        &self,
        sample_id: &str,
        extractor_id: &str,
        key: &[u8; 32],
        feature: &CachedFeature,
    ) -> std::io::Result<()> {
        let path = self.path_for(sample_id, extractor_id, key);
        let bytes = encode(key, feature);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
        }
        std::fs::rename(&tmp, &path)
    }
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn encode(key: &[u8; 32], feature: &CachedFeature) -> Vec<u8> {
    let mut payload = Vec::new();
    match feature {
        CachedFeature::Vector(fv) => {
            payload.push(0u8);
            let id = fv.extractor_id.as_bytes();
            payload.extend_from_slice(&(id.len() as u16).to_le_bytes());
            payload.extend_from_slice(id);
            payload.extend_from_slice(&(fv.values.len() as u32).to_le_bytes());
            for &v in &fv.values {
                push_f64(&mut payload, v);
            }
        }
        CachedFeature::Keypoints(set) => {
            payload.push(1u8);
            payload.extend_from_slice(&(set.keypoints.len() as u32).to_le_bytes());
            for kp in &set.keypoints {
                for v in [kp.x, kp.y, kp.scale, kp.orientation, kp.response] {
                    push_f64(&mut payload, v);
                }
                payload.extend_from_slice(&(kp.descriptor.len() as u32).to_le_bytes());
                for &v in &kp.descriptor {
                    push_f64(&mut payload, v);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(4 + 32 + payload.len() + 32);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(key);
    out.extend_from_slice(&payload);
    let digest: [u8; 32] = Sha256::digest(&payload).into();
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.bytes.len() {
            return None;
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u16(&mut self) -> Option<u16> {
        Some(u16::from_le_bytes(self.take(2)?.try_into().ok()?))
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

fn decode(bytes: &[u8], expected_key: &[u8; 32]) -> Option<CachedFeature> {
    if bytes.len() < 4 + 32 + 32 || &bytes[..4] != CACHE_MAGIC {
        return None;
    }
    if &bytes[4..36] != expected_key {
        return None;
    }
    let payload = &bytes[36..bytes.len() - 32];
    let stored_digest = &bytes[bytes.len() - 32..];
    let digest: [u8; 32] = Sha256::digest(payload).into();
    if digest != stored_digest {
        return None;
    }
    let mut r = Reader {
        bytes: payload,
        pos: 0,
    };
    let feature = match r.u8()? {
        0 => {
            let id_len = r.u16()? as usize;
            let extractor_id = String::from_utf8(r.take(id_len)?.to_vec()).ok()?;
            let dim = r.u32()? as usize;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(r.f64()?);
            }
            CachedFeature::Vector(FeatureVector::new(values, extractor_id).ok()?)
        }
        1 => {
            let count = r.u32()? as usize;
            let mut keypoints = Vec::with_capacity(count);
            for _ in 0..count {
                let x = r.f64()?;
                let y = r.f64()?;
                let scale = r.f64()?;
                let orientation = r.f64()?;
                let response = r.f64()?;
                let len = r.u32()? as usize;
                let mut descriptor = Vec::with_capacity(len);
                for _ in 0..len {
                    descriptor.push(r.f64()?);
                }
                keypoints.push(Keypoint {
                    x,
                    y,
                    scale,
                    orientation,
                    response,
                    descriptor,
                });
            }
            CachedFeature::Keypoints(KeypointSet { keypoints })
        }
        _ => return None,
    };
    if r.pos != payload.len() {
        return None;
    }
    Some(feature)
}
