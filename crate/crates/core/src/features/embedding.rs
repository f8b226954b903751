//! Binary embedding files for externally computed deep representations.
//!
//! Layout: magic `PEMB`, version byte 1, dimension as u32 little-endian,
//! then that many IEEE-754 binary32 little-endian values. The fixed binary
//! layout keeps ingestion bit-exact across toolchains.

use std::path::Path;

use super::{FeatureError, FeatureVector};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"PEMB";
const EMBEDDING_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4;

/// Reads an embedding file and validates magic, version, length consistency,
/// finiteness, and non-zero norm. The extractor id records the dimension,
/// e.g. `deep-256`.
pub fn load_embedding(path: &Path) -> Result<FeatureVector, FeatureError> {
    let display = || path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: display(),
        source,
    })?;
    if bytes.len() < HEADER_LEN || &bytes[0..4] != EMBEDDING_MAGIC {
        return Err(FeatureError::BadMagic { path: display() });
    }
    let version = bytes[4];
    if version != EMBEDDING_VERSION {
        return Err(FeatureError::UnsupportedVersion {
            path: display(),
            version,
        });
    }
    let declared = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let actual = (bytes.len() - HEADER_LEN) / 4;
    if bytes.len() != HEADER_LEN + declared * 4 {
        return Err(FeatureError::DimMismatch {
            path: display(),
            declared,
            actual,
        });
    }
    let mut values = Vec::with_capacity(declared);
    for i in 0..declared {
        let off = HEADER_LEN + i * 4;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(FeatureError::NonFinite {
                path: display(),
                index: i,
            });
        }
        values.push(v as f64);
    }
    if values.iter().map(|v| v * v).sum::<f64>() == 0.0 {
        return Err(FeatureError::ZeroNorm { path: display() });
    }
    FeatureVector::new(values, format!("deep-{declared}"))
}

/// Writes an embedding in the binary layout [`load_embedding`] reads.
pub fn write_embedding(path: &Path, values: &[f32]) -> Result<(), FeatureError> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + values.len() * 4);
    bytes.extend_from_slice(EMBEDDING_MAGIC);
    bytes.push(EMBEDDING_VERSION);
    bytes.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn well_formed_256_float_file_loads() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        let values: Vec<f32> = (0..256).map(|i| (i as f32 - 128.0) / 256.0).collect();
        write_embedding(&path, &values).unwrap();
        let fv = load_embedding(&path).unwrap();
        assert_eq!(fv.dims(), 256);
        assert_eq!(fv.extractor_id, "deep-256");
        assert_eq!(fv.values[0], values[0] as f64);
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        write_embedding(&path, &[1.0, 2.0]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_embedding(&path),
            Err(FeatureError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncated_file_is_a_dim_mismatch() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        write_embedding(&path, &[1.0, 2.0, 3.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            load_embedding(&path),
            Err(FeatureError::DimMismatch { declared: 3, actual: 2, .. })
        ));
    }

    #[test]
    fn non_finite_value_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        write_embedding(&path, &[1.0, f32::NAN]).unwrap();
        assert!(matches!(
            load_embedding(&path),
            Err(FeatureError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn zero_vector_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        write_embedding(&path, &[0.0; 256]).unwrap();
        assert!(matches!(
            load_embedding(&path),
            Err(FeatureError::ZeroNorm { .. })
        ));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("e.pemb");
        write_embedding(&path, &[1.0]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_embedding(&path),
            Err(FeatureError::UnsupportedVersion { version: 9, .. })
        ));
    }
}
