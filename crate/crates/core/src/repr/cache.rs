use super::{FeatureSeq, ReprError};
use std::path::Path;

pub const CACHE_MAGIC: [u8; 4] = *b"MLFC";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Raw contents of a feature cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeatures {
    pub t: usize,
    pub d: usize,
    pub data: Vec<f32>,
}

/// Layout: magic, then version, T and D as little-endian u32, then T·D
/// little-endian f32 values frame by frame.
pub fn write_feature_cache(path: &Path, seq: &FeatureSeq) -> Result<(), ReprError> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * seq.data.len());
    bytes.extend(CACHE_MAGIC);
    for v in [CACHE_VERSION, seq.len() as u32, seq.dim as u32] {
        bytes.extend(v.to_le_bytes());
    }
    for v in &seq.data {
        bytes.extend(v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|source| ReprError::Io { path: path.display().to_string(), source })
}

pub fn read_feature_cache(path: &Path) -> Result<CachedFeatures, ReprError> {
    let bad = |reason: String| ReprError::Cache { path: path.display().to_string(), reason };
    let bytes = std::fs::read(path).map_err(|source| ReprError::Io { path: path.display().to_string(), source })?;
    if bytes.len() < HEADER_LEN || bytes[..4] != CACHE_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(1) != CACHE_VERSION {
        return Err(bad(format!("unsupported version {}", word(1))));
    }
    let (t, d) = (word(2) as usize, word(3) as usize);
    if bytes.len() != HEADER_LEN + 4 * t * d {
        return Err(bad(format!("expected {} values, file holds {} bytes", t * d, bytes.len())));
    }
    let data = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(CachedFeatures { t, d, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate_scene;
    use crate::repr::{featurize_sequence, Variant};
    use crate::scene::TemplateKind;

    #[test]
    fn roundtrip_and_corruption() {
        let s = generate_scene(TemplateKind::AbsenceChange, 2);
        let seq = featurize_sequence(&s, s.cast()[0], Variant::Standard).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_feature_cache(&path, &seq).unwrap();
        let back = read_feature_cache(&path).unwrap();
        assert_eq!((back.t, back.d), (8, 2016));
        assert_eq!(back.data, seq.data);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_feature_cache(&path), Err(ReprError::Cache { .. })));
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_feature_cache(&path), Err(ReprError::Cache { .. })));
    }
}
