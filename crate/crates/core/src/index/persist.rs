//! Canonical, digest-protected index files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{EntityIndex, SCHEMA};
use crate::canonical::{sha256_hex, to_canonical_string, to_canonical_value};
use crate::error::{Error, Result};

const DIGEST_FIELD: &str = "content_digest";

/// Canonical file bytes for `index`.
pub fn to_bytes(index: &EntityIndex) -> Result<Vec<u8>> {
    let mut value = to_canonical_value(index)?;
    let body = to_canonical_string(&value)?;
    let digest = sha256_hex(body.as_bytes());
    value
        .as_object_mut()
        .expect("index serializes to an object")
        .insert(DIGEST_FIELD.into(), Value::String(digest));
    Ok(to_canonical_string(&value)?.into_bytes())
}

pub fn from_bytes(bytes: &[u8]) -> Result<EntityIndex> {
    let mut value: Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Corrupt(format!("not a JSON document: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Corrupt("top level is not an object".into()))?;
    match obj.get("schema").and_then(Value::as_str) {
        Some(SCHEMA) => {}
        Some(other) => {
            return Err(Error::UnsupportedSchema {
                found: other.to_owned(),
                expected: SCHEMA,
            })
        }
        None => return Err(Error::Corrupt("missing schema field".into())),
    }
    let stored = match obj.remove(DIGEST_FIELD) {
        Some(Value::String(s)) => s,
        _ => return Err(Error::Corrupt("missing content digest".into())),
    };
    let actual = sha256_hex(to_canonical_string(&value)?.as_bytes());
    if stored != actual {
        return Err(Error::Corrupt(format!(
            "content digest mismatch: file says {stored}, content hashes to {actual}"
        )));
    }
    let index: EntityIndex =
        serde_json::from_value(value).map_err(|e| Error::Corrupt(format!("bad index structure: {e}")))?;
    index.validate()?;
    Ok(index)
}

/// Write `index` to `path` through a temporary file in the same directory.
pub fn save_index(index: &EntityIndex, path: &Path) -> Result<()> {
    let bytes = to_bytes(index)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<EntityIndex> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, SegmentationPolicy, SentenceSplitter};
    use crate::embedding::LocalEmbedder;
    use crate::extraction::LocalExtractor;
    use crate::index::{build_index, Pipeline};
    use crate::tokenizer::Tokenizer;

    fn sample() -> EntityIndex {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let c = Corpus::from_documents(
            [("d", "Marie Curie moved to Paris. She studied physics. Pierre Curie joined her.")],
            SegmentationPolicy::default(),
            &SentenceSplitter::default(),
            Tokenizer::default(),
        )
        .unwrap();
        build_index(&c, &Pipeline::new(&x, &e)).unwrap()
    }

    #[test]
    fn round_trip_and_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.json");
        let idx = sample();
        save_index(&idx, &path).unwrap();
        let first = fs::read(&path).unwrap();
        assert_eq!(load_index(&path).unwrap(), idx);
        save_index(&sample(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert!(!String::from_utf8(first).unwrap().contains(": "));
    }

    #[test]
    fn rejects_old_schema_truncation_and_tampering() {
        let bytes = to_bytes(&sample()).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let old = text.replace(SCHEMA, "slimrag-index/v0");
        assert!(matches!(from_bytes(old.as_bytes()), Err(Error::UnsupportedSchema { .. })));
        assert!(matches!(from_bytes(&bytes[..bytes.len() / 2]), Err(Error::Corrupt(_))));
        let tampered = text.replace("\"paris\"", "\"paria\"");
        assert!(matches!(from_bytes(tampered.as_bytes()), Err(Error::Corrupt(_))));
    }

    #[test]
    fn failed_save_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("idx.json");
        assert!(save_index(&sample(), &path).is_err());
        assert!(!path.exists());
    }
}
