//! Canonical JSON: sorted object keys, no insignificant whitespace, UTF-8.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn to_canonical_value<T: Serialize>(value: &T) -> serde_json::Result<Value> {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled,
    // so converting through Value already sorts keys. Re-sort anyway so a
    // feature flip elsewhere in the dependency graph cannot change bytes.
    Ok(sort_keys(serde_json::to_value(value)?))
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_canonical_value(value)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn canonical_digest<T: Serialize>(value: &T) -> serde_json::Result<String> {
    Ok(sha256_hex(to_canonical_string(value)?.as_bytes()))
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_sorted_no_whitespace() {
        let mut map = HashMap::new();
        map.insert("z", vec![1, 2]);
        map.insert("a", vec![3]);
        assert_eq!(to_canonical_string(&map).unwrap(), r#"{"a":[3],"z":[1,2]}"#);
    }

    #[test]
    fn digest_is_stable() {
        let a = canonical_digest(&serde_json::json!({"b": 1, "a": 2})).unwrap();
        let b = canonical_digest(&serde_json::json!({"a": 2, "b": 1})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
    }
}
