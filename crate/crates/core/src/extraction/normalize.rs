use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A normalized entity name: NFC, lowercase, single-spaced, trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalEntity(String);

impl CanonicalEntity {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for CanonicalEntity {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for CanonicalEntity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        normalize_entity(s)
    }
}

pub fn normalize_entity(raw: &str) -> Result<CanonicalEntity> {
    let composed: String = raw.nfc().collect();
    let collapsed = composed.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::EmptyEntity);
    }
    // Lowercasing can produce decomposed sequences for a few code points.
    let folded: String = collapsed.to_lowercase().nfc().collect();
    Ok(CanonicalEntity(folded))
}
