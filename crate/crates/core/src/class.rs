use std::fmt;

use serde::{Deserialize, Serialize};

/// Class label. Ordering of `ClassId`s is the canonical class order used for
/// feature blocks, score columns and tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(String);

impl ClassId {
    pub fn new(name: impl Into<String>) -> Self {
        ClassId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId(s.to_owned())
    }
}

impl From<String> for ClassId {
    fn from(s: String) -> Self {
        ClassId(s)
    }
}

/// Sorted, deduplicated class list.
pub fn canonical_classes<'a, I>(labels: I) -> Vec<ClassId>
where
    I: IntoIterator<Item = &'a ClassId>,
{
    let mut out: Vec<ClassId> = labels.into_iter().cloned().collect();
    out.sort();
    out.dedup();
    out
}
