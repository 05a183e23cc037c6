use permchain_core::crypto::{hash, Digest32};
use serde::{Deserialize, Serialize};

/// One patient's clinical-trial record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalTrialDocument {
    pub patient_id: String,
    pub name: String,
    pub contact: String,
    /// Free-form trial data.
    pub data: serde_json::Value,
}

impl ClinicalTrialDocument {
    /// Compact JSON with object keys sorted at every depth, so equal
    /// documents always serialize to equal bytes.
    pub fn canonical_json(&self) -> String {
        // serde_json's default map is ordered by key; going through Value
        // normalizes the nested data object as well.
        serde_json::to_value(self)
            .expect("document is representable as JSON")
            .to_string()
    }

    pub fn data_hash(&self) -> Digest32 {
        hash(self.canonical_json().as_bytes())
    }
}
