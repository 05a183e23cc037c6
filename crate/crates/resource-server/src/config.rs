use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::server::ValidationMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// `in-process` is the only endpoint currently supported.
    pub chain_endpoint: String,
    pub validation_mode: ValidationMode,
    /// Journal file; the store is memory-only when absent.
    pub journal_path: Option<PathBuf>,
    /// Documents to ingest at startup.
    pub dataset: Option<PathBuf>,
    /// Hex seed for the server's chain identity.
    pub key_seed: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            chain_endpoint: "in-process".into(),
            validation_mode: ValidationMode::Committed,
            journal_path: None,
            dataset: None,
            key_seed: None,
        }
    }
}

impl ServerConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    }
}
