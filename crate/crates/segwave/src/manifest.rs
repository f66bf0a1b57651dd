//! Reproducibility manifest attached to every run's output.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SegError};

/// Everything needed to reproduce a run bit-identically: tool version, the
/// resolved configuration, the seed, and the input digest.
///
/// Timestamps are informational and serialized only when set, so default
/// outputs stay byte-identical across repeated runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

impl RunManifest {
    pub fn for_config<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| SegError::InvalidInput(format!("unserializable config: {e}")))?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            source_digest: None,
            started_at: None,
            finished_at: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_omitted_until_set() {
        let manifest = RunManifest::for_config("segment", 7, &42u32).unwrap();
        let json = serde_json::to_string(&manifest).unwrap();
        assert!(!json.contains("started_at"));
        assert!(!json.contains("source_digest"));
        let mut stamped = manifest;
        stamped.started_at = Some("2026-01-01T00:00:00Z".into());
        let json = serde_json::to_string(&stamped).unwrap();
        assert!(json.contains("started_at"));
    }
}
