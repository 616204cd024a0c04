use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::report::to_compact_string;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Format> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(crate::Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// Everything that determines a run's output. Unset parameters are omitted
/// from the canonical form, so adding a new optional parameter does not
/// change existing digests.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RunConfig {
    pub command: String,
    /// Canonical law text, whatever form it was given in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
    pub seed: u64,
    pub format: Format,
    /// Where the output goes; not part of the digest.
    #[serde(skip)]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn canonical(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Single-line canonical JSON with sorted keys.
    pub fn canonical_string(&self) -> String {
        to_compact_string(&self.canonical())
    }

    /// SHA-256 of the canonical string, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_string().as_bytes()))
    }
}
