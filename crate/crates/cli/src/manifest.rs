//! Run manifest embedded in every output.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything that determines an output body, plus the wall-clock duration.
///
/// The CSV header carries every field except `duration_s`, so reruns with
/// the same inputs produce byte-identical files; the duration goes to the
/// `<out>.manifest.json` sidecar and to stderr.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: Option<u64>,
    /// Command-specific parameters in a fixed order.
    pub parameters: Vec<(String, String)>,
    pub tool_version: &'static str,
    pub duration_s: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(command: &'static str, config_path: &Path, config_bytes: &[u8], seed: u64) -> Self {
        Self {
            command,
            config_path: config_path.display().to_string(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            trials: None,
            parameters: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            duration_s: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    /// `# key=value` lines preceding the CSV header row.
    pub fn header(&self) -> String {
        let mut lines = vec![
            format!("# tool=cdfsched {}", self.tool_version),
            format!("# command={}", self.command),
            format!("# config={}", self.config_path),
            format!("# config_sha256={}", self.config_sha256),
            format!("# seed={}", self.seed),
        ];
        if let Some(t) = self.trials {
            lines.push(format!("# trials={t}"));
        }
        for (k, v) in &self.parameters {
            lines.push(format!("# {k}={v}"));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> String {
        let params: serde_json::Map<String, serde_json::Value> = self
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let v = serde_json::json!({
            "command": self.command,
            "config_path": self.config_path,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "trials": self.trials,
            "parameters": params,
            "tool_version": self.tool_version,
            "duration_s": self.duration_s,
        });
        serde_json::to_string_pretty(&v).expect("manifest serializes")
    }
}
