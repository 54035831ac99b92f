use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use cumi::CumiError;

/// Metadata written next to every run's outputs.
///
/// Timestamps are Unix seconds. When `SOURCE_DATE_EPOCH` is set both take
/// that value, which makes the record itself byte-reproducible.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    artifact: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    started_unix: u64,
    finished_unix: u64,
    threads: usize,
    config: Value,
    outputs: Vec<String>,
}

fn now() -> u64 {
    if let Some(fixed) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
    {
        return fixed;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunRecord {
    pub fn start(command: &'static str, seed: u64) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            started_unix: now(),
            finished_unix: 0,
            threads: cumi::par::threads(),
            config: Value::Null,
            outputs: Vec::new(),
        }
    }

    /// Fills in the config and file list and writes the record to `path`.
    pub fn finish(mut self, config: Value, outputs: &[&str], path: &Path) -> cumi::Result<()> {
        self.config = config;
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self.finished_unix = now();
        let text = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(path, text).map_err(|e| CumiError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
