//! Versioned JSON reports. All content fields are deterministic under a
//! fixed config; wall-clock timing sits in a single trailing field so
//! byte-level comparisons can strip it.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    /// Echo of the effective configuration, sorted by key.
    pub config: BTreeMap<String, String>,
    /// Counter-derived sub-seed assignment, in derivation order.
    pub seeds: Vec<SeedRecord>,
    /// Command-specific payload.
    pub outputs: Value,
    /// Milliseconds; the only nondeterministic field.
    pub timing_ms: u128,
}

#[derive(Debug, Serialize)]
pub struct SeedRecord {
    pub task: String,
    pub seed: u64,
}

impl Report {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            seeds: Vec::new(),
            outputs: Value::Null,
            timing_ms: 0,
        }
    }

    pub fn record_seeds(&mut self, log: &[(String, u64)]) {
        self.seeds = log
            .iter()
            .map(|(task, seed)| SeedRecord {
                task: task.clone(),
                seed: *seed,
            })
            .collect();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).context("serializing report")?;
        std::fs::write(path, json + "\n")
            .with_context(|| format!("writing report to {}", path.display()))?;
        Ok(())
    }
}

/// Formats a float so that reports are stable across runs: finite values
/// via ryu-style shortest form, non-finite as explicit sentinels.
pub fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_nan() {
        Value::String("nan".into())
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}
