//! Verification reports and their JSON/CSV serialization.
//!
//! All floating-point output is written in 17-significant-digit scientific
//! notation so reports can be re-checked bit for bit. Digests are SHA-256
//! over the canonical JSON with the timestamp cleared.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One measured case of a suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub inputs_digest: String,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
    pub detail: String,
}

/// A suite or experiment report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub config_digest: String,
    pub tolerances: BTreeMap<String, f64>,
    pub fitted: BTreeMap<String, f64>,
    pub cases: Vec<CaseRecord>,
    pub pass: bool,
    pub runtime_ms: u64,
    pub notes: Vec<String>,
    /// wall-clock timestamp; excluded from digests
    pub generated_unix_ms: u64,
}

impl Report {
    pub fn new(suite: &str, seed: u64, config_digest: String) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            suite: suite.to_string(),
            seed,
            config_digest,
            tolerances: BTreeMap::new(),
            fitted: BTreeMap::new(),
            cases: Vec::new(),
            pass: false,
            runtime_ms: 0,
            notes: Vec::new(),
            generated_unix_ms: 0,
        }
    }

    pub fn stamp(&mut self) {
        self.generated_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
    }

    /// Digest over the canonical JSON with the timestamp cleared.
    pub fn digest(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.generated_unix_ms = 0;
        Ok(digest_hex(&to_json_17(&clone)?))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, to_json_17(self)?)?;
        Ok(())
    }

    /// Per-case table.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
        w.write_record(["id", "inputs_digest", "measured", "bound", "ratio", "pass", "detail"])
            .map_err(std::io::Error::other)?;
        for c in &self.cases {
            w.write_record([
                c.id.as_str(),
                c.inputs_digest.as_str(),
                &sci17(c.measured),
                &sci17(c.bound),
                &sci17(c.ratio),
                if c.pass { "true" } else { "false" },
                c.detail.as_str(),
            ])
            .map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17-significant-digit scientific notation; non-finite values become "null".
pub fn sci17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

struct Sci17Formatter;

impl serde_json::ser::Formatter for Sci17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(sci17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize any value to JSON with full-precision floats.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("json is utf8"))
}

pub fn digest_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(16);
    for b in digest.iter().take(8) {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Least-squares slope of y against x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
