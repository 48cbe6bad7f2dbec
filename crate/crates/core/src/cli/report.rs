//! Verification reports and atomic output.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub inputs: Value,
    pub inputs_digest: String,
    pub expected: f64,
    pub computed: f64,
    pub error: f64,
    pub error_kind: ErrorKind,
    pub tolerance: f64,
    pub pass: bool,
    /// Wall time; only recorded on request since it breaks byte-identical output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    /// Suite-specific results, flattened into the top-level object.
    #[serde(flatten)]
    pub summary: Map<String, Value>,
}

/// SHA-256 of the canonical JSON of the inputs.
pub fn digest(inputs: &Value) -> String {
    let bytes = serde_json::to_vec(inputs).expect("JSON values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects checks for one suite.
pub struct ReportBuilder {
    suite: String,
    checks: Vec<CheckRecord>,
    summary: Map<String, Value>,
    timings: bool,
    started: Instant,
}

impl ReportBuilder {
    pub fn new(suite: &str, timings: bool) -> Self {
        Self {
            suite: suite.to_string(),
            checks: Vec::new(),
            summary: Map::new(),
            timings,
            started: Instant::now(),
        }
    }

    /// Restarts the per-check clock.
    pub fn start(&mut self) {
        self.started = Instant::now();
    }

    pub fn check(&mut self, name: &str, inputs: Value, expected: f64, computed: f64, kind: ErrorKind, tolerance: f64) -> bool {
        let abs = (computed - expected).abs();
        let error = match kind {
            ErrorKind::Absolute => abs,
            ErrorKind::Relative => abs / expected.abs().max(f64::MIN_POSITIVE),
        };
        let pass = error <= tolerance && computed.is_finite();
        self.checks.push(CheckRecord {
            name: name.to_string(),
            inputs_digest: digest(&inputs),
            inputs,
            expected,
            computed,
            error,
            error_kind: kind,
            tolerance,
            pass,
            runtime_ms: self.timings.then(|| self.started.elapsed().as_secs_f64() * 1e3),
        });
        self.started = Instant::now();
        pass
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("summary values serialize"));
    }

    pub fn finish(self) -> VerificationReport {
        VerificationReport {
            suite: self.suite,
            pass: !self.checks.is_empty() && self.checks.iter().all(|c| c.pass),
            checks: self.checks,
            summary: self.summary,
        }
    }
}

/// Writes to a sibling temporary file and renames it over the target.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn report_round_trips() {
        let mut b = ReportBuilder::new("demo", false);
        b.check("a", json!({"x": 1}), 1.0, 1.0 + 1e-9, ErrorKind::Absolute, 1e-6);
        b.check("b", json!({"x": 2}), 2.0, 2.1, ErrorKind::Relative, 1e-2);
        b.summary("numeric", 1.5);
        let r = b.finish();
        assert!(!r.pass);
        assert!(r.checks[0].pass && !r.checks[1].pass);
        let text = to_json(&r);
        let back: VerificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.checks[0].inputs_digest, digest(&json!({"x": 1})));
        assert!(text.contains("\"numeric\": 1.5"));
        assert!(!text.contains("runtime_ms"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
