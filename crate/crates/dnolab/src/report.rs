//! Deterministic report structures: JSON and CSV serializations share the
//! same field names and the same fixed column orders, floats are printed
//! with 17 significant digits, and no timestamps or machine identifiers are
//! embedded — re-running a command on the same config produces byte-identical
//! output.

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Normalization flag embedded in every report: which Laplacian the symbols
/// describe.
pub const NORMALIZATION_FLAG: &str =
    "2*box (doubled complex Laplacian); defining function scaled to |grad rho| = 1 on the boundary";

/// Adjoint-convention flag embedded in every report.
pub const ADJOINT_FLAG: &str =
    "dbar-star is the chart-frame formal adjoint; divergence terms d_j = -div(lambda^j)";

/// 17-significant-digit float formatting used across all outputs.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Complex values as `re+imi` with the same precision.
pub fn fmt_c(z: Complex64) -> String {
    format!("{:.16e}{:+.16e}i", z.re, z.im)
}

/// Joins vector components with `;` (CSV cells stay comma-free).
pub fn fmt_vec_f(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(";")
}

pub fn fmt_vec_c(v: &[Complex64]) -> String {
    v.iter().map(|z| fmt_c(*z)).collect::<Vec<_>>().join(";")
}

/// SHA-256 of the raw configuration bytes (hex).
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub normalization: String,
    pub adjoint_convention: String,
}

impl ReportHeader {
    pub fn new(command: &str, config_hash: &str) -> Self {
        ReportHeader {
            tool: "dnolab".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            normalization: NORMALIZATION_FLAG.to_string(),
            adjoint_convention: ADJOINT_FLAG.to_string(),
        }
    }

    fn csv_comment_lines(&self) -> String {
        format!(
            "# tool: {}\n# version: {}\n# command: {}\n# config_hash: {}\n# normalization: {}\n# adjoint_convention: {}\n",
            self.tool,
            self.version,
            self.command,
            self.config_hash,
            self.normalization,
            self.adjoint_convention
        )
    }
}

/// One verification check.  `gating = false` marks stretch checks that are
/// reported but never affect the exit status.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    /// Behavior tag naming the verified property.
    pub tag: String,
    pub gating: bool,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub header: ReportHeader,
    pub checks: Vec<Check>,
    pub gating_total: usize,
    pub gating_passed: usize,
    /// True when every gating check passed.
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn new(header: ReportHeader, checks: Vec<Check>) -> Self {
        let gating_total = checks.iter().filter(|c| c.gating).count();
        let gating_passed = checks.iter().filter(|c| c.gating && c.passed).count();
        VerifyReport {
            header,
            all_passed: gating_passed == gating_total,
            gating_total,
            gating_passed,
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.csv_comment_lines();
        out.push_str("suite,name,tag,gating,passed,measured,tolerance,note\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_escape(&c.suite),
                csv_escape(&c.name),
                csv_escape(&c.tag),
                c.gating,
                c.passed,
                csv_escape(&c.measured),
                csv_escape(&c.tolerance),
                csv_escape(&c.note),
            ));
        }
        out.push_str(&format!(
            "# gating: {}/{} passed\n",
            self.gating_passed, self.gating_total
        ));
        out
    }

    pub fn render(&self, format: &str) -> String {
        match format {
            "csv" => self.to_csv(),
            _ => self.to_json(),
        }
    }
}

/// Generic fixed-column table (symbol tables, sweeps, chart dumps).  The
/// JSON rendering carries the same `columns` list and row vectors as the
/// CSV, so the two formats mirror each other exactly.
#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub header: ReportHeader,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TableReport {
    pub fn new(header: ReportHeader, columns: &[&str]) -> Self {
        TableReport {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.csv_comment_lines();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(
                &row.iter()
                    .map(|cell| csv_escape(cell))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: &str) -> String {
        match format {
            "csv" => self.to_csv(),
            _ => self.to_json(),
        }
    }
}

/// Quotes a CSV cell when needed (commas, quotes, newlines).
pub fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
