//! Run configuration: flat TOML with one nesting level of sections.
//!
//! ```toml
//! [domain]
//! name = "ball"          # builtin, or "custom" with a rho table
//! n = 2
//!
//! [symbol]
//! q = 1
//! rays = [[0.0, 0.0, -1.0], [1.0, 0.0, -2.0]]
//! magnitudes = [4.0, 8.0, 16.0, 32.0]
//! phi_prime = [0.0, 0.5]
//!
//! [verify]
//! suites = ["lambda0", "residues"]
//!
//! [output]
//! format = "json"
//! jobs = 0               # 0 = DNOLAB_JOBS env, then all cores
//! ```
//!
//! Custom domains supply the defining polynomial as a term table:
//! `rho = [{ re = 1.0, z = [1, 0], zbar = [1, 0] }, …]` (monomial
//! coefficient times z^z · z̄^zbar), plus an explicit boundary `point`.

use anyhow::{bail, Context, Result};
use dnolab_core::geometry::{
    build_chart, normalize_defining, BoundaryChart, Domain, Poly,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub symbol: SymbolSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Builtin name (`halfspace-flat`, `siegel`, `ball`, `weak-q4`) or
    /// `custom` with a `rho` table.
    pub name: String,
    pub n: usize,
    /// Boundary base point (2n real coordinates); defaults to the builtin's
    /// standard point.  Required for custom domains.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    /// Defining-polynomial terms for `name = "custom"`.
    #[serde(default)]
    pub rho: Vec<RhoTerm>,
    /// Optional chart-radius override.
    #[serde(default)]
    pub chart_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RhoTerm {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    /// Powers of z₁…z_n.
    pub z: Vec<u8>,
    /// Powers of z̄₁…z̄_n.
    pub zbar: Vec<u8>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSection {
    /// Form degree; boundary rows exist for 1 ≤ q ≤ n−1.
    pub q: usize,
    /// Chart evaluation point (2n−1 coordinates); defaults to the center.
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    /// Frequency ray directions (each 2n−1 components, nonzero).
    #[serde(default)]
    pub rays: Vec<Vec<f64>>,
    /// Positive, strictly increasing magnitudes; ξ = magnitude · ray.
    #[serde(default = "default_magnitudes")]
    pub magnitudes: Vec<f64>,
    /// φ′(0) values; 0 runs the unweighted operator.
    #[serde(default = "default_phi")]
    pub phi_prime: Vec<f64>,
}

fn default_magnitudes() -> Vec<f64> {
    vec![4.0, 8.0, 16.0, 32.0]
}

fn default_phi() -> Vec<f64> {
    vec![0.0]
}

impl Default for SymbolSection {
    fn default() -> Self {
        SymbolSection {
            q: 1,
            x: None,
            rays: Vec::new(),
            magnitudes: default_magnitudes(),
            phi_prime: default_phi(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Suites to run when the command line does not name one.
    #[serde(default = "all_suites")]
    pub suites: Vec<String>,
}

pub fn all_suites() -> Vec<String> {
    SUITE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// The verification suites, in canonical execution order.
pub const SUITE_NAMES: [&str; 9] = [
    "forms",
    "residues",
    "lambda0",
    "ode",
    "strip",
    "cancellation",
    "crosscheck",
    "microlocal",
    "kohn",
];

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            suites: all_suites(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// "json" or "csv".
    #[serde(default = "default_format")]
    pub format: String,
    /// Worker threads for sweeps; 0 defers to DNOLAB_JOBS, then all cores.
    #[serde(default)]
    pub jobs: usize,
}

fn default_format() -> String {
    "json".to_string()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: default_format(),
            jobs: 0,
        }
    }
}

impl RunConfig {
    /// Parses and validates a TOML configuration.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).context("config parse error")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let n = self.domain.n;
        if n < 2 {
            bail!("domain.n = {n}: domains live in C^n with n >= 2");
        }
        let q = self.symbol.q;
        if !(1..n).contains(&q) {
            bail!("symbol.q = {q}: boundary rows exist for 1 <= q <= n-1 = {}", n - 1);
        }
        if self.domain.name == "custom" {
            if self.domain.rho.is_empty() {
                bail!("domain.name = \"custom\" requires a nonempty domain.rho term table");
            }
            if self.domain.point.is_none() {
                bail!("custom domains need an explicit boundary domain.point");
            }
        }
        if let Some(p) = &self.domain.point {
            if p.len() != 2 * n {
                bail!(
                    "domain.point has {} coordinates; need 2n = {}",
                    p.len(),
                    2 * n
                );
            }
        }
        if let Some(x) = &self.symbol.x {
            if x.len() != 2 * n - 1 {
                bail!(
                    "symbol.x has {} coordinates; chart points have 2n-1 = {}",
                    x.len(),
                    2 * n - 1
                );
            }
        }
        let mags = &self.symbol.magnitudes;
        if mags.is_empty() {
            bail!("symbol.magnitudes must be nonempty");
        }
        for w in mags.windows(2) {
            if !(w[0] > 0.0 && w[1] > w[0]) {
                bail!(
                    "symbol.magnitudes must be positive and strictly increasing, got {:?}",
                    mags
                );
            }
        }
        if !(mags[0] > 0.0) {
            bail!("symbol.magnitudes must be positive, got {:?}", mags);
        }
        for (i, ray) in self.symbol.rays.iter().enumerate() {
            if ray.len() != 2 * n - 1 {
                bail!(
                    "symbol.rays[{i}] has {} components; frequencies have 2n-1 = {}",
                    ray.len(),
                    2 * n - 1
                );
            }
            if ray.iter().all(|v| *v == 0.0) {
                bail!("symbol.rays[{i}] is the zero direction");
            }
        }
        if self.symbol.phi_prime.is_empty() {
            bail!("symbol.phi_prime must be nonempty (use [0.0] for the unweighted operator)");
        }
        for s in &self.verify.suites {
            if !SUITE_NAMES.contains(&s.as_str()) {
                bail!(
                    "unknown verify suite `{s}`; valid suites: {}",
                    SUITE_NAMES.join(", ")
                );
            }
        }
        match self.output.format.as_str() {
            "json" | "csv" => {}
            other => bail!("output.format = `{other}`; use \"json\" or \"csv\""),
        }
        Ok(())
    }

    /// Ray directions, falling back to the transverse ψ⁻ ray and one oblique
    /// ray when the config leaves them empty.
    pub fn rays(&self) -> Vec<Vec<f64>> {
        if !self.symbol.rays.is_empty() {
            return self.symbol.rays.clone();
        }
        let dim = 2 * self.domain.n - 1;
        let mut down = vec![0.0; dim];
        down[dim - 1] = -1.0;
        let mut oblique = vec![0.0; dim];
        oblique[0] = 1.0;
        oblique[dim - 1] = -2.0;
        vec![down, oblique]
    }

    /// Chart evaluation point (defaults to the center).
    pub fn chart_point(&self) -> Vec<f64> {
        self.symbol
            .x
            .clone()
            .unwrap_or_else(|| vec![0.0; 2 * self.domain.n - 1])
    }

    /// Builds the boundary chart this configuration describes.
    pub fn build_chart(&self) -> Result<BoundaryChart> {
        let domain = if self.domain.name == "custom" {
            let mut p = Poly::new(self.domain.n);
            for term in &self.domain.rho {
                if term.z.len() != self.domain.n || term.zbar.len() != self.domain.n {
                    bail!(
                        "rho term powers must each have n = {} entries",
                        self.domain.n
                    );
                }
                p = p.term(
                    num_complex::Complex64::new(term.re, term.im),
                    &term.z,
                    &term.zbar,
                );
            }
            Domain::from_poly("custom", p).context("invalid custom defining polynomial")?
        } else {
            Domain::builtin(&self.domain.name, self.domain.n)
                .with_context(|| format!("unknown builtin domain `{}`", self.domain.name))?
        };
        let point = self
            .domain
            .point
            .clone()
            .unwrap_or_else(|| domain.default_base_point());
        let normalized = normalize_defining(&domain, &point)
            .context("defining-function normalization failed at the base point")?;
        build_chart(&normalized, &point, self.domain.chart_radius)
            .context("chart construction failed")
    }

    /// Effective worker count: explicit CLI value, then config, then
    /// DNOLAB_JOBS, then 0 (= rayon default, all cores).
    pub fn jobs(&self, cli_jobs: Option<usize>) -> usize {
        if let Some(j) = cli_jobs {
            return j;
        }
        if self.output.jobs > 0 {
            return self.output.jobs;
        }
        std::env::var("DNOLAB_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    }
}
