//! Run configuration: a TOML document with `[model]`, `[oracle]`, `[grid]`,
//! `[solver]`, `[checks]` and `[run]` sections.

use serde::{Deserialize, Serialize};

use crate::error::{GwError, Result};
use crate::fock::DEFAULT_BASIS_CAP;
use crate::model::{H1Variant, ModelConfig, Potential};

pub const DEFAULT_K: usize = 128;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Invariant suites selectable under `[checks] suites`.
pub const SUITES: [&str; 9] = [
    "mean-field",
    "oracle",
    "kernel",
    "hilbert",
    "screening",
    "convolution",
    "sum-rules",
    "g0w0",
    "solver",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "eight")]
    pub sites: usize,
    #[serde(default = "unit")]
    pub spacing: f64,
    /// `none`, `well` or `two-center`.
    #[serde(default = "well")]
    pub potential: String,
    /// Defaults to `n` for `well`, `n/2` per center for `two-center`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default = "unit")]
    pub eps_reg: f64,
    /// `bare`, `hartree` (self-consistent) or `hartree-fixed` with `density`.
    #[serde(default = "hartree")]
    pub h1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "basis_cap")]
    pub basis_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Grid scale `L`; the mean-field gap when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "zero_list")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "unit")]
    pub mixing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    /// Suite names, or `all`.
    #[serde(default = "all")]
    pub suites: Vec<String>,
    /// Expensive cross-checks (quadrature against closed forms).
    #[serde(default)]
    pub validate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn eight() -> usize {
    8
}
fn unit() -> f64 {
    1.0
}
fn well() -> String {
    "well".into()
}
fn hartree() -> String {
    "hartree".into()
}
fn yes() -> bool {
    true
}
fn basis_cap() -> usize {
    DEFAULT_BASIS_CAP
}
fn default_k() -> usize {
    DEFAULT_K
}
fn zero_list() -> Vec<f64> {
    vec![0.0]
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn all() -> Vec<String> {
    vec!["all".into()]
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            enabled: true,
            n: None,
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { k: DEFAULT_K, scale: None }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            enabled: true,
            lambda: zero_list(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            mixing: 1.0,
        }
    }
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            suites: all(),
            validate: false,
        }
    }
}


fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn section_before(text: &str, offset: usize) -> String {
    text[..offset.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map_or_else(String::new, |l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let start = e.span().map_or(0, |s| s.start);
        let line = line_of(text, start);
        let msg = e.message();
        match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            Some(key) => {
                let section = section_before(text, start);
                let section = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
                GwError::ConfigParse {
                    line,
                    msg: format!("unknown key '{key}' in {section} at line {line}"),
                }
            }
            None => GwError::ConfigParse {
                line,
                msg: msg.trim().to_string(),
            },
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn render_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| GwError::Input(format!("render config: {e}")))
}

fn field(name: &str, msg: impl Into<String>) -> GwError {
    GwError::ConfigField {
        field: name.into(),
        msg: msg.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if !(1..=3).contains(&m.dim) {
            return Err(field("model.dim", format!("must be 1, 2 or 3, got {}", m.dim)));
        }
        if m.sites < 2 {
            return Err(field("model.sites", "need at least 2 sites per axis"));
        }
        if !(m.spacing > 0.0) {
            return Err(field("model.spacing", "must be positive"));
        }
        if !(m.eps_reg > 0.0) {
            return Err(field("model.eps_reg", "must be positive"));
        }
        if m.n == 0 {
            return Err(field("model.n", "need at least one electron"));
        }
        self.potential()?;
        self.h1_variant()?;
        if self.grid.k < 8 || !self.grid.k.is_multiple_of(2) {
            return Err(field("grid.k", format!("must be even and at least 8, got {}", self.grid.k)));
        }
        if let Some(l) = self.grid.scale {
            if !(l > 0.0) {
                return Err(field("grid.scale", "must be positive"));
            }
        }
        let s = &self.solver;
        if s.enabled && s.lambda.is_empty() {
            return Err(field("solver.lambda", "list must not be empty when the solver is enabled"));
        }
        if s.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(field("solver.lambda", "values must be finite and ≥ 0"));
        }
        if !(s.tol > 0.0) {
            return Err(field("solver.tol", "must be positive"));
        }
        if !(s.mixing > 0.0 && s.mixing <= 1.0) {
            return Err(field("solver.mixing", "must lie in (0, 1]"));
        }
        if s.max_iter == 0 {
            return Err(field("solver.max_iter", "must be at least 1"));
        }
        for name in &self.checks.suites {
            if name != "all" && !SUITES.contains(&name.as_str()) {
                return Err(field("checks.suites", format!("unknown suite '{name}'")));
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        let m = &self.model;
        match m.potential.as_str() {
            "none" => Ok(Potential::None),
            "well" => Ok(Potential::Well {
                charge: m.charge.unwrap_or(m.n as f64),
            }),
            "two-center" => Ok(Potential::TwoCenter {
                charge: m.charge.unwrap_or(0.5 * m.n as f64),
                separation: m
                    .separation
                    .ok_or_else(|| field("model.separation", "required for a two-center potential"))?,
            }),
            other => Err(field("model.potential", format!("unknown shape '{other}'"))),
        }
    }

    pub fn h1_variant(&self) -> Result<H1Variant> {
        match self.model.h1.as_str() {
            "bare" => Ok(H1Variant::Bare),
            "hartree" => Ok(H1Variant::HartreeSelfConsistent),
            "hartree-fixed" => Ok(H1Variant::HartreeFixed(
                self.model
                    .density
                    .clone()
                    .ok_or_else(|| field("model.density", "required for h1 = \"hartree-fixed\""))?,
            )),
            other => Err(field("model.h1", format!("unknown variant '{other}'"))),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig {
            dim: self.model.dim,
            sites_per_axis: self.model.sites,
            spacing: self.model.spacing,
            potential: self.potential()?,
            eps_reg: self.model.eps_reg,
            h1: self.h1_variant()?,
            n_elec: self.model.n,
        })
    }

    pub fn oracle_n(&self) -> usize {
        self.oracle.n.unwrap_or(self.model.n)
    }

    pub fn suite_enabled(&self, name: &str) -> bool {
        self.checks.suites.iter().any(|s| s == "all" || s == name)
    }

    /// The reference chain: eight sites, two electrons, everything else default.
    pub fn reference() -> RunConfig {
        parse_config("[model]\nn = 2\n").expect("reference config parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c = parse_config("[model]\nn = 2\n").unwrap();
        assert_eq!(c.grid.k, 128);
        assert_eq!(c.grid.scale, None);
        assert_eq!(c.solver.lambda, vec![0.0]);
        assert_eq!(c.solver.tol, 1e-8);
        assert_eq!(c.model.sites, 8);
        assert!(c.oracle.enabled);
        assert_eq!(c.model_config().unwrap(), ModelConfig::chain(8, 2));
    }

    #[test]
    fn unknown_key_names_section_and_line() {
        let err = parse_config("[model]\nn = 2\nfoo = 1\n").unwrap_err();
        assert_eq!(err.to_string(), "config line 3: unknown key 'foo' in [model] at line 3");
        let err = parse_config("[model]\nn = 2\n\n[grid]\nk = 64\nbar = true\n").unwrap_err();
        assert!(err.to_string().contains("unknown key 'bar' in [grid] at line 6"), "{err}");
    }

    #[test]
    fn lambda_list() {
        let c = parse_config("[model]\nn = 2\n[solver]\nlambda = [0.0, 0.05, 0.1]\n").unwrap();
        assert_eq!(c.solver.lambda.len(), 3);
    }

    #[test]
    fn semantic_errors_name_the_field() {
        for (text, name) in [
            ("[model]\nn = 2\n[grid]\nk = 7\n", "grid.k"),
            ("[model]\nn = 2\npotential = \"moat\"\n", "model.potential"),
            ("[model]\nn = 2\n[solver]\nlambda = []\n", "solver.lambda"),
            ("[model]\nn = 2\npotential = \"two-center\"\n", "model.separation"),
            ("[model]\nn = 2\n[checks]\nsuites = [\"vibes\"]\n", "checks.suites"),
        ] {
            let e = parse_config(text).unwrap_err().to_string();
            assert!(e.contains(name), "{e}");
        }
        assert!(matches!(parse_config("[model\nn = 2"), Err(GwError::ConfigParse { line: 1, .. })));
    }

    #[test]
    fn round_trip() {
        let text = "[model]\nn = 3\nsites = 6\npotential = \"two-center\"\nseparation = 2.5\n\
                    [grid]\nk = 64\nscale = 0.3\n[solver]\nlambda = [0.0, 0.1]\nmixing = 0.7\n\
                    [checks]\nsuites = [\"oracle\"]\n[run]\nout = \"x\"\nseed = 9\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&render_config(&c).unwrap()).unwrap(), c);
        let r = RunConfig::reference();
        assert_eq!(parse_config(&render_config(&r).unwrap()).unwrap(), r);
    }
}
