//! Run configuration: a TOML document with one table per pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};

use koopman_lyap::cpa::{BBound, DEFAULT_B_SAFETY};
use koopman_lyap::{BoxDomain, KernelModel, Regularization, VectorField};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub system: SystemConfig,
    pub domain: BoxConfig,
    pub collocation: CollocationConfig,
    pub test_grid: TestGridConfig,
    pub cpa: CpaConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub equations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationConfig {
    pub grid_n: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Absolute ridge. When absent the ridge is `1e-10 * trace(A) / m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_fill_probe")]
    pub fill_probe_resolution: usize,
    #[serde(default)]
    pub dump_system: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestGridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpaConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_override: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_b_probe")]
    pub probe_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub sample_points: Vec<Vec<f64>>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { enabled: false, t_max: default_t_max(), dt: default_dt(), sample_points: vec![] }
    }
}

fn default_sigma() -> f64 {
    koopman_lyap::kernel::DEFAULT_SIGMA
}

fn default_fill_probe() -> usize {
    koopman_lyap::collocation::DEFAULT_FILL_PROBE_RESOLUTION
}

fn default_safety() -> f64 {
    DEFAULT_B_SAFETY
}

fn default_b_probe() -> usize {
    101
}

fn default_t_max() -> f64 {
    20.0
}

fn default_dt() -> f64 {
    1e-3
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read config {}", path.display()), e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1);
        let message = e.message().to_string();
        match line {
            Some(line) => CliError::validation(format!("config parse error at line {line}: {message}")),
            None => CliError::validation(format!("config parse error: {message}")),
        }
    })?;
    config.validate()?;
    Ok(config)
}

fn invalid(field: &str, why: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("invalid config field `{field}`: {why}"))
}

fn check_box(field: &str, lower: &[f64], upper: &[f64], dim: usize) -> Result<BoxDomain, CliError> {
    if lower.len() != dim || upper.len() != dim {
        return Err(invalid(field, format!("bounds must have {dim} entries")));
    }
    BoxDomain::new(lower.to_vec(), upper.to_vec()).map_err(|e| invalid(field, e))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let field = self.field()?;
        let d = field.dim();
        self.domain()?;
        self.test_domain()?;
        self.cpa_domain()?;
        if self.collocation.grid_n < 2 {
            return Err(invalid("collocation.grid_n", format!("must be at least 2, got {}", self.collocation.grid_n)));
        }
        self.kernel()?;
        if let Some(eta) = self.collocation.eta {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(invalid("collocation.eta", format!("must be finite and non-negative, got {eta}")));
            }
        }
        if self.collocation.fill_probe_resolution < 2 {
            return Err(invalid("collocation.fill_probe_resolution", "must be at least 2"));
        }
        if self.test_grid.resolution < 2 {
            return Err(invalid("test_grid.resolution", "must be at least 2"));
        }
        if d != 2 {
            return Err(invalid("system.equations", format!("certification needs a planar system, got {d} equations")));
        }
        if self.cpa.n < 2 {
            return Err(invalid("cpa.n", format!("must be at least 2, got {}", self.cpa.n)));
        }
        if !(self.cpa.safety >= 1.0) {
            return Err(invalid("cpa.safety", format!("must be at least 1, got {}", self.cpa.safety)));
        }
        if self.cpa.probe_resolution < 2 {
            return Err(invalid("cpa.probe_resolution", "must be at least 2"));
        }
        self.b_override()?;
        if !(self.oracle.t_max > 0.0) || !(self.oracle.dt > 0.0) || self.oracle.dt > self.oracle.t_max {
            return Err(invalid("oracle", "t_max and dt must be positive with dt <= t_max"));
        }
        if let Some(p) = self.oracle.sample_points.iter().find(|p| p.len() != d) {
            return Err(invalid("oracle.sample_points", format!("point {p:?} does not have {d} coordinates")));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<VectorField, CliError> {
        if self.system.equations.is_empty() {
            return Err(invalid("system.equations", "at least one equation is required"));
        }
        VectorField::parse(&self.system.equations).map_err(|e| invalid("system.equations", e))
    }

    pub fn dim(&self) -> usize {
        self.system.equations.len()
    }

    pub fn domain(&self) -> Result<BoxDomain, CliError> {
        check_box("domain", &self.domain.lower, &self.domain.upper, self.dim())
    }

    pub fn test_domain(&self) -> Result<BoxDomain, CliError> {
        check_box("test_grid", &self.test_grid.lower, &self.test_grid.upper, self.dim())
    }

    pub fn cpa_domain(&self) -> Result<BoxDomain, CliError> {
        check_box("cpa", &self.cpa.lower, &self.cpa.upper, self.dim())
    }

    pub fn kernel(&self) -> Result<KernelModel, CliError> {
        KernelModel::gaussian(self.collocation.sigma).map_err(|e| invalid("collocation.sigma", e))
    }

    pub fn regularization(&self) -> Regularization {
        match self.collocation.eta {
            Some(0.0) => Regularization::None,
            Some(eta) => Regularization::Absolute(eta),
            None => Regularization::default(),
        }
    }

    pub fn b_override(&self) -> Result<Option<BBound>, CliError> {
        self.cpa
            .b_override
            .clone()
            .map(|b| {
                if b.len() != self.dim() {
                    return Err(invalid("cpa.b_override", format!("must be {0}x{0}", self.dim())));
                }
                BBound::new(b).map_err(|e| invalid("cpa.b_override", e))
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"

[system]
equations = ["-x1", "-2*x2"]

[domain]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[collocation]
grid_n = 4

[test_grid]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
resolution = 5

[cpa]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
n = 4
"#;

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.collocation.sigma, 3.0);
        assert_eq!(c.collocation.eta, None);
        assert_eq!(c.regularization(), Regularization::default());
        assert_eq!(c.cpa.safety, 1.1);
        assert!(!c.oracle.enabled);
        assert!(c.b_override().unwrap().is_none());
    }

    #[test]
    fn grid_n_one_is_rejected() {
        let err = parse_config(&MINIMAL.replace("grid_n = 4", "grid_n = 1")).unwrap_err();
        assert!(err.to_string().contains("collocation.grid_n"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let err = parse_config(&MINIMAL.replace("\nn = 4\n", "\nn = = 4\n")).unwrap_err();
        assert!(err.to_string().contains("line 22"), "{err}");
        let err = parse_config(&MINIMAL.replace("grid_n = 4", "grid_n = 4\nsigmaa = 2")).unwrap_err();
        assert!(err.to_string().contains("line 13"), "{err}");
    }

    #[test]
    fn field_level_validation() {
        let cases = [
            (MINIMAL.replace("\"-2*x2\"", "\"-2*x3\""), "system.equations"),
            (MINIMAL.replace("upper = [1.0, 1.0]\n\n[collocation]", "upper = [-1.0, 1.0]\n\n[collocation]"), "`domain`"),
            (MINIMAL.replace("resolution = 5", "resolution = 1"), "test_grid.resolution"),
            (MINIMAL.replace("\nn = 4\n", "\nn = 4\nsafety = 0.5\n"), "cpa.safety"),
            (MINIMAL.replace("\nn = 4\n", "\nn = 4\nb_override = [[1.0]]\n"), "cpa.b_override"),
            (MINIMAL.replace("grid_n = 4", "grid_n = 4\nsigma = -1.0"), "collocation.sigma"),
        ];
        for (text, field) in cases {
            let err = parse_config(&text).unwrap_err();
            assert!(err.to_string().contains(field), "{field}: {err}");
        }
    }

    #[test]
    fn explicit_eta() {
        let c = parse_config(&MINIMAL.replace("grid_n = 4", "grid_n = 4\neta = 1e-10")).unwrap();
        assert_eq!(c.regularization(), Regularization::Absolute(1e-10));
        let c = parse_config(&MINIMAL.replace("grid_n = 4", "grid_n = 4\neta = 0.0")).unwrap();
        assert_eq!(c.regularization(), Regularization::None);
    }
}
