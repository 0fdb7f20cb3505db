//! Run configuration: JSON schema, validation and the derived problem.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use serde::Deserialize;
use sfrac_core::coeff::{parse_expr_xyz, Expr};
use sfrac_core::{
    BoxDomain, CoefficientProfile, EvolutionConfig, Grid, ImaginaryUnit, QuadratureSpec, QuatField, RealField,
    Scheme, SolverConfig, SolverMethod, VectorOperator,
};

/// Configuration problems; always exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Check,
    Spectrum,
    Palpha,
    Evolve,
    Verify,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub grid: GridSection,
    pub coefficients: Vec<String>,
    pub alpha: f64,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub task: Task,
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dims: usize,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
}

/// `"e1"`, `"e2"`, `"e3"` or a nonzero vector `[x, y, z]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UnitSpec {
    Name(String),
    Vector([f64; 3]),
}

impl UnitSpec {
    fn resolve(&self) -> anyhow::Result<ImaginaryUnit> {
        match self {
            UnitSpec::Name(n) => match n.as_str() {
                "e1" => Ok(ImaginaryUnit::E1),
                "e2" => Ok(ImaginaryUnit::E2),
                "e3" => Ok(ImaginaryUnit::E3),
                other => bail!(ConfigError(format!("unknown imaginary unit {other:?}"))),
            },
            UnitSpec::Vector([x, y, z]) => {
                ImaginaryUnit::new(*x, *y, *z).map_err(|e| ConfigError(format!("quadrature.j: {e}")).into())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub n_sing: usize,
    pub n_tail: usize,
    pub t_split: f64,
    pub j: UnitSpec,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self { n_sing: 64, n_tail: 64, t_split: 1.0, j: UnitSpec::Name("e1".into()) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { method: d.method, tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub beta_mode: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")).into())
    }
}

/// Everything derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub task: Task,
    pub grid: Grid,
    pub profiles: Vec<CoefficientProfile>,
    pub op: Arc<VectorOperator>,
    pub spec: QuadratureSpec,
    pub solver: SolverConfig,
    pub initial: Option<Expr>,
    pub evolution: Option<EvolutionConfig>,
    pub beta_mode: bool,
}

fn cfg_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

impl Problem {
    /// Checks the whole configuration before any numerical work.
    pub fn from_config(cfg: &RunConfig) -> anyhow::Result<Self> {
        let d = cfg.domain.dims;
        ensure!((1..=3).contains(&d), ConfigError(format!("domain.dims must be 1, 2 or 3, got {d}")));
        ensure!(
            cfg.domain.lengths.len() == d && cfg.grid.n.len() == d && cfg.coefficients.len() == d,
            ConfigError(format!(
                "domain.lengths ({}), grid.n ({}) and coefficients ({}) must each have dims = {d} entries",
                cfg.domain.lengths.len(),
                cfg.grid.n.len(),
                cfg.coefficients.len()
            ))
        );
        let domain = BoxDomain::new(cfg.domain.lengths.clone()).map_err(cfg_err)?;
        let grid = Grid::new(domain, cfg.grid.n.clone()).map_err(cfg_err)?;
        let profiles = CoefficientProfile::parse_all(&cfg.coefficients, grid.domain())
            .map_err(|e| cfg_err(format!("coefficients: {e}")))?;
        let op = Arc::new(VectorOperator::new(grid, &profiles).map_err(cfg_err)?);

        let q = &cfg.quadrature;
        let spec = QuadratureSpec { alpha: cfg.alpha, j: q.j.resolve()?, t_split: q.t_split, n_sing: q.n_sing, n_tail: q.n_tail };
        spec.validate().map_err(cfg_err)?;
        let solver = SolverConfig {
            method: cfg.solver.method,
            tol: cfg.solver.tol,
            max_iter: cfg.solver.max_iter,
            ..SolverConfig::default()
        };
        solver.validate().map_err(cfg_err)?;

        let initial = cfg
            .initial
            .as_deref()
            .map(|t| parse_expr_xyz(t).map_err(|e| cfg_err(format!("initial: {e}"))))
            .transpose()?;
        if matches!(cfg.task, Task::Palpha | Task::Evolve) && initial.is_none() {
            bail!(ConfigError(format!("task {:?} needs an initial expression", cfg.task)));
        }

        let (evolution, beta_mode) = match (&cfg.time, cfg.task) {
            (Some(t), _) => {
                let ev = EvolutionConfig { dt: t.dt, t_end: t.t_end, scheme: t.scheme, snapshot_every: t.snapshot_every };
                ev.validate().map_err(cfg_err)?;
                if t.beta_mode && !(cfg.alpha > 0.5 && cfg.alpha < 1.0) {
                    bail!(ConfigError(format!("beta_mode needs alpha in (1/2, 1), got {}", cfg.alpha)));
                }
                (Some(ev), t.beta_mode)
            }
            (None, Task::Evolve) => bail!(ConfigError("task evolve needs a time section".into())),
            (None, _) => (None, false),
        };
        Ok(Self { task: cfg.task, grid, profiles, op, spec, solver, initial, evolution, beta_mode })
    }

    /// The initial expression sampled at the interior nodes.
    pub fn initial_field(&self) -> anyhow::Result<RealField> {
        let expr = self.initial.as_ref().context("no initial expression")?;
        let values = (0..self.grid.len())
            .map(|i| expr.eval(&self.grid.coords(i)))
            .collect::<Result<Vec<f64>, _>>()
            .context("evaluating the initial expression")?;
        Ok(RealField::from_values(self.grid, values)?)
    }

    /// The initial field, or a smooth product of sines when none is given.
    pub fn probe_field(&self) -> anyhow::Result<QuatField> {
        if self.initial.is_some() {
            return Ok(QuatField::from_real(&self.initial_field()?));
        }
        let lengths = self.grid.domain().lengths().to_vec();
        let f = RealField::from_fn(self.grid, |x| {
            lengths.iter().enumerate().fold(1.0, |acc, (l, len)| {
                let s = std::f64::consts::PI * x[l] / len;
                acc * (s.sin() + 0.25 * (2.0 * s).sin())
            })
        });
        Ok(QuatField::from_real(&f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "domain": {"dims": 1, "lengths": [3.141592653589793]},
        "grid": {"n": [31]},
        "coefficients": ["1"],
        "alpha": 0.5,
        "task": "palpha",
        "initial": "sin(2*x)"
    }"#;

    fn is_config_error(r: anyhow::Result<impl std::fmt::Debug>) -> bool {
        r.unwrap_err().downcast_ref::<ConfigError>().is_some()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json(BASE).unwrap();
        let p = Problem::from_config(&cfg).unwrap();
        assert_eq!(p.spec.n_sing, 64);
        assert_eq!(p.spec.j, ImaginaryUnit::E1);
        assert_eq!(p.solver.tol, 1e-10);
        assert_eq!(p.initial_field().unwrap().values.len(), 31);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = BASE.replace("\"alpha\"", "\"alpah\": 1, \"alpha\"");
        assert!(is_config_error(RunConfig::from_json(&bad)));
        let nested = BASE.replace("\"n\": [31]", "\"n\": [31], \"m\": 2");
        assert!(is_config_error(RunConfig::from_json(&nested)));
    }

    #[test]
    fn type_mismatch_is_rejected() {
        assert!(is_config_error(RunConfig::from_json(&BASE.replace("0.5", "\"half\""))));
    }

    #[test]
    fn semantic_errors() {
        for (from, to) in [
            ("\"dims\": 1", "\"dims\": 2"),
            ("\"alpha\": 0.5", "\"alpha\": 1.5"),
            ("[\"1\"]", "[\"1+\"]"),
            ("\"sin(2*x)\"", "\"sin(2*w)\""),
            ("\"task\": \"palpha\"", "\"task\": \"evolve\""),
        ] {
            let cfg = RunConfig::from_json(&BASE.replace(from, to));
            let res = cfg.and_then(|c| Problem::from_config(&c));
            assert!(is_config_error(res), "{to}");
        }
    }

    #[test]
    fn unit_spellings() {
        let cfg = RunConfig::from_json(&BASE.replace("\"task\"", "\"quadrature\": {\"j\": [0, 0, 2]}, \"task\"")).unwrap();
        assert_eq!(Problem::from_config(&cfg).unwrap().spec.j, ImaginaryUnit::E3);
        let cfg = RunConfig::from_json(&BASE.replace("\"task\"", "\"quadrature\": {\"j\": \"e4\"}, \"task\"")).unwrap();
        assert!(is_config_error(Problem::from_config(&cfg)));
    }

    #[test]
    fn beta_mode_needs_upper_half() {
        let with_time = BASE.replace(
            "\"task\": \"palpha\"",
            "\"task\": \"evolve\", \"time\": {\"dt\": 0.01, \"t_end\": 0.1, \"scheme\": \"crank-nicolson\", \"beta_mode\": true}",
        );
        let cfg = RunConfig::from_json(&with_time).unwrap();
        assert!(is_config_error(Problem::from_config(&cfg)));
        let cfg = RunConfig::from_json(&with_time.replace("0.5", "0.75")).unwrap();
        assert!(Problem::from_config(&cfg).unwrap().beta_mode);
    }
}
