//! The run configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use kloop::mountainpass::SolverOptions;
use kloop::paths::{PathConstructor, DEFAULT_PATH_NODES};
use kloop::verify::VerifyThresholds;
use kloop::{CurvatureField, FieldSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "KLOOP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathOptions {
    pub nodes: usize,
    pub constructor: PathConstructor,
    /// Range of `lambda` the initial path must be certified for; defaults
    /// to the run's own `lambda` (or the grid's extent).
    pub lambda_range: Option<(f64, f64)>,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_PATH_NODES,
            constructor: PathConstructor::Auto,
            lambda_range: None,
        }
    }
}

fn default_n() -> usize {
    kloop::loopgeom::DEFAULT_NODES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("kloop-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSpec,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub path: PathOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub verify: VerifyThresholds,
    /// Recorded with every artifact; the pipeline itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.lambda, &self.lambda_grid) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("exactly one of lambda and lambda_grid must be given".into())
            }
            (Some(l), None) if !(l.is_finite() && *l != 0.0) => {
                return bad(format!("lambda must be finite and nonzero, got {l}"))
            }
            (None, Some(g)) if g.iter().any(|l| !(l.is_finite() && *l != 0.0)) => {
                return bad("lambda_grid entries must be finite and nonzero".into())
            }
            _ => {}
        }
        if self.n < kloop::loopgeom::MIN_NODES {
            return bad(format!("n must be at least {}", kloop::loopgeom::MIN_NODES));
        }
        if self.path.nodes < kloop::paths::MIN_PATH_NODES {
            return bad(format!("path.nodes must be at least {}", kloop::paths::MIN_PATH_NODES));
        }
        let s = &self.solver;
        let tolerances = [s.tol_saddle, s.tol_crit, s.armijo_c1, self.verify.ode_residual, self.verify.curvature_match];
        if tolerances.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("tolerances must be positive".into());
        }
        if !(s.backtrack > 0.0 && s.backtrack < 1.0) || s.redistribute_every == 0 {
            return bad("backtrack must lie in (0, 1) and redistribute_every must be positive".into());
        }
        if let Some(step) = s.initial_step {
            if !(step.is_finite() && step > 0.0) {
                return bad("initial_step must be positive".into());
            }
        }
        if let Some((lo, hi)) = self.path.lambda_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo * hi > 0.0) {
                return bad("path.lambda_range must be ordered and exclude 0".into());
            }
        }
        Ok(())
    }

    pub fn build_field(&self) -> Result<CurvatureField, CliError> {
        self.field.build().map_err(|e| CliError::Config(e.to_string()))
    }

    /// `output_dir`, unless the environment overrides it.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }

    /// The grid sorted and with duplicates removed; the removed values are
    /// returned for a warning.
    pub fn dedup_grid(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut g = self.lambda_grid.clone()?;
        g.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        let mut kept: Vec<f64> = Vec::with_capacity(g.len());
        let mut dropped = vec![];
        for l in g {
            if kept.last() == Some(&l) {
                dropped.push(l);
            } else {
                kept.push(l);
            }
        }
        Some((kept, dropped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 1.0}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.n, 256);
        assert_eq!(c.path.nodes, 33);
        assert_eq!(c.solver.tol_crit, 1e-6);
        assert_eq!(c.output_dir, PathBuf::from("kloop-out"));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 0.0}"#,
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}}"#,
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 1.0, "lambda_grid": [1.0]}"#,
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 1.0, "n": 8}"#,
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 1.0, "solver": {"tol_crit": -1}}"#,
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda": 1.0, "colour": "red"}"#,
            "not json",
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn grid_dedup() {
        let c = RunConfig::from_json(
            r#"{"field": {"name": "constant", "params": {"c": 1.0}}, "lambda_grid": [2.0, 1.0, 1.0, 0.5]}"#,
        )
        .unwrap();
        let (kept, dropped) = c.dedup_grid().unwrap();
        assert_eq!(kept, vec![0.5, 1.0, 2.0]);
        assert_eq!(dropped, vec![1.0]);
    }
}
