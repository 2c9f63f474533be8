use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::calib::CalibrationConfig;
use crate::dln::DlnConfig;
use crate::error::{Error, Result};
use crate::model::{DesignSpec, TargetSpec};
use crate::solver::SolverOptions;

/// How each cell obtains its interpolator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    /// Exact min-ℓp interpolation for each listed `p`.
    ExplicitP(Vec<f64>),
    /// Diagonal linear network trained from scale α with learning rate `lr`, per `(α, lr)` pair.
    DlnAlpha(Vec<(f64, f64)>),
}

impl Selector {
    pub fn kind(&self) -> &'static str {
        match self {
            Selector::ExplicitP(_) => "explicit_p",
            Selector::DlnAlpha(_) => "dln_alpha",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Selector::ExplicitP(v) => v.len(),
            Selector::DlnAlpha(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn default_seeds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub experiment_id: String,
    #[serde(default)]
    pub base_seed: u64,
    pub target: TargetSpec,
    pub design: DesignSpec,
    pub sigma_list: Vec<f64>,
    pub selector: Selector,
    pub n_grid: Vec<usize>,
    pub r_list: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds_per_cell: usize,
    #[serde(default)]
    pub solver_opts: SolverOptions,
    #[serde(default)]
    pub dln_cfg: DlnConfig,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Used to map α to p_eff for the theory columns of DLN rows.
    #[serde(default)]
    pub calib: CalibrationConfig,
}

impl SweepConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        if self.experiment_id.is_empty() || self.experiment_id.contains([',', '"', '\n', '\r']) {
            return bad(format!("experiment_id {:?} must be nonempty plain text", self.experiment_id));
        }
        self.target.validate()?;
        self.solver_opts.validate()?;
        self.dln_cfg.validate()?;
        if self.sigma_list.is_empty() || self.n_grid.is_empty() || self.r_list.is_empty() || self.selector.is_empty() {
            return bad("sigma_list, n_grid, r_list and the selector list must be nonempty".into());
        }
        if self.seeds_per_cell == 0 {
            return bad("seeds_per_cell must be positive".into());
        }
        if let Some(s) = self.sigma_list.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return bad(format!("sigma = {s} must be finite and nonnegative"));
        }
        if let Some(r) = self.r_list.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return bad(format!("r = {r} must be positive"));
        }
        for &n in &self.n_grid {
            if n == 0 {
                return bad("n_grid entries must be positive".into());
            }
            let d = self.design.resolve_d(n)?;
            if d < self.target.support_size() {
                return bad(format!("d = {d} at n = {n} is smaller than the support size"));
            }
        }
        let max_p = match &self.selector {
            Selector::ExplicitP(ps) => {
                if let Some(p) = ps.iter().find(|p| !(**p > 1.0 && **p <= 2.0)) {
                    return bad(format!("p = {p} must lie in (1, 2]"));
                }
                ps.iter().copied().fold(f64::MIN, f64::max)
            }
            Selector::DlnAlpha(pairs) => {
                if let Some((a, lr)) = pairs.iter().find(|(a, lr)| !(*a > 0.0 && *lr > 0.0 && a.is_finite() && lr.is_finite())) {
                    return bad(format!("(alpha, lr) = ({a}, {lr}) must be positive"));
                }
                2.0
            }
        };
        if let Some(r) = self.r_list.iter().find(|r| **r < 1.0 || **r > max_p) {
            warn!("r = {r} lies outside [1, {max_p}]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECIPE: &str = r#"{
        "experiment_id": "e1",
        "base_seed": 7,
        "target": {"kind": "SingleSpike", "s": 1},
        "design": {"FixedD": 5000},
        "sigma_list": [0.1],
        "selector": {"ExplicitP": [1.1, 1.5, 1.9]},
        "n_grid": [20, 2000],
        "r_list": [1.0, 1.5]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = SweepConfig::from_json_str(RECIPE).unwrap();
        assert_eq!(cfg.seeds_per_cell, 5);
        assert_eq!(cfg.selector.kind(), "explicit_p");
        assert_eq!(cfg.solver_opts, SolverOptions::default());
        assert!(cfg.output_path.is_none());
    }

    #[test]
    fn dln_selector_parses() {
        let text = RECIPE.replace(r#"{"ExplicitP": [1.1, 1.5, 1.9]}"#, r#"{"DlnAlpha": [[0.00102, 0.1]]}"#);
        let cfg = SweepConfig::from_json_str(&text).unwrap();
        assert_eq!(cfg.selector, Selector::DlnAlpha(vec![(0.00102, 0.1)]));
    }

    #[test]
    fn rejects_bad_grids() {
        for (from, to) in [("[20, 2000]", "[]"), ("[20, 2000]", "[6000]"), ("[0.1]", "[-0.1]"), ("[1.1, 1.5, 1.9]", "[2.5]")] {
            let text = RECIPE.replace(from, to);
            assert!(matches!(SweepConfig::from_json_str(&text), Err(Error::SpecInvalid(_))), "{to}");
        }
    }

    #[test]
    fn unknown_json_is_an_error() {
        assert!(matches!(SweepConfig::from_json_str("{"), Err(Error::Json(_))));
    }
}
