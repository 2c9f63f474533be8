use serde::{Deserialize, Serialize};

/// One (trial, r) row of a sweep. Not-applicable numeric fields hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub experiment_id: String,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub target_kind: String,
    pub a: f64,
    pub sigma: f64,
    pub selector_kind: String,
    pub p: f64,
    pub alpha: f64,
    pub lr: f64,
    pub r: f64,
    pub norm_emp: f64,
    pub norm_pred: f64,
    pub slope_pred: f64,
    pub regime_pred: String,
    pub t_star_pred: f64,
    pub n_star_pred: f64,
    pub r_star: f64,
    pub test_mse: f64,
    pub feas_residual: f64,
    pub solver_iters: u64,
    pub status: String,
}

pub const SCHEMA: [&str; 24] = [
    "experiment_id",
    "seed",
    "n",
    "d",
    "s",
    "target_kind",
    "a",
    "sigma",
    "selector_kind",
    "p",
    "alpha",
    "lr",
    "r",
    "norm_emp",
    "norm_pred",
    "slope_pred",
    "regime_pred",
    "t_star_pred",
    "n_star_pred",
    "r_star",
    "test_mse",
    "feas_residual",
    "solver_iters",
    "status",
];

/// Free text allowed in the status column: no separators, quotes or line breaks.
pub fn sanitize(text: &str) -> String {
    text.chars().map(|c| if matches!(c, ',' | '"' | '\n' | '\r') { ';' } else { c }).collect()
}

impl SweepRecord {
    /// Deterministic output order: experiment, n, seed, r, then the remaining cell keys.
    pub fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.experiment_id
            .cmp(&other.experiment_id)
            .then(self.n.cmp(&other.n))
            .then(self.seed.cmp(&other.seed))
            .then(self.r.total_cmp(&other.r))
            .then(self.sigma.total_cmp(&other.sigma))
            .then(self.selector_kind.cmp(&other.selector_kind))
            .then(self.p.total_cmp(&other.p))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.lr.total_cmp(&other.lr))
    }
}
