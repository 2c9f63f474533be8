//! Empirical checks of the concentration facts behind the ray scale.

use serde::{Deserialize, Serialize};

use crate::linalg::{matvec_t, norm2};
use crate::model::ProblemInstance;
use crate::theory::gaussian_abs_moment;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `‖Y‖² / (τ_s² n)`.
    pub y_norm_ratio: f64,
    /// `[(1/(d−s)) Σ_{j∉S} |⟨X_j,Y⟩|^q] / (m_q ‖Y‖^q)`; `None` when `d = s`.
    pub bulk_ratio: Option<f64>,
    /// `Σ_{j∈S} |⟨X_j,Y⟩|^q`.
    pub spike_sum: f64,
    /// `n^q W_q`.
    pub spike_pred: f64,
    /// `‖XᵀY‖_q^q`.
    pub total: f64,
    /// `n^q W_q + (d−s) m_q τ_s^q n^{q/2} + τ_s^q (s n^{q/2} + s^{1+q/2})`.
    pub total_pred: f64,
}

impl ConcentrationReport {
    pub fn spike_ratio(&self) -> f64 {
        self.spike_sum / self.spike_pred
    }

    pub fn total_ratio(&self) -> f64 {
        self.total / self.total_pred
    }
}

/// Compare `‖Y‖²`, the bulk and spike parts of `‖XᵀY‖_q^q`, and its total with their predictions.
/// The support is the first `instance.s` coordinates.
pub fn diagnose_concentration(instance: &ProblemInstance, q: f64) -> Result<ConcentrationReport> {
    let (n, d, s) = (instance.n, instance.d, instance.s.min(instance.d));
    let y = instance.y.as_slice().map(|v| v.to_vec()).unwrap_or_else(|| instance.y.to_vec());
    let mut xty = vec![0.0; d];
    matvec_t(instance.x_slice(), n, d, &y, &mut xty);

    let y_norm = norm2(&y);
    let l2 = norm2(instance.w_star.as_slice().unwrap_or(&instance.w_star.to_vec()));
    let tau_sq = l2 * l2 + instance.sigma * instance.sigma;
    let m_q = gaussian_abs_moment(q)?;
    let w_q: f64 = instance.w_star.iter().take(s).map(|w| w.abs().powf(q)).sum();

    let spike_sum: f64 = xty[..s].iter().map(|v| v.abs().powf(q)).sum();
    let bulk_sum: f64 = xty[s..].iter().map(|v| v.abs().powf(q)).sum();
    let bulk_ratio = (d > s).then(|| bulk_sum / (d - s) as f64 / (m_q * y_norm.powf(q)));

    let nf = n as f64;
    let sf = s as f64;
    let tau_q = tau_sq.powf(q / 2.0);
    let spike_pred = nf.powf(q) * w_q;
    let total_pred = spike_pred + (d - s) as f64 * m_q * tau_q * nf.powf(q / 2.0) + tau_q * (sf * nf.powf(q / 2.0) + sf.powf(1.0 + q / 2.0));

    Ok(ConcentrationReport {
        y_norm_ratio: y_norm * y_norm / (tau_sq * nf),
        bulk_ratio,
        spike_sum,
        spike_pred,
        total: spike_sum + bulk_sum,
        total_pred,
    })
}
