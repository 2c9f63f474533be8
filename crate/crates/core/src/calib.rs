//! Slope-matching calibration of the initialization scale α to an effective ℓp exponent.
//!
//! The 2-layer diagonal network's implicit regularizer is the separable
//! potential `Q_α(β) = α² Σ q(β_i/α²)` with
//! `q(z) = 2 − √(4+z²) + z·asinh(z/2)`. On unit-ℓ2 k-sparse probes
//! `Q_α = α² k q(1/(α²√k))`, while `‖β‖_p^p = k^{1−p/2}`. Matching the
//! log-log slope in `k` gives `p_eff(α) = 2(1 − slope)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::fit::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub k_grid: Vec<u64>,
    pub alpha_grid: Vec<f64>,
    /// Below this `|z|` the series `z²/4 − z⁴/192 + z⁶/2560` replaces the closed form.
    pub series_switch: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { k_grid: default_k_grid(), alpha_grid: log_grid(1e-6, 1e3, 50), series_switch: 1e-4 }
    }
}

/// 32 log-spaced points in `[1, 10⁴]`, rounded to integers and deduplicated.
pub fn default_k_grid() -> Vec<u64> {
    let mut k: Vec<u64> = (0..32).map(|i| 10f64.powf(4.0 * i as f64 / 31.0).round() as u64).collect();
    k.dedup();
    k
}

/// `m` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..m).map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp()).collect()
}

/// `q(z) = 2 − √(4+z²) + z·asinh(z/2)`.
///
/// The closed form is evaluated as `z·asinh(z/2) − z²/(2 + √(4+z²))`, which is
/// algebraically identical and avoids the cancellation in `2 − √(4+z²)`.
pub fn hyp_potential_q(z: f64, series_switch: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite(format!("q(z) at z = {z}")));
    }
    let a = z.abs();
    if a < series_switch {
        let z2 = a * a;
        return Ok(z2 / 4.0 - z2 * z2 / 192.0 + z2 * z2 * z2 / 2560.0);
    }
    let root = (4.0 + a * a).sqrt();
    Ok(a * (a / 2.0).asinh() - a * a / (2.0 + root))
}

/// `Q_α(β^{(k)}) = α² k q(1/(α²√k))`.
pub fn potential_on_probe(alpha: f64, k: u64, series_switch: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::DomainError(format!("alpha = {alpha} must be positive")));
    }
    if k == 0 {
        return Err(Error::DomainError("probe sparsity k must be at least 1".into()));
    }
    let a2 = alpha * alpha;
    let kf = k as f64;
    Ok(a2 * kf * hyp_potential_q(1.0 / (a2 * kf.sqrt()), series_switch)?)
}

/// `‖β^{(k)}‖_p^p = k^{1−p/2}` for the unit-ℓ2 flat probe.
pub fn lp_on_probe(p: f64, k: u64) -> f64 {
    (k as f64).powf(1.0 - p / 2.0)
}

/// Effective exponent and the standard error of the fitted slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PEff {
    pub p: f64,
    pub stderr: f64,
}

pub fn p_eff(alpha: f64, cfg: &CalibrationConfig) -> Result<PEff> {
    if cfg.k_grid.len() < 3 {
        return Err(Error::DegenerateFit(format!("k_grid has {} points, need 3", cfg.k_grid.len())));
    }
    if cfg.k_grid.windows(2).any(|w| w[1] <= w[0]) || cfg.k_grid[0] == 0 {
        return Err(Error::SpecInvalid("k_grid must be strictly increasing and start at 1 or more".into()));
    }
    let xs: Vec<f64> = cfg.k_grid.iter().map(|&k| (k as f64).ln()).collect();
    let ys = cfg
        .k_grid
        .iter()
        .map(|&k| potential_on_probe(alpha, k, cfg.series_switch).map(f64::ln))
        .collect::<Result<Vec<f64>>>()?;
    let fit = ols(&xs, &ys)?;
    Ok(PEff { p: 2.0 * (1.0 - fit.slope), stderr: fit.stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub alpha: f64,
    pub p_eff: f64,
    pub fit_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub points: Vec<CalibrationPoint>,
    /// Number of adjacent pairs where `p_eff` decreases.
    pub monotone_violations: usize,
}

/// Sample `α ↦ p_eff(α)` over `cfg.alpha_grid`.
pub fn calibration_curve(cfg: &CalibrationConfig) -> Result<CalibrationCurve> {
    let points = cfg
        .alpha_grid
        .iter()
        .map(|&alpha| p_eff(alpha, cfg).map(|pe| CalibrationPoint { alpha, p_eff: pe.p, fit_stderr: pe.stderr }))
        .collect::<Result<Vec<_>>>()?;
    let monotone_violations = points.windows(2).filter(|w| w[1].p_eff < w[0].p_eff).count();
    Ok(CalibrationCurve { points, monotone_violations })
}

/// Invert `p_eff` by bisection in `ln α` inside `bracket`.
pub fn alpha_for_p(p_target: f64, bracket: (f64, f64), tol: f64, cfg: &CalibrationConfig) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::BracketInvalid(format!("need 0 < alpha_min < alpha_max, got ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::DomainError(format!("tol = {tol} must be positive")));
    }
    let p_lo = p_eff(lo, cfg)?.p;
    let p_hi = p_eff(hi, cfg)?.p;
    if !(p_lo <= p_target && p_target <= p_hi) {
        return Err(Error::BracketInvalid(format!(
            "p_eff({lo}) = {p_lo:.4}, p_eff({hi}) = {p_hi:.4} do not enclose {p_target}"
        )));
    }
    if (p_lo - p_target).abs() <= tol {
        return Ok(lo);
    }
    if (p_hi - p_target).abs() <= tol {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let pm = p_eff(mid.exp(), cfg)?.p;
        if (pm - p_target).abs() <= tol {
            return Ok(mid.exp());
        }
        if pm < p_target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SW: f64 = 1e-4;

    /// Series truncated one order later, as an independent reference for tiny z.
    fn series_oracle(z: f64) -> f64 {
        let z2 = z * z;
        z2 / 4.0 - z2 * z2 / 192.0 + z2 * z2 * z2 / 2560.0 - 5.0 * z2.powi(4) / 114688.0
    }

    /// Naive closed form, straight from the definition.
    fn naive(z: f64) -> f64 {
        2.0 - (4.0 + z * z).sqrt() + z * (z / 2.0).asinh()
    }

    #[test]
    fn q_values() {
        assert_eq!(hyp_potential_q(0.0, SW).unwrap(), 0.0);
        assert!((hyp_potential_q(2.0, SW).unwrap() - 0.934_320_049_292_895_9).abs() < 1e-15);
        assert!((hyp_potential_q(1.0, SW).unwrap() - 0.245_143_847_559_813_75).abs() < 1e-15);
        assert!((hyp_potential_q(1e-3, SW).unwrap() - 2.499_999_947_916_670_6e-7).abs() < 1e-21);
        assert!(matches!(hyp_potential_q(f64::NAN, SW), Err(Error::NonFinite(_))));
    }

    #[test]
    fn closed_form_meets_series() {
        // Forcing each branch at z = 1e-3.
        let closed = hyp_potential_q(1e-3, 0.0).unwrap();
        let series = hyp_potential_q(1e-3, 1.0).unwrap();
        assert!((closed - series).abs() <= 1e-15);
        for i in 0..=40 {
            let z = 10f64.powf(-6.0 + 4.0 * i as f64 / 40.0);
            let c = hyp_potential_q(z, 0.0).unwrap();
            assert!((c - series_oracle(z)).abs() < 1e-12);
            assert!((hyp_potential_q(z, SW).unwrap() - series_oracle(z)).abs() < 1e-12);
        }
        // Away from zero the stable form equals the naive one.
        for &z in &[0.5, 1.0, 3.0, 40.0, 1e6] {
            let c = hyp_potential_q(z, SW).unwrap();
            assert!((c - naive(z)).abs() / c < 1e-12);
        }
    }

    #[test]
    fn probe_values() {
        assert!((potential_on_probe(1.0, 1, SW).unwrap() - 0.245_143_847_559_813_75).abs() < 1e-15);
        let base = potential_on_probe(100.0, 1, SW).unwrap();
        assert!((base * 4e4 - 1.0).abs() < 1e-3);
        for k in default_k_grid() {
            assert!((potential_on_probe(100.0, k, SW).unwrap() / base - 1.0).abs() < 1e-3);
        }
        assert!(potential_on_probe(0.0, 1, SW).is_err());
        assert!(potential_on_probe(1.0, 0, SW).is_err());
        assert!((lp_on_probe(1.5, 16) - 2.0).abs() < 1e-15);
        assert_eq!(lp_on_probe(2.0, 77), 1.0);
    }

    #[test]
    fn k_grid_shape() {
        let k = default_k_grid();
        assert_eq!(k.first(), Some(&1));
        assert_eq!(k.last(), Some(&10_000));
        assert_eq!(k.len(), 30);
        assert!(k.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn p_eff_paper_values() {
        let c = CalibrationConfig::default();
        assert!((p_eff(0.00102, &c).unwrap().p - 1.10).abs() <= 0.05);
        assert!((p_eff(0.0664, &c).unwrap().p - 1.5).abs() <= 0.07);
        assert!((p_eff(0.229, &c).unwrap().p - 1.9).abs() <= 0.07);
        let big = p_eff(100.0, &c).unwrap().p;
        assert!((1.95..=2.0).contains(&big), "{big}");
    }

    #[test]
    fn p_eff_limits_and_errors() {
        let c = CalibrationConfig::default();
        assert!(p_eff(1e-6, &c).unwrap().p <= 1.25);
        assert!(p_eff(1e3, &c).unwrap().p >= 1.97);
        let short = CalibrationConfig { k_grid: vec![1, 10], ..Default::default() };
        assert!(matches!(p_eff(0.1, &short), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn curve_is_monotone() {
        let curve = calibration_curve(&CalibrationConfig::default()).unwrap();
        assert_eq!(curve.points.len(), 50);
        assert_eq!(curve.monotone_violations, 0);
        assert!(curve.points.iter().all(|p| p.p_eff > 0.0 && p.p_eff < 2.2));
    }

    #[test]
    fn inverse_map() {
        let c = CalibrationConfig::default();
        for &a0 in &[0.01, 0.1, 1.0] {
            let target = p_eff(a0, &c).unwrap().p;
            let a = alpha_for_p(target, (1e-6, 1e3), 1e-3, &c).unwrap();
            assert!((p_eff(a, &c).unwrap().p - target).abs() <= 1e-3);
        }
        let a15 = alpha_for_p(1.5, (1e-6, 1e3), 1e-3, &c).unwrap();
        assert!(a15 / 0.0664 < 1.5 && 0.0664 / a15 < 1.5, "{a15}");
        let a19 = alpha_for_p(1.9, (1e-6, 1e3), 1e-3, &c).unwrap();
        assert!(a19 / 0.229 < 1.5 && 0.229 / a19 < 1.5, "{a19}");
        assert!(matches!(alpha_for_p(1.9, (1e-6, 1e-3), 1e-3, &c), Err(Error::BracketInvalid(_))));
    }

    proptest! {
        #[test]
        fn q_even_and_nonnegative(z in -1e6f64..1e6) {
            let a = hyp_potential_q(z, SW).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a, hyp_potential_q(-z, SW).unwrap());
        }

        #[test]
        fn p_eff_is_data_free(alpha in 1e-6f64..1e3) {
            let c = CalibrationConfig::default();
            prop_assert_eq!(p_eff(alpha, &c).unwrap().p.to_bits(), p_eff(alpha, &c).unwrap().p.to_bits());
        }
    }
}
