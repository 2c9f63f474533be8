use ndarray::ArrayView1;

use crate::error::{check_len, Result};

/// `Σ|w_i|^r`.
pub fn pow_sum(w: ArrayView1<'_, f64>, r: f64) -> f64 {
    w.iter().map(|&x| x.abs().powf(r)).sum()
}

/// `(Σ|w_i|^r)^{1/r}`, computed after factoring out `max|w_i|`.
/// Values `r < 1` give the quasi-norm.
pub fn lr_norm(w: ArrayView1<'_, f64>, r: f64) -> f64 {
    let m = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = w.iter().map(|&x| (x.abs() / m).powf(r)).sum();
    m * s.powf(1.0 / r)
}

/// Population test MSE under isotropic Gaussian design: `‖ŵ − w★‖² + σ²`.
pub fn population_risk(w_hat: ArrayView1<'_, f64>, w_star: ArrayView1<'_, f64>, sigma: f64) -> Result<f64> {
    check_len(w_star.len(), w_hat.len())?;
    let e: f64 = w_hat.iter().zip(w_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(e + sigma * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use ndarray::array;

    #[test]
    fn norm_examples() {
        assert_eq!(lr_norm(array![3.0, 4.0].view(), 2.0), 5.0);
        assert_eq!(lr_norm(array![3.0, 4.0].view(), 1.0), 7.0);
        let v = lr_norm(array![1.0, 1.0, 1.0, 1.0].view(), 1.5);
        assert!((v - 2.519_842_099_789_746_3).abs() < 1e-14);
        assert_eq!(lr_norm(array![0.0, 0.0].view(), 1.1), 0.0);
    }

    #[test]
    fn risk_examples() {
        let e1 = array![1.0, 0.0];
        assert!((population_risk(e1.view(), e1.view(), 0.1).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(population_risk(array![0.0, 0.0].view(), e1.view(), 0.0).unwrap(), 1.0);
        assert_eq!(population_risk(array![2.0, 0.0].view(), array![1.0, 1.0].view(), 0.5).unwrap(), 2.25);
        assert!(matches!(
            population_risk(array![1.0].view(), e1.view(), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
