//! Least-squares fits in log-log coordinates.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ols {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<Ols> {
    let m = xs.len();
    crate::error::check_len(m, ys.len())?;
    if m < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: m });
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(Ols { slope, intercept, stderr: (sse / (mf - 2.0) / sxx).sqrt() })
}

fn log_points(points: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, v) in points {
        if !(n > 0.0) {
            return Err(Error::NonPositiveValue(n));
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue(v));
        }
        xs.push(n.ln());
        ys.push(v.ln());
    }
    Ok((xs, ys))
}

/// OLS of `ln value` on `ln n` over the points with `n_lo ≤ n ≤ n_hi`.
pub fn fit_loglog_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<Ols> {
    let inside: Vec<(f64, f64)> = points.iter().copied().filter(|&(n, _)| n >= window.0 && n <= window.1).collect();
    if inside.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: inside.len() });
    }
    let (xs, ys) = log_points(&inside)?;
    ols(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elbow {
    pub n_elbow: f64,
    /// Residual sum of squares of the best two-segment fit.
    pub sse: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    /// Residual sum of squares of a single line.
    pub sse_single: f64,
    /// False when the two-segment fit improves the single line by less than 1%.
    pub has_elbow: bool,
}

/// Fit `y = c + s₁·min(x−b, 0) + s₂·max(x−b, 0)` for a fixed breakpoint `b`.
fn hinge_fit(xs: &[f64], ys: &[f64], b: f64) -> Option<([f64; 3], f64)> {
    let basis = |x: f64| [1.0, (x - b).min(0.0), (x - b).max(0.0)];
    let mut a = Mat::<f64>::zeros(3, 3);
    let mut rhs = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let f = basis(x);
        for i in 0..3 {
            rhs[i] += f[i] * y;
            for j in 0..=i {
                a[(i, j)] += f[i] * f[j];
            }
        }
    }
    let coef = Cholesky::factor(&a).ok()?.solve(&rhs).ok()?;
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = basis(x);
            (y - coef[0] - coef[1] * f[1] - coef[2] * f[2]).powi(2)
        })
        .sum();
    Some(([coef[0], coef[1], coef[2]], sse))
}

/// Best continuous two-segment fit in log-log coordinates, breakpoint at an interior grid point.
pub fn detect_elbow(points: &[(f64, f64)]) -> Result<Elbow> {
    if points.len() < 6 {
        return Err(Error::InsufficientPoints { needed: 6, got: points.len() });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys) = log_points(&sorted)?;
    let line = ols(&xs, &ys)?;
    let sse_single: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - line.intercept - line.slope * x).powi(2)).sum();

    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for k in 1..xs.len() - 1 {
        if let Some((c, sse)) = hinge_fit(&xs, &ys, xs[k]) {
            if best.as_ref().is_none_or(|b| sse < b.2) {
                best = Some((k, c, sse));
            }
        }
    }
    let (k, c, sse) = best.ok_or_else(|| Error::DegenerateFit("no admissible breakpoint".into()))?;
    let floor = 1e-24 * ys.iter().map(|y| y * y).sum::<f64>();
    Ok(Elbow {
        n_elbow: sorted[k].0,
        sse,
        left_slope: c[1],
        right_slope: c[2],
        sse_single,
        has_elbow: sse_single - sse > 0.01 * sse_single + floor,
    })
}

/// Least-squares vertical offset in log space aligning `pred` with `emp`: mean of `ln emp − ln pred`.
pub fn log_shift(emp: &[f64], pred: &[f64]) -> Result<f64> {
    crate::error::check_len(emp.len(), pred.len())?;
    let mut acc = 0.0;
    let mut m = 0usize;
    for (&e, &p) in emp.iter().zip(pred) {
        if e > 0.0 && p > 0.0 {
            acc += e.ln() - p.ln();
            m += 1;
        }
    }
    if m == 0 {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    Ok(acc / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::log_grid;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = log_grid(10.0, 1e4, 12).into_iter().map(|n| (n, 3.0 * n.sqrt())).collect();
        let f = fit_loglog_slope(&pts, (0.0, f64::INFINITY)).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = pts.iter().map(|&(n, _)| (n, 2.5)).collect();
        assert!(fit_loglog_slope(&flat, (0.0, 1e9)).unwrap().slope.abs() < 1e-15);
    }

    #[test]
    fn window_and_errors() {
        let pts = vec![(1.0, 1.0), (2.0, 2.0), (4.0, 4.0), (8.0, 0.0)];
        assert!(matches!(fit_loglog_slope(&pts, (1.0, 2.0)), Err(Error::InsufficientPoints { needed: 3, got: 2 })));
        assert!(matches!(fit_loglog_slope(&pts, (1.0, 8.0)), Err(Error::NonPositiveValue(_))));
        assert!((fit_loglog_slope(&pts, (1.0, 4.0)).unwrap().slope - 1.0).abs() < 1e-14);
    }

    #[test]
    fn elbow_on_synthetic_max() {
        // max(c₁√n, c₂) with the crossing at n = 100.
        let pts: Vec<(f64, f64)> = log_grid(10.0, 1000.0, 21).into_iter().map(|n| (n, (0.3 * n.sqrt()).max(3.0))).collect();
        let e = detect_elbow(&pts).unwrap();
        assert!(e.has_elbow);
        assert!((60.0..=170.0).contains(&e.n_elbow), "{}", e.n_elbow);
        assert!(e.left_slope.abs() < 1e-9 && (e.right_slope - 0.5).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn no_elbow_on_power_law() {
        let pts: Vec<(f64, f64)> = log_grid(10.0, 1000.0, 15).into_iter().map(|n| (n, 2.0 * n.powf(0.3))).collect();
        let e = detect_elbow(&pts).unwrap();
        assert!(!e.has_elbow);
        assert!(e.sse_single - e.sse <= 0.01 * e.sse_single + 1e-20);
        assert!(matches!(detect_elbow(&pts[..5]), Err(Error::InsufficientPoints { needed: 6, got: 5 })));
    }

    #[test]
    fn shift_recovers_offset() {
        let emp = [2.0, 4.0, 8.0];
        let pred = [1.0, 2.0, 4.0];
        assert!((log_shift(&emp, &pred).unwrap() - 2f64.ln()).abs() < 1e-15);
    }
}
