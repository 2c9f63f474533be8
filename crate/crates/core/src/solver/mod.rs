//! Minimum-ℓp interpolation `min ‖w‖_p s.t. Xw = Y` through the concave dual.
//!
//! The dual `D(λ) = ⟨Y,λ⟩ − (1/q)‖Xᵀλ‖_q^q` is maximized from the ray warm
//! start `λ₀ = t★Y`; the primal is read off with the KKT map
//! `ŵ = sgn(z)|z|^{q−1}`, `z = Xᵀλ`. Iteration stops on primal feasibility of
//! that image.

mod closed_form;
mod dual;

use log::debug;
use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use closed_form::min_l2_closed_form;
pub use dual::{conjugate_exponent, dual_objective, kkt_map, ray_scale};

use crate::error::{check_len, Error, Result};
use crate::linalg::{as_slice, dot, matvec, matvec_t, max_diag, norm2, row_major, weighted_gram, Cholesky};
use dual::{dual_value, kkt_map_into, pow_sum, ray_scale_raw};

/// Ascent direction and step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LineSearch {
    /// Damped Newton with Armijo backtracking.
    #[default]
    Newton,
    /// Barzilai–Borwein step along the gradient, Armijo-safeguarded.
    BarzilaiBorwein,
    /// Gradient ascent with Armijo backtracking.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop when `‖X ŵ − Y‖ ≤ tol_feas·‖Y‖`.
    pub tol_feas: f64,
    /// Relative tolerance on the primal-dual identities.
    pub tol_cert: f64,
    pub max_iters: usize,
    /// Smallest accepted `p`.
    pub p_floor: f64,
    pub line_search: LineSearch,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_cert: 1e-6, max_iters: 50_000, p_floor: 1.05, line_search: LineSearch::Newton }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_feas > 0.0 && self.tol_feas < 1.0) {
            return Err(Error::SpecInvalid(format!("tol_feas = {} must lie in (0, 1)", self.tol_feas)));
        }
        if !(self.tol_cert > 0.0) {
            return Err(Error::SpecInvalid(format!("tol_cert = {} must be positive", self.tol_cert)));
        }
        if !(self.p_floor > 1.0) {
            return Err(Error::SpecInvalid(format!("p_floor = {} must exceed 1", self.p_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatorSolution {
    pub w_hat: Array1<f64>,
    pub lambda_star: Array1<f64>,
    /// Ray scale used for the warm start.
    pub t_star_empirical: f64,
    /// `‖X ŵ − Y‖ / ‖Y‖`.
    pub feas_residual: f64,
    /// Worst relative gap in `‖Xᵀλ‖_q^q = ‖ŵ‖_p^p = ⟨Y,λ⟩`.
    pub cert_residual: f64,
    pub iters: usize,
    pub converged: bool,
    /// Dual objective at every accepted iterate, starting with the warm start.
    pub dual_values: Vec<f64>,
}

impl InterpolatorSolution {
    /// Turn a non-converged result into [`Error::NotConverged`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iters: self.iters, feas_residual: self.feas_residual })
        }
    }
}

/// Relative gaps in the primal-dual identities.
fn certificate(y: &[f64], lambda: &[f64], z: &[f64], w: &[f64], p: f64, q: f64) -> f64 {
    let pp = pow_sum(w, p);
    if pp == 0.0 {
        return 0.0;
    }
    let zq = pow_sum(z, q);
    let yl = dot(y, lambda);
    ((zq - pp).abs() / pp).max((yl - pp).abs() / pp)
}

struct Dual<'a> {
    x: &'a [f64],
    y: &'a [f64],
    n: usize,
    d: usize,
    q: f64,
    y_norm: f64,
}

/// Iterate state: λ, z = Xᵀλ, w = kkt(z), g = Y − Xw, D(λ).
struct Point {
    lambda: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    grad: Vec<f64>,
    value: f64,
    feas: f64,
}

impl Dual<'_> {
    fn z_of(&self, lambda: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.d];
        matvec_t(self.x, self.n, self.d, lambda, &mut z);
        z
    }

    fn value_at(&self, lambda: &[f64], z: &[f64]) -> f64 {
        let v = dual_value(self.y, lambda, z, self.q);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }

    fn complete(&self, lambda: Vec<f64>, z: Vec<f64>, value: f64) -> Result<Point> {
        let mut w = vec![0.0; self.d];
        kkt_map_into(&z, self.q, &mut w)?;
        let mut grad = vec![0.0; self.n];
        matvec(self.x, self.n, self.d, &w, &mut grad);
        grad.iter_mut().zip(self.y).for_each(|(g, &yi)| *g = yi - *g);
        let feas = norm2(&grad) / self.y_norm;
        Ok(Point { lambda, z, w, grad, value, feas })
    }

    fn point(&self, lambda: Vec<f64>) -> Result<Point> {
        let z = self.z_of(&lambda);
        let value = self.value_at(&lambda, &z);
        self.complete(lambda, z, value)
    }

    /// Newton direction `H⁻¹g` with `H = X diag((q−1)|z|^{q−2}) Xᵀ`.
    fn newton_direction(&self, pt: &Point) -> Option<Vec<f64>> {
        let e = self.q - 2.0;
        let weights: Vec<f64> = pt.z.iter().map(|&v| (self.q - 1.0) * v.abs().powf(e)).collect();
        let h = weighted_gram(self.x, self.n, self.d, Some(&weights));
        let scale = max_diag(&h);
        let mut shift = 0.0;
        loop {
            let chol = if shift == 0.0 { Cholesky::factor(&h) } else { Cholesky::factor_shifted(&h, shift) };
            if let Ok(c) = chol {
                return c.solve(&pt.grad).ok();
            }
            shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
            if shift > 1e-4 * scale {
                return None;
            }
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Solve `min ‖w‖_p s.t. Xw = Y`.
///
/// `p = 2` goes through the Gram system directly. A non-converged solve is
/// returned with `converged = false`; see [`InterpolatorSolution::into_converged`].
pub fn solve_min_lp(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, p: f64, opts: &SolverOptions) -> Result<InterpolatorSolution> {
    opts.validate()?;
    let q = conjugate_exponent(p)?;
    if p < opts.p_floor {
        return Err(Error::DomainError(format!("p = {p} is below p_floor = {}", opts.p_floor)));
    }
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    let xs = row_major(&x);
    let ys = as_slice(&y);
    let y_norm = norm2(&ys);
    if y.iter().any(|v| !v.is_finite()) || xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design or labels".into()));
    }
    if y_norm == 0.0 {
        return Ok(InterpolatorSolution {
            w_hat: Array1::zeros(d),
            lambda_star: Array1::zeros(n),
            t_star_empirical: 0.0,
            feas_residual: 0.0,
            cert_residual: 0.0,
            iters: 0,
            converged: true,
            dual_values: vec![0.0],
        });
    }
    let mut xty = vec![0.0; d];
    matvec_t(&xs, n, d, &ys, &mut xty);
    let t_star = ray_scale_raw(&ys, &xty, q)?;
    let prob = Dual { x: &xs, y: &ys, n, d, q, y_norm };

    if p == 2.0 {
        let (c, w) = closed_form::gram_solve(&xs, n, d, &ys)?;
        let value = dual_value(&ys, &c, &w, q);
        let pt = prob.complete(c, w, value)?;
        return Ok(finish(pt, &ys, p, q, t_star, 0, opts, vec![value]));
    }

    let lambda0: Vec<f64> = ys.iter().map(|&v| t_star * v).collect();
    let mut pt = prob.point(lambda0)?;
    let mut trace = vec![pt.value];
    let mut iters = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step_hint = t_star;

    while pt.feas > opts.tol_feas && iters < opts.max_iters {
        let (dir, mut step) = match opts.line_search {
            LineSearch::Newton => match prob.newton_direction(&pt) {
                Some(dir) => (dir, 1.0),
                None => (pt.grad.clone(), step_hint),
            },
            LineSearch::BarzilaiBorwein => {
                let step = match &prev {
                    Some((l0, g0)) => {
                        let s: Vec<f64> = pt.lambda.iter().zip(l0).map(|(a, b)| a - b).collect();
                        let yv: Vec<f64> = g0.iter().zip(&pt.grad).map(|(a, b)| a - b).collect();
                        let sy = dot(&s, &yv);
                        if sy > 0.0 {
                            dot(&s, &s) / sy
                        } else {
                            step_hint
                        }
                    }
                    None => step_hint,
                };
                (pt.grad.clone(), step)
            }
            LineSearch::Backtracking => (pt.grad.clone(), 2.0 * step_hint),
        };
        let slope = dot(&pt.grad, &dir);
        if !(slope > 0.0) || !slope.is_finite() {
            debug!("ascent direction lost at iteration {iters}");
            break;
        }

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = pt.lambda.iter().zip(&dir).map(|(l, g)| l + step * g).collect();
            let z = prob.z_of(&trial);
            let value = prob.value_at(&trial, &z);
            if value >= pt.value + ARMIJO_C * step * slope {
                accepted = Some(prob.complete(trial, z, value)?);
                break;
            }
            // Near the optimum the Armijo gain drops below rounding; accept a
            // full step that is level within rounding and improves feasibility.
            let noise = 64.0 * f64::EPSILON * (pt.value.abs() + dot(&ys, &pt.lambda).abs());
            if value >= pt.value - noise && value.is_finite() {
                let cand = prob.complete(trial, z, value)?;
                if cand.feas < pt.feas {
                    accepted = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            debug!("line search stalled at iteration {iters}, feas {:.3e}", pt.feas);
            break;
        };
        step_hint = step;
        prev = Some((std::mem::take(&mut pt.lambda), std::mem::take(&mut pt.grad)));
        pt = next;
        trace.push(pt.value);
        iters += 1;
    }
    Ok(finish(pt, &ys, p, q, t_star, iters, opts, trace))
}

#[allow(clippy::too_many_arguments)]
fn finish(pt: Point, y: &[f64], p: f64, q: f64, t_star: f64, iters: usize, opts: &SolverOptions, trace: Vec<f64>) -> InterpolatorSolution {
    let cert = certificate(y, &pt.lambda, &pt.z, &pt.w, p, q);
    let converged = pt.feas <= opts.tol_feas && cert <= opts.tol_cert;
    InterpolatorSolution {
        w_hat: Array1::from_vec(pt.w),
        lambda_star: Array1::from_vec(pt.lambda),
        t_star_empirical: t_star,
        feas_residual: pt.feas,
        cert_residual: cert,
        iters,
        converged,
        dual_values: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_instance, lr_norm, DesignSpec, TargetSpec};
    use ndarray::array;

    fn random(n: usize, d: usize, seed: u64) -> crate::model::ProblemInstance {
        gen_instance(&TargetSpec::flat(3), &DesignSpec::FixedD(d), 0.1, n, seed).unwrap()
    }

    #[test]
    fn scalar_instance_any_p() {
        for &p in &[1.1, 1.5, 1.75, 2.0] {
            let sol = solve_min_lp(array![[2.0]].view(), array![6.0].view(), p, &SolverOptions::default()).unwrap();
            assert!(sol.converged);
            assert!((sol.w_hat[0] - 3.0).abs() < 1e-8);
            assert!((2.0 * sol.lambda_star[0] - 3f64.powf(p - 1.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_labels_give_zero() {
        let sol = solve_min_lp(array![[1.0, 2.0]].view(), array![0.0].view(), 1.5, &SolverOptions::default()).unwrap();
        assert!(sol.converged && sol.iters == 0);
        assert!(sol.w_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn domain_checks() {
        let o = SolverOptions::default();
        let x = array![[1.0, 2.0]];
        let y = array![1.0];
        assert!(matches!(solve_min_lp(x.view(), y.view(), 1.0, &o), Err(Error::DomainError(_))));
        assert!(matches!(solve_min_lp(x.view(), y.view(), 1.02, &o), Err(Error::DomainError(_))));
        assert!(matches!(solve_min_lp(x.view(), y.view(), 2.2, &o), Err(Error::DomainError(_))));
        assert!(matches!(solve_min_lp(x.view(), array![1.0, 2.0].view(), 1.5, &o), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn all_line_searches_agree() {
        let inst = random(15, 60, 4);
        let mut norms = Vec::new();
        for ls in [LineSearch::Newton, LineSearch::BarzilaiBorwein, LineSearch::Backtracking] {
            let o = SolverOptions { line_search: ls, ..Default::default() };
            let sol = solve_min_lp(inst.x.view(), inst.y.view(), 1.5, &o).unwrap();
            assert!(sol.converged, "{ls:?} feas {}", sol.feas_residual);
            norms.push(lr_norm(sol.w_hat.view(), 1.5));
        }
        assert!((norms[0] - norms[1]).abs() / norms[0] < 1e-6);
        assert!((norms[0] - norms[2]).abs() / norms[0] < 1e-6);
    }

    #[test]
    fn not_converged_is_reported() {
        let inst = random(15, 60, 5);
        let o = SolverOptions { max_iters: 1, line_search: LineSearch::Backtracking, ..Default::default() };
        let sol = solve_min_lp(inst.x.view(), inst.y.view(), 1.3, &o).unwrap();
        assert!(!sol.converged && sol.iters == 1);
        assert!(matches!(sol.into_converged(), Err(Error::NotConverged { iters: 1, .. })));
    }

    #[test]
    fn dual_at_optimum_matches_primal_energy() {
        let inst = random(12, 50, 6);
        let p = 1.4;
        let q = conjugate_exponent(p).unwrap();
        let sol = solve_min_lp(inst.x.view(), inst.y.view(), p, &SolverOptions::default()).unwrap();
        let dv = dual_objective(sol.lambda_star.view(), inst.x.view(), inst.y.view(), q).unwrap();
        let energy = (1.0 - 1.0 / q) * lr_norm(sol.w_hat.view(), p).powf(p);
        assert!((dv - energy).abs() / energy < 1e-6);
    }
}
