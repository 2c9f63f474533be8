//! The concave dual `D(λ) = ⟨Y,λ⟩ − (1/q)‖Xᵀλ‖_q^q` and its KKT map.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{check_len, Error, Result};
use crate::linalg::{as_slice, dot, matvec_t, row_major};

/// Hölder conjugate `q = p/(p−1)` for `p ∈ (1, 2]`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::DomainError(format!("p = {p} must lie in (1, 2]")));
    }
    Ok(p / (p - 1.0))
}

/// `w_i = sgn(v_i)·|v_i|^{q−1}` in place. Fails on non-finite input or overflow.
pub(crate) fn kkt_map_into(v: &[f64], q: f64, out: &mut [f64]) -> Result<()> {
    let e = q - 1.0;
    for (o, &vi) in out.iter_mut().zip(v) {
        if !vi.is_finite() {
            return Err(Error::NonFinite(format!("KKT map input {vi}")));
        }
        let m = if e == 1.0 { vi.abs() } else { vi.abs().powf(e) };
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("|{vi}|^{e} overflows")));
        }
        *o = m.copysign(vi);
    }
    Ok(())
}

pub fn kkt_map(v: ArrayView1<'_, f64>, q: f64) -> Result<Array1<f64>> {
    if !(q >= 2.0) {
        return Err(Error::DomainError(format!("q = {q} must be at least 2")));
    }
    let v = as_slice(&v);
    let mut out = vec![0.0; v.len()];
    kkt_map_into(&v, q, &mut out)?;
    Ok(Array1::from_vec(out))
}

/// `(ln Σ|z|^q)`, computed after factoring out `max|z|`; `-∞` for `z = 0`.
pub(crate) fn ln_pow_sum(z: &[f64], q: f64) -> f64 {
    let m = z.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = z.iter().map(|&x| (x.abs() / m).powf(q)).sum();
    q * m.ln() + s.ln()
}

/// `Σ|z|^q` without rescaling; fast path used inside the ascent loop.
pub(crate) fn pow_sum(z: &[f64], q: f64) -> f64 {
    z.iter().map(|&x| x.abs().powf(q)).sum()
}

pub(crate) fn dual_value(y: &[f64], lambda: &[f64], z: &[f64], q: f64) -> f64 {
    dot(y, lambda) - pow_sum(z, q) / q
}

pub fn dual_objective(lambda: ArrayView1<'_, f64>, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, q: f64) -> Result<f64> {
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    check_len(n, lambda.len())?;
    let xs = row_major(&x);
    let mut z = vec![0.0; d];
    matvec_t(&xs, n, d, &as_slice(&lambda), &mut z);
    Ok(dual_value(&as_slice(&y), &as_slice(&lambda), &z, q))
}

pub(crate) fn ray_scale_raw(y: &[f64], xty: &[f64], q: f64) -> Result<f64> {
    let ln_num = 2.0 * crate::linalg::norm2(y).ln();
    if ln_num == f64::NEG_INFINITY {
        return Err(Error::DegenerateInstance("Y = 0 has no ray scale".into()));
    }
    let ln_den = ln_pow_sum(xty, q);
    if ln_den == f64::NEG_INFINITY {
        return Err(Error::DegenerateInstance("XᵀY = 0".into()));
    }
    Ok(((ln_num - ln_den) / (q - 1.0)).exp())
}

/// Maximizer of `t ↦ D(tY)`: `t★^{q−1} = ‖Y‖² / ‖XᵀY‖_q^q`.
pub fn ray_scale(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, q: f64) -> Result<f64> {
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    let xs = row_major(&x);
    let ys = as_slice(&y);
    let mut xty = vec![0.0; d];
    matvec_t(&xs, n, d, &ys, &mut xty);
    ray_scale_raw(&ys, &xty, q)
}
