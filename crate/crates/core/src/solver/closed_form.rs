use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{check_len, Result};
use crate::linalg::{as_slice, matvec, matvec_t, row_major, weighted_gram, Cholesky};

/// Solve `(XXᵀ) c = Y` with one step of iterative refinement; returns `(c, Xᵀc)`.
pub(crate) fn gram_solve(x: &[f64], n: usize, d: usize, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let chol = Cholesky::factor(&weighted_gram(x, n, d, None))?;
    let mut c = chol.solve(y)?;
    let mut w = vec![0.0; d];
    matvec_t(x, n, d, &c, &mut w);
    let mut resid = vec![0.0; n];
    matvec(x, n, d, &w, &mut resid);
    resid.iter_mut().zip(y).for_each(|(r, &yi)| *r = yi - *r);
    let dc = chol.solve(&resid)?;
    c.iter_mut().zip(&dc).for_each(|(a, b)| *a += b);
    matvec_t(x, n, d, &c, &mut w);
    Ok((c, w))
}

/// Minimum-ℓ2 interpolant `Xᵀ(XXᵀ)⁻¹Y`.
pub fn min_l2_closed_form(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let (n, d) = x.dim();
    check_len(n, y.len())?;
    let (_, w) = gram_solve(&row_major(&x), n, d, &as_slice(&y))?;
    Ok(Array1::from_vec(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use ndarray::{array, Array2};

    #[test]
    fn identity_block() {
        let mut x = Array2::zeros((3, 5));
        for i in 0..3 {
            x[[i, i]] = 1.0;
        }
        let w = min_l2_closed_form(x.view(), array![1.0, -2.0, 0.5].view()).unwrap();
        assert_eq!(w, array![1.0, -2.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn single_row() {
        let w = min_l2_closed_form(array![[3.0, 4.0]].view(), array![5.0].view()).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_gram() {
        let r = min_l2_closed_form(array![[1.0, 1.0], [2.0, 2.0]].view(), array![1.0, 2.0].view());
        assert!(matches!(r, Err(Error::SingularGram)));
    }
}
