//! Dense kernels on row-major design matrices.
//!
//! Matrix-vector products are plain loops with a fixed reduction order, so
//! results are bit-reproducible on a given machine. Gram matrices and their
//! Cholesky factorizations are delegated to `faer`, run sequentially.

use std::borrow::Cow;

use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};
use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{check_len, Error, Result};

/// Row-major contiguous view of `x`, copying only when the layout requires it.
pub fn row_major<'a>(x: &'a ArrayView2<'_, f64>) -> Cow<'a, [f64]> {
    match x.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(x.iter().copied().collect()),
    }
}

/// Dot product with eight interleaved accumulators combined pairwise in a fixed order.
#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ta.iter().zip(tb).map(|(x, y)| x * y).sum();
    (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))) + tail
}

/// `out = X v` for row-major `x` of shape `n × d`.
pub fn matvec(x: &[f64], n: usize, d: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), n * d);
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = dot(&x[i * d..(i + 1) * d], v);
    }
}

/// `out = Xᵀ u`, accumulated row by row in increasing row order.
pub fn matvec_t(x: &[f64], n: usize, d: usize, u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), n * d);
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        let row = &x[i * d..(i + 1) * d];
        for (o, &xij) in out.iter_mut().zip(row) {
            *o += ui * xij;
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// Lower triangle of `X diag(weights) Xᵀ`. The upper triangle is left zero.
pub fn weighted_gram(x: &[f64], n: usize, d: usize, weights: Option<&[f64]>) -> Mat<f64> {
    let xr = MatRef::from_row_major_slice(x, n, d);
    let mut g = Mat::<f64>::zeros(n, n);
    match weights {
        None => tri_matmul(
            g.as_mut(),
            BlockStructure::TriangularLower,
            Accum::Replace,
            xr,
            BlockStructure::Rectangular,
            xr.transpose(),
            BlockStructure::Rectangular,
            1.0,
            Par::Seq,
        ),
        Some(w) => {
            let scaled: Vec<f64> = x
                .chunks_exact(d)
                .flat_map(|row| row.iter().zip(w).map(|(&a, &b)| a * b))
                .collect();
            let sr = MatRef::from_row_major_slice(&scaled, n, d);
            tri_matmul(
                g.as_mut(),
                BlockStructure::TriangularLower,
                Accum::Replace,
                sr,
                BlockStructure::Rectangular,
                xr.transpose(),
                BlockStructure::Rectangular,
                1.0,
                Par::Seq,
            )
        }
    }
    g
}

/// Cholesky factor of a symmetric positive-definite matrix given by its lower triangle.
pub struct Cholesky {
    llt: faer::linalg::solvers::Llt<f64>,
    n: usize,
}

impl Cholesky {
    pub fn factor(lower: &Mat<f64>) -> Result<Self> {
        let n = lower.nrows();
        let llt = lower.llt(Side::Lower).map_err(|_| Error::SingularGram)?;
        // A pivot at rounding level means the matrix is numerically singular.
        let l = llt.L();
        let min_pivot = (0..n).fold(f64::INFINITY, |m, i| m.min(l[(i, i)] * l[(i, i)]));
        if n > 0 && min_pivot <= n as f64 * f64::EPSILON * max_diag(lower) {
            return Err(Error::SingularGram);
        }
        Ok(Self { llt, n })
    }

    /// Factor `A + shift·I`, where `A` is given by its lower triangle.
    pub fn factor_shifted(lower: &Mat<f64>, shift: f64) -> Result<Self> {
        let mut a = lower.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += shift;
        }
        Self::factor(&a)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(b.as_mut());
        Ok((0..self.n).map(|i| b[(i, 0)]).collect())
    }
}

/// Largest diagonal entry of a square matrix.
pub fn max_diag(a: &Mat<f64>) -> f64 {
    (0..a.nrows()).fold(0.0f64, |m, i| m.max(a[(i, i)]))
}

pub fn to_array(v: Vec<f64>) -> Array1<f64> {
    Array1::from_vec(v)
}

pub fn as_slice<'a>(v: &'a ArrayView1<'_, f64>) -> Cow<'a, [f64]> {
    match v.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(v.to_vec()),
    }
}
