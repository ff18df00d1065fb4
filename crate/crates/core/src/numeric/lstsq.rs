//! Minimum-norm least squares through a thin SVD.
//!
//! nalgebra's SVD can return factors whose product misses the input by
//! around 1e-5 on some badly scaled projection matrices, so the factorization
//! comes from faer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LeastSquares {
    u: DMatrix<f64>,
    /// Reciprocal singular values, zero below the cut.
    inv: DVector<f64>,
    v: DMatrix<f64>,
    rank: usize,
}

fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok((
            DMatrix::zeros(m, 0),
            DVector::zeros(0),
            DMatrix::zeros(n, 0),
        ));
    }
    let svd = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)])
        .thin_svd()
        .map_err(|e| Error::Infeasible(format!("svd did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok((
        DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    ))
}

/// Singular values of `a`, largest first.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(thin_svd(a)?.1)
}

impl LeastSquares {
    /// Factors `a`, treating singular values below `rel_cut` times the largest as zero.
    pub fn new(a: &DMatrix<f64>, rel_cut: f64) -> Result<Self> {
        let (u, s, v) = thin_svd(a)?;
        let cut = rel_cut * s.iter().copied().fold(0.0, f64::max);
        let inv = s.map(|x| if x > cut { 1.0 / x } else { 0.0 });
        let rank = inv.iter().filter(|&&x| x != 0.0).count();
        Ok(LeastSquares { u, inv, v, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `argmin |a y - b|` with the smallest norm.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.u.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.u.nrows(),
                got: b.len(),
            });
        }
        let c = self.u.tr_mul(b).component_mul(&self.inv);
        Ok(&self.v * c)
    }
}
