use nalgebra::{DMatrix, DVector};

use super::lstsq::LeastSquares;

/// Relative pivot tolerance for Gauss-Jordan elimination.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// The null space of a homogeneous constraint matrix `C`, with a basis that
/// keeps parameter identity on free variables: for every free column `j`
/// there is one basis column equal to 1 at `j` and 0 at every other free
/// column.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    /// `C` (m x d)
    pub constraints: DMatrix<f64>,
    /// `N` (d x d'); column `k` belongs to free variable `free[k]`
    pub basis: DMatrix<f64>,
    pub pivots: Vec<usize>,
    pub free: Vec<usize>,
}

impl Subspace {
    /// The unconstrained space of dimension `d`.
    pub fn full(d: usize) -> Self {
        nullspace(&DMatrix::zeros(0, d))
    }

    pub fn dim(&self) -> usize {
        self.constraints.ncols()
    }

    pub fn nullity(&self) -> usize {
        self.free.len()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// `N y`
    pub fn expand(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }

    /// Reduced coordinates of a point already in the subspace.
    pub fn reduce(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&j| x[j]))
    }

    /// `||C x||_inf`
    pub fn residual(&self, x: &[f64]) -> f64 {
        if self.constraints.nrows() == 0 {
            return 0.0;
        }
        let v = DVector::from_column_slice(x);
        (&self.constraints * v).amax()
    }

    /// Reduced coordinates of the Euclidean-nearest point of the subspace.
    pub fn nearest_reduced(&self, x: &[f64]) -> DVector<f64> {
        if self.free.is_empty() {
            return DVector::zeros(0);
        }
        let rhs = DVector::from_column_slice(x);
        let nt = self.basis.transpose();
        let gram = &nt * &self.basis;
        let b = nt * rhs;
        // the identity-retaining basis has full column rank, so the Gram
        // matrix is positive definite
        match gram.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => LeastSquares::new(&gram, 1e-12)
                .and_then(|ls| ls.solve(&b))
                .expect("gram matrix is square and finite"),
        }
    }
}

/// Reduced row echelon form of `c` by Gauss-Jordan elimination with partial
/// pivoting. Returns the reduced rows (pivot rows only) and pivot columns.
pub fn rref(c: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let (m, d) = c.shape();
    let mut rows: Vec<Vec<f64>> = (0..m).map(|i| c.row(i).iter().copied().collect()).collect();
    let scale = c.amax().max(1.0);
    let tol = PIVOT_TOLERANCE * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..d {
        if r == m {
            break;
        }
        let (best, best_val) = (r..m)
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_val <= tol {
            for row in rows.iter_mut().skip(r) {
                row[col] = 0.0;
            }
            continue;
        }
        rows.swap(r, best);
        let inv = 1.0 / rows[r][col];
        for v in rows[r].iter_mut() {
            *v *= inv;
        }
        rows[r][col] = 1.0;
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[col] = 0.0;
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    (rows, pivots)
}

/// Null space of `c` with an identity-retaining basis.
pub fn nullspace(c: &DMatrix<f64>) -> Subspace {
    let d = c.ncols();
    let (rows, pivots) = rref(c);
    let mut is_pivot = vec![false; d];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..d).filter(|&j| !is_pivot[j]).collect();
    let mut basis = DMatrix::zeros(d, free.len());
    for (k, &j) in free.iter().enumerate() {
        basis[(j, k)] = 1.0;
        for (row, &p) in rows.iter().zip(&pivots) {
            basis[(p, k)] = -row[j];
        }
    }
    Subspace {
        constraints: c.clone(),
        basis,
        pivots,
        free,
    }
}

/// Numerical rank of `c` under the elimination tolerance.
pub fn rank(c: &DMatrix<f64>) -> usize {
    rref(c).1.len()
}
