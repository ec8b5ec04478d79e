//! Orthogonal projections built from pivoted QR factorizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};

/// Relative tolerance on the diagonal of R when deciding numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Orthogonal projector onto the column space of a design matrix.
///
/// Stored as an orthonormal basis `Q` (n × rank) so that `P y = Q (Qᵀ y)`;
/// the n × n matrix is never formed.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: DMatrix<f64>,
}

impl Projector {
    pub fn from_design(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        if x.ncols() == 0 || n == 0 {
            return Self { basis: DMatrix::zeros(n, 0) };
        }
        let max_norm = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_norm == 0.0 {
            return Self { basis: DMatrix::zeros(n, 0) };
        }
        let qr = x.clone().col_piv_qr();
        let r = qr.r();
        let k = r.nrows().min(r.ncols());
        let tol = RANK_TOL * max_norm;
        let rank = (0..k).take_while(|&i| r[(i, i)].abs() > tol).count();
        let q = qr.q();
        Self { basis: q.columns(0, rank).into_owned() }
    }

    /// Projector onto `span(columns)` of an orthonormal set; caller guarantees orthonormality.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.rank() == 0 {
            return DVector::zeros(y.len());
        }
        let coef = self.basis.tr_mul(y);
        &self.basis * coef
    }

    /// `‖P y‖²`, computed from the basis coordinates.
    pub fn norm_squared(&self, y: &DVector<f64>) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        self.basis.tr_mul(y).norm_squared()
    }

    /// Dense n × n matrix; only for tests and diagnostics.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Columns `cols` of `x`, in the given order.
pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

/// Minimum-norm least-squares coefficients of `y` on `x`.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() != y.len() {
        return Err(contract(format!("design has {} rows, response has {}", x.nrows(), y.len())));
    }
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = x.clone().svd(true, true);
    let eps = RANK_TOL * svd.singular_values.max();
    svd.solve(y, eps).map_err(|e| contract(e.to_string()))
}

/// Sequential Gram–Schmidt basis `v_j = P⊥_{j-1} x_j / ‖P⊥_{j-1} x_j‖` of the columns of `x`.
///
/// Fails when some column lies in the span of its predecessors.
pub fn sequential_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    let mut v = DMatrix::<f64>::zeros(n, p);
    for j in 0..p {
        let mut col = x.column(j).into_owned();
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for k in 0..j {
                let vk = v.column(k);
                let c = vk.dot(&col);
                col.axpy(-c, &vk, 1.0);
            }
        }
        let norm = col.norm();
        let scale = x.column(j).norm();
        if norm <= RANK_TOL * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Err(crate::error::domain(format!(
                "column {} lies in the span of the preceding columns",
                j + 1
            )));
        }
        v.set_column(j, &(col / norm));
    }
    Ok(v)
}
