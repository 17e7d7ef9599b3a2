//! Dense kernels shared by every method: cached SPD factorizations,
//! symmetric eigendecomposition, and the eigenvalue-based pseudoinverse
//! used for singular substructure Schur complements.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Relative eigenvalue cutoff below which a direction counts as null.
pub const PINV_RANK_TOL: f64 = 1e-10;

/// Relative symmetry slack accepted by [`sym_eig`].
pub const SYM_TOL: f64 = 1e-12;

/// Symmetric eigendecomposition with eigenvalues in ascending order.
pub struct EigDecomp {
    /// Eigenvalues, ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column `k` paired with `values[k]`.
    pub vectors: DMatrix<f64>,
    /// Relative cutoff used when this decomposition backs a pseudoinverse.
    pub rank_tol: f64,
}

impl EigDecomp {
    /// Largest eigenvalue magnitude (0 for an empty matrix).
    pub fn lambda_max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of eigenvalues treated as zero under `rank_tol`.
    ///
    /// A decomposition whose largest eigenvalue is exactly zero is the zero
    /// matrix; every direction is null then.
    pub fn null_count(&self) -> usize {
        let lam_max = self.lambda_max_abs();
        if lam_max == 0.0 {
            return self.values.len();
        }
        let cut = self.rank_tol * lam_max;
        self.values.iter().filter(|&&v| v < cut).count()
    }

    /// Apply the Moore-Penrose pseudoinverse: `V diag(1/lambda_i) V^T x`
    /// with eigenvalues below `rank_tol * lambda_max` zeroed out.
    pub fn pinv_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let lam_max = self.lambda_max_abs();
        let cut = self.rank_tol * lam_max;
        let mut coeffs = self.vectors.transpose() * x;
        for (k, c) in coeffs.iter_mut().enumerate() {
            let lam = self.values[k];
            *c = if lam_max > 0.0 && lam >= cut { *c / lam } else { 0.0 };
        }
        &self.vectors * coeffs
    }

    /// Dense pseudoinverse (diagnostic; prefer [`EigDecomp::pinv_apply`]).
    pub fn pinv_dense(&self) -> DMatrix<f64> {
        let n = self.values.len();
        let lam_max = self.lambda_max_abs();
        let cut = self.rank_tol * lam_max;
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let lam = self.values[k];
            let inv = if lam_max > 0.0 && lam >= cut { 1.0 / lam } else { 0.0 };
            scaled.column_mut(k).scale_mut(inv);
        }
        &scaled * self.vectors.transpose()
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
///
/// The input is symmetrized as `(A + A^T)/2` before decomposing; inputs that
/// are not symmetric to within [`SYM_TOL`] relative are rejected.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigDecomp> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Config(format!("sym_eig on {}x{} matrix", n, a.ncols())));
    }
    let scale = max_abs(a);
    let asym = max_abs(&(a - a.transpose()));
    if asym > SYM_TOL * scale.max(1e-300) {
        return Err(Error::Numerical(format!(
            "sym_eig input asymmetric: |A - A^T| = {asym:.3e} vs |A| = {scale:.3e}"
        )));
    }
    if n == 0 {
        return Ok(EigDecomp {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
            rank_tol: PINV_RANK_TOL,
        });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::EigNonConvergence)?;

    // nalgebra returns eigenvalues unordered; sort ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok(EigDecomp { values, vectors, rank_tol: PINV_RANK_TOL })
}

/// Cached Cholesky factorization of a dense SPD matrix.
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, Dyn>,
    dim: usize,
}

impl SpdFactor {
    /// Factor `a`; fails with [`Error::NotSpd`] on a non-positive pivot.
    /// `what` names the matrix in the error message.
    pub fn new(a: &DMatrix<f64>, what: &str) -> Result<Self> {
        let dim = a.nrows();
        if dim != a.ncols() {
            return Err(Error::Config(format!("{what}: matrix not square")));
        }
        let chol = nalgebra::Cholesky::new(a.clone())
            .ok_or_else(|| Error::NotSpd(what.to_string()))?;
        Ok(Self { chol, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// Lower triangular factor `L` with `A = L L^T`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// One-shot SPD solve. Use [`SpdFactor`] when the factorization is reused.
pub fn spd_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(SpdFactor::new(a, "spd_solve operand")?.solve(rhs))
}

/// Max-norm of the entries (0 for empty matrices).
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `|a - b|_F / |b|_F`, falling back to the absolute Frobenius norm when
/// `b` vanishes.
pub fn rel_frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 { diff / scale } else { diff }
}

/// Materialize a linear operator column by column (diagnostic; the methods
/// themselves only ever compose applications).
pub fn dense_from_apply<F>(dim: usize, cols: usize, f: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut out = DMatrix::zeros(dim, cols);
    let mut unit = DVector::zeros(cols);
    for j in 0..cols {
        unit[j] = 1.0;
        out.set_column(j, &f(&unit));
        unit[j] = 0.0;
    }
    out
}
