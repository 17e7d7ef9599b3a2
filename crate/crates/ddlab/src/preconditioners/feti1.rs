//! FETI-1: the dual method with the natural coarse problem, plus its primal
//! counterpart P-FETI-1.
//!
//! The dual system `P^T F P lambda = P^T B S^+ f` with `F = B S^+ B^T` is
//! solved by projected conjugate gradients (see [`crate::krylov`]), with the
//! Dirichlet preconditioner `M = B_D S B_D^T`. The scaling matrix `Q` enters
//! the multiplier projection `P = I - Q G (G^T Q G)^-1 G^T` and the operator
//! `H = I - B^T Q G (G^T Q G)^-1 Z^T`; choosing `Q = M` (the Dirichlet
//! choice) is what ties P-FETI-1 to BDD.

use nalgebra::{DMatrix, DVector};

use crate::linalg::dense_from_apply;
use crate::linalg::SpdFactor;
use crate::operators::CouplingOperators;
use crate::{Error, Result};

/// Choice of the SPD weighting `Q` in the FETI-1 coarse projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QChoice {
    Identity,
    /// `Q = B_D S B_D^T`, the Dirichlet preconditioner itself.
    Dirichlet,
}

impl std::fmt::Display for QChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QChoice::Identity => write!(f, "identity"),
            QChoice::Dirichlet => write!(f, "dirichlet"),
        }
    }
}

/// A built FETI-1 system: cached coarse pieces plus the load it was built
/// for. All applications are compositions; nothing larger than `Q G` is
/// ever formed outside the dense diagnostics.
pub struct Feti1System<'a> {
    pub ops: &'a CouplingOperators,
    pub q_choice: QChoice,
    /// `Q G`, `n_lambda x n_Z`.
    qg: DMatrix<f64>,
    gtqg: Option<SpdFactor>,
    /// Initial multiplier satisfying the coarse constraint `G^T l = Z^T f`.
    pub lambda0: DVector<f64>,
    /// Projected dual right-hand side `P^T B S^+ f`.
    pub rhs: DVector<f64>,
    /// The load this system was built for (an element of `W'`).
    pub f: DVector<f64>,
    /// Cached `Z^T f`.
    pub ztf: DVector<f64>,
}

/// Build the FETI-1 system for load `f`. With an empty coarse space
/// (no floating substructures) the projections degenerate to the identity
/// and `lambda0 = 0`.
pub fn feti1_build<'a>(
    ops: &'a CouplingOperators,
    q_choice: QChoice,
    f: &DVector<f64>,
) -> Result<Feti1System<'a>> {
    let n_z = ops.null_dim();
    let n_lambda = ops.n_lambda();
    let ztf = ops.z.transpose() * f;

    let (qg, gtqg, lambda0) = if n_z == 0 {
        (DMatrix::zeros(n_lambda, 0), None, DVector::zeros(n_lambda))
    } else {
        let qg = match q_choice {
            QChoice::Identity => ops.g.clone(),
            QChoice::Dirichlet => {
                let mut qg = DMatrix::zeros(n_lambda, n_z);
                for j in 0..n_z {
                    let col = ops.g.column(j).into_owned();
                    qg.set_column(j, &apply_dirichlet(ops, &col));
                }
                qg
            }
        };
        let gtqg_mat = ops.g.transpose() * &qg;
        let gtqg = SpdFactor::new(
            &gtqg_mat,
            &format!("G^T Q G with Q = {q_choice} (natural coarse problem is singular)"),
        )?;
        let lambda0 = &qg * gtqg.solve(&ztf);
        let drift = (ops.g.transpose() * &lambda0 - &ztf).norm();
        if drift > 1e-10 * (1.0 + ztf.norm()) {
            return Err(Error::Numerical(format!(
                "initial multiplier violates the coarse constraint by {drift:.3e}"
            )));
        }
        (qg, Some(gtqg), lambda0)
    };

    let mut sys = Feti1System {
        ops,
        q_choice,
        qg,
        gtqg,
        lambda0,
        rhs: DVector::zeros(n_lambda),
        f: f.clone(),
        ztf,
    };
    let bsf = &ops.b * ops.apply_s_pinv(f);
    sys.rhs = sys.apply_pt(&bsf);
    Ok(sys)
}

fn apply_dirichlet(ops: &CouplingOperators, mu: &DVector<f64>) -> DVector<f64> {
    &ops.b_d * ops.apply_s(&(ops.b_d.transpose() * mu))
}

impl Feti1System<'_> {
    pub fn n_lambda(&self) -> usize {
        self.ops.n_lambda()
    }

    pub fn coarse_dim(&self) -> usize {
        self.qg.ncols()
    }

    /// Dual operator `F lambda = B S^+ B^T lambda`.
    pub fn apply_f(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.ops.b * self.ops.apply_s_pinv(&(self.ops.b.transpose() * lambda))
    }

    /// Dirichlet preconditioner `M mu = B_D S B_D^T mu` (independent of the
    /// `Q` choice).
    pub fn apply_m(&self, mu: &DVector<f64>) -> DVector<f64> {
        apply_dirichlet(self.ops, mu)
    }

    /// Multiplier projection `P v = v - Q G (G^T Q G)^-1 G^T v`.
    pub fn apply_p(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.gtqg {
            None => v.clone(),
            Some(fac) => v - &self.qg * fac.solve(&(self.ops.g.transpose() * v)),
        }
    }

    /// `P^T v = v - G (G^T Q G)^-1 (Q G)^T v`.
    pub fn apply_pt(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.gtqg {
            None => v.clone(),
            Some(fac) => v - &self.ops.g * fac.solve(&(self.qg.transpose() * v)),
        }
    }

    /// `H w = w - B^T Q G (G^T Q G)^-1 Z^T w`.
    pub fn apply_h(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.gtqg {
            None => w.clone(),
            Some(fac) => {
                w - self.ops.b.transpose()
                    * (&self.qg * fac.solve(&(self.ops.z.transpose() * w)))
            }
        }
    }

    /// `H^T w = w - Z (G^T Q G)^-1 (Q G)^T B w`.
    pub fn apply_ht(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.gtqg {
            None => w.clone(),
            Some(fac) => {
                w - &self.ops.z * fac.solve(&(self.qg.transpose() * (&self.ops.b * w)))
            }
        }
    }

    /// P-FETI-1: `u = E H^T S^+ H E^T r`, computed by composition.
    pub fn pfeti1_apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let w = self.apply_h(&(self.ops.e.transpose() * r));
        &self.ops.e * self.apply_ht(&self.ops.apply_s_pinv(&w))
    }

    /// Recover the substructure solution `w = S^+ (f - B^T l) + Z a` and its
    /// average `u = E w` from a converged multiplier.
    pub fn recover_primal(&self, lambda: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let residual_w = &self.f - self.ops.b.transpose() * lambda;
        let compat = (self.ops.z.transpose() * &residual_w).norm();
        if compat > 1e-8 * (1.0 + self.ztf.norm()) {
            return Err(Error::Numerical(format!(
                "coarse compatibility Z^T (f - B^T lambda) violated by {compat:.3e}"
            )));
        }
        let mut w = self.ops.apply_s_pinv(&residual_w);
        if let Some(fac) = &self.gtqg {
            let bsf = &self.ops.b * self.ops.apply_s_pinv(&self.f);
            let a = fac.solve(&(self.qg.transpose() * (self.apply_f(lambda) - bsf)));
            w += &self.ops.z * a;
        }
        let u = &self.ops.e * &w;
        Ok((w, u))
    }

    /// Dense multiplier projection (diagnostic).
    pub fn dense_p(&self) -> DMatrix<f64> {
        let n = self.n_lambda();
        dense_from_apply(n, n, |v| self.apply_p(v))
    }

    /// Dense `H` (diagnostic).
    pub fn dense_h(&self) -> DMatrix<f64> {
        let n = self.ops.w_dim();
        dense_from_apply(n, n, |v| self.apply_h(v))
    }

    /// Dense Dirichlet preconditioner `B_D S B_D^T` (diagnostic).
    pub fn dense_m(&self) -> DMatrix<f64> {
        let n = self.n_lambda();
        dense_from_apply(n, n, |v| self.apply_m(v))
    }

    /// Dense dual operator `F` (diagnostic).
    pub fn dense_f_op(&self) -> DMatrix<f64> {
        let n = self.n_lambda();
        dense_from_apply(n, n, |v| self.apply_f(v))
    }

    /// Dense P-FETI-1 preconditioner (diagnostic).
    pub fn dense_pfeti1(&self) -> DMatrix<f64> {
        let n = self.ops.n_hat();
        dense_from_apply(n, n, |v| self.pfeti1_apply(v))
    }
}
