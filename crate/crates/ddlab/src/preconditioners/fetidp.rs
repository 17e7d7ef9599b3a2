//! FETI-DP: the dual-primal method. Corner dofs are single-valued by
//! construction (their jump rows are dropped), the remaining continuity is
//! enforced by multipliers, and every operator application routes through
//! the block elimination of the partially assembled `S_tilde`.
//!
//! [`pfetidp_apply`] is the primal counterpart, built strictly from the same
//! elimination path (no coarse basis matrix) so that its equality with BDDC
//! is a genuine cross-check.

use nalgebra::{DMatrix, DVector};

use crate::linalg::dense_from_apply;
use crate::model::Problem;
use crate::operators::{block_offsets, CoarseSplit, CouplingOperators};
use crate::Result;

/// A built FETI-DP system for one load.
pub struct FetiDp<'a> {
    split: &'a CoarseSplit,
    /// Jump operator restricted to the kept multiplier rows and the stacked
    /// r-dofs, `n_lambda_r x dim W_r`.
    pub b_r: DMatrix<f64>,
    /// Its scaled counterpart.
    pub b_d_r: DMatrix<f64>,
    /// Coarse and r components of the load.
    pub f_c: DVector<f64>,
    pub f_r: DVector<f64>,
    /// Dual right-hand side `B_r (S_tilde^-1 f)_r`.
    pub rhs: DVector<f64>,
}

/// Build the FETI-DP system for the interface residual `r_hat`. Multiplier
/// rows whose dof is a corner are dropped: those dofs are already continuous
/// in the partially assembled space and would only contribute exact-zero
/// constraints.
pub fn fetidp_build<'a>(
    problem: &Problem,
    ops: &CouplingOperators,
    split: &'a CoarseSplit,
    r_hat: &DVector<f64>,
) -> Result<FetiDp<'a>> {
    let offsets = block_offsets(problem);

    // local interface index -> stacked r index, per substructure
    let mut local_to_r: Vec<Vec<Option<usize>>> = Vec::with_capacity(problem.subs.len());
    for (sub, sp) in problem.subs.iter().zip(split.subs.iter()) {
        let mut map = vec![None; sub.iface_dim()];
        for (k, &local) in sp.r_local.iter().enumerate() {
            map[local] = Some(sp.r_offset + k);
        }
        local_to_r.push(map);
    }

    let n_rows: usize = (0..problem.n_interface())
        .filter(|&g| split.coarse_index[g].is_none())
        .map(|g| {
            let k = problem.interface.multiplicity[g];
            k * (k - 1) / 2
        })
        .sum();
    let wr = split.wr_dim();
    let mut b_r = DMatrix::zeros(n_rows, wr);
    let mut b_d_r = DMatrix::zeros(n_rows, wr);
    let mut row = 0;
    for (g, list) in problem.interface.sharers.iter().enumerate() {
        if split.coarse_index[g].is_some() {
            continue;
        }
        for a in 0..list.len() {
            for c in a + 1..list.len() {
                let (sub_a, loc_a) = list[a];
                let (sub_c, loc_c) = list[c];
                let ra = local_to_r[sub_a][loc_a].expect("non-corner dof is an r-dof");
                let rc = local_to_r[sub_c][loc_c].expect("non-corner dof is an r-dof");
                b_r[(row, ra)] = 1.0;
                b_r[(row, rc)] = -1.0;
                b_d_r[(row, ra)] = ops.d_p[offsets[sub_c] + loc_c];
                b_d_r[(row, rc)] = -ops.d_p[offsets[sub_a] + loc_a];
                row += 1;
            }
        }
    }

    let f_c = split.e_c.transpose() * r_hat;
    let f_r = split.e_r.transpose() * r_hat;
    let (_, u_r) = split.solve_tilde(&f_c, &f_r);
    let rhs = &b_r * u_r;

    Ok(FetiDp { split, b_r, b_d_r, f_c, f_r, rhs })
}

impl FetiDp<'_> {
    pub fn n_lambda(&self) -> usize {
        self.b_r.nrows()
    }

    /// Dual operator `F lambda = B S_tilde^-1 B^T lambda`.
    pub fn apply_f(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let t = self.b_r.transpose() * lambda;
        let zero_c = DVector::zeros(self.split.n_coarse());
        let (_, u_r) = self.split.solve_tilde(&zero_c, &t);
        &self.b_r * u_r
    }

    /// Dirichlet preconditioner `M mu = B_D S_tilde B_D^T mu`; since
    /// `B_D^T mu` vanishes at the coarse dofs this is `B_D,r S_rr B_D,r^T`.
    pub fn apply_m(&self, mu: &DVector<f64>) -> DVector<f64> {
        let t = self.b_d_r.transpose() * mu;
        let mut out = DVector::zeros(t.len());
        for sub in &self.split.subs {
            let nr = sub.r_local.len();
            if nr == 0 {
                continue;
            }
            let chunk = t.rows(sub.r_offset, nr);
            out.rows_mut(sub.r_offset, nr).copy_from(&(&sub.s_rr * chunk));
        }
        &self.b_d_r * out
    }

    /// Recover the averaged solution `u = E_c u_c + E_r u_r` from a
    /// converged multiplier.
    pub fn recover(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let f_r = &self.f_r - self.b_r.transpose() * lambda;
        let (u_c, u_r) = self.split.solve_tilde(&self.f_c, &f_r);
        &self.split.e_c * u_c + &self.split.e_r * u_r
    }

    /// Dense dual operator (diagnostic).
    pub fn dense_f_op(&self) -> DMatrix<f64> {
        let n = self.n_lambda();
        dense_from_apply(n, n, |v| self.apply_f(v))
    }

    /// Dense Dirichlet preconditioner (diagnostic).
    pub fn dense_m(&self) -> DMatrix<f64> {
        let n = self.n_lambda();
        dense_from_apply(n, n, |v| self.apply_m(v))
    }
}

/// P-FETI-DP: apply
/// `M r = E_r S_rr^-1 E_r^T r
///        + (E_c - E_r S_rr^-1 S_rc R_c) S_cc_star^-1 (...)^T r`
/// through the block elimination (coarse assembly, r solves, back
/// substitution), never forming a coarse basis.
pub fn pfetidp_apply(split: &CoarseSplit, r: &DVector<f64>) -> DVector<f64> {
    let f_c = split.e_c.transpose() * r;
    let f_r = split.e_r.transpose() * r;
    let (u_c, u_r) = split.solve_tilde(&f_c, &f_r);
    &split.e_c * u_c + &split.e_r * u_r
}

/// Dense P-FETI-DP preconditioner (diagnostic).
pub fn dense_pfetidp(split: &CoarseSplit) -> DMatrix<f64> {
    let n = split.e_r.nrows();
    dense_from_apply(n, n, |v| pfetidp_apply(split, v))
}
