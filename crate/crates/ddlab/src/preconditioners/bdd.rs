//! BDD: the balancing Neumann-Neumann preconditioner. The coarse solve
//! `S_C = C (C^T S_hat C)^-1 C^T` balances the residual (kills its
//! components against the substructure zero-energy traces) before and after
//! the weighted Neumann corrections `E S^+ E^T`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{dense_from_apply, SpdFactor};
use crate::operators::CouplingOperators;
use crate::Result;

pub struct Bdd<'a> {
    pub ops: &'a CouplingOperators,
    /// Factorization of `C^T S_hat C`; `None` when no substructure floats,
    /// in which case the preconditioner is plain `E S^+ E^T`.
    ctsc: Option<SpdFactor>,
}

pub fn bdd_build(ops: &CouplingOperators) -> Result<Bdd<'_>> {
    let ctsc = if ops.c.ncols() == 0 {
        None
    } else {
        let gram = ops.c.transpose() * &ops.s_hat * &ops.c;
        Some(SpdFactor::new(
            &gram,
            "C^T S_hat C (redundant nullspace columns in the balancing matrix?)",
        )?)
    };
    Ok(Bdd { ops, ctsc })
}

impl Bdd<'_> {
    /// Coarse correction `S_C r = C (C^T S_hat C)^-1 C^T r`.
    pub fn coarse_apply(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.ctsc {
            None => DVector::zeros(r.len()),
            Some(fac) => &self.ops.c * fac.solve(&(self.ops.c.transpose() * r)),
        }
    }

    /// `u = P_C E S^+ E^T P_C^T r + S_C r` with `P_C = I - S_C S_hat`.
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let ops = self.ops;
        match &self.ctsc {
            None => &ops.e * ops.apply_s_pinv(&(ops.e.transpose() * r)),
            Some(_) => {
                let y = self.coarse_apply(r);
                let balanced = r - &ops.s_hat * &y; // P_C^T r
                let v = &ops.e * ops.apply_s_pinv(&(ops.e.transpose() * balanced));
                let v = &v - self.coarse_apply(&(&ops.s_hat * &v)); // P_C v
                v + y
            }
        }
    }

    /// Dense preconditioner (diagnostic).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.ops.n_hat();
        dense_from_apply(n, n, |v| self.apply(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, sym_eig};
    use crate::model::{build_problem, DirichletEdges, Problem, ProblemConfig};
    use crate::operators::Scaling;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bar4_scalars() {
        let p = Problem::bar4();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let bdd = bdd_build(&ops).unwrap();
        let r = DVector::from_vec(vec![1.0]);
        // S_C = 1, P_C = 0, u = 1
        assert!((bdd.coarse_apply(&r)[0] - 1.0).abs() < 1e-14);
        assert!((bdd.apply(&r)[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pinned_problem_reduces_to_weighted_neumann() {
        let mut config = ProblemConfig::new(2, 2, 2);
        config.dirichlet = DirichletEdges::all();
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let bdd = bdd_build(&ops).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = DVector::from_fn(ops.n_hat(), |_, _| rng.random_range(-1.0..1.0));
        let expect = &ops.e * ops.apply_s_pinv(&(ops.e.transpose() * &r));
        assert_eq!(bdd.apply(&r), expect);
    }

    #[test]
    fn dense_preconditioner_is_symmetric_psd() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let bdd = bdd_build(&ops).unwrap();
        let m = bdd.dense();
        let scale = max_abs(&m);
        assert!(max_abs(&(&m - m.transpose())) <= 1e-11 * scale);
        let eig = sym_eig(&((&m + m.transpose()) * 0.5)).unwrap();
        assert!(eig.values[0] >= -1e-11 * eig.values[eig.values.len() - 1]);
    }

    #[test]
    fn coarse_correction_balances_the_residual() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let bdd = bdd_build(&ops).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = DVector::from_fn(ops.n_hat(), |_, _| rng.random_range(-1.0..1.0));
        let balanced = &r - &ops.s_hat * bdd.coarse_apply(&r);
        let resid = (ops.c.transpose() * balanced).norm();
        assert!(resid <= 1e-10 * r.norm(), "unbalanced: {resid:.3e}");
    }
}
