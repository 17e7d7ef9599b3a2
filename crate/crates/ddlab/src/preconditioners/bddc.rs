//! BDDC: subdomain correction `E_r S_rr^-1 E_r^T` plus a coarse correction
//! built from explicit coarse basis functions. Each basis function takes the
//! value 1 at one coarse dof, 0 at the others, and is extended to the
//! remaining dofs with minimal energy:
//! `Psi = (R_c; -S_rr^-1 S_rc R_c)`, so `Psi^T S Psi` equals the coarse
//! Schur complement `S_cc_star` assembled by the elimination path: an
//! equality the tests verify rather than reuse.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{dense_from_apply, SpdFactor};
use crate::operators::{CoarseSplit, CouplingOperators};
use crate::Result;

/// The energy-minimal coarse basis and its Gram matrix.
pub struct CoarseBasis {
    /// `(dim W) x n_c`; rows at corner dofs reproduce `R_c`.
    pub psi: DMatrix<f64>,
    /// `Psi^T S Psi`.
    pub coarse_gram: DMatrix<f64>,
}

pub struct Bddc<'a> {
    split: &'a CoarseSplit,
    pub basis: CoarseBasis,
    /// Cached `E Psi`, `n_hat x n_c`.
    e_psi: DMatrix<f64>,
    gram_factor: SpdFactor,
}

/// Build the coarse basis and the BDDC application.
pub fn bddc_build<'a>(
    ops: &CouplingOperators,
    split: &'a CoarseSplit,
) -> Result<Bddc<'a>> {
    let w_dim = ops.w_dim();
    let n_c = split.n_coarse();
    let mut psi = DMatrix::zeros(w_dim, n_c);
    for (blk, sp) in ops.blocks.iter().zip(split.subs.iter()) {
        for (k, &local) in sp.c_local.iter().enumerate() {
            for j in 0..n_c {
                psi[(blk.offset + local, j)] = sp.r_c[(k, j)];
            }
        }
        if !sp.r_local.is_empty() {
            let ext = -sp.s_rr_factor.solve_mat(&(&sp.s_rc * &sp.r_c));
            for (k, &local) in sp.r_local.iter().enumerate() {
                for j in 0..n_c {
                    psi[(blk.offset + local, j)] = ext[(k, j)];
                }
            }
        }
    }

    // blockwise Psi^T S Psi
    let mut coarse_gram = DMatrix::zeros(n_c, n_c);
    for blk in &ops.blocks {
        let psi_i = psi.view((blk.offset, 0), (blk.dim, n_c));
        coarse_gram += psi_i.transpose() * &blk.s * psi_i;
    }
    let gram_factor = SpdFactor::new(&coarse_gram, "coarse Gram matrix Psi^T S Psi")?;
    let e_psi = &ops.e * &psi;

    Ok(Bddc { split, basis: CoarseBasis { psi, coarse_gram }, e_psi, gram_factor })
}

impl Bddc<'_> {
    /// `u = E_r S_rr^-1 E_r^T r + E Psi (Psi^T S Psi)^-1 Psi^T E^T r`.
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let f_r = self.split.e_r.transpose() * r;
        let mut t = DVector::zeros(f_r.len());
        for sub in &self.split.subs {
            let nr = sub.r_local.len();
            if nr == 0 {
                continue;
            }
            let chunk = f_r.rows(sub.r_offset, nr).into_owned();
            t.rows_mut(sub.r_offset, nr).copy_from(&sub.s_rr_factor.solve(&chunk));
        }
        let subdomain = &self.split.e_r * t;
        let coarse = &self.e_psi * self.gram_factor.solve(&(self.e_psi.transpose() * r));
        subdomain + coarse
    }

    /// Dense preconditioner (diagnostic).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.e_psi.nrows();
        dense_from_apply(n, n, |v| self.apply(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, rel_frobenius_diff, sym_eig};
    use crate::model::{build_problem, Problem, ProblemConfig};
    use crate::operators::{build_coarse_split, Scaling};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bar4_coarse_basis_is_the_constant_trace() {
        let p = Problem::bar4();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        assert_eq!(bddc.basis.psi, DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
        assert_eq!(bddc.basis.coarse_gram[(0, 0)], 1.0);
        // M_BDDC = S_hat^-1 = 1
        let u = bddc.apply(&DVector::from_vec(vec![1.0]));
        assert!((u[0] - 1.0).abs() < 1e-14);
        assert_eq!(bddc.apply(&DVector::zeros(1))[0], 0.0);
    }

    #[test]
    fn gram_matrix_equals_coarse_schur_complement() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let diff = rel_frobenius_diff(&bddc.basis.coarse_gram, &split.s_cc_star);
        assert!(diff <= 1e-10, "Psi^T S Psi vs S_cc_star: {diff:.3e}");
    }

    #[test]
    fn coarse_basis_rows_at_corners_reproduce_r_c() {
        let p = build_problem(&ProblemConfig::new(3, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        for (blk, sp) in ops.blocks.iter().zip(split.subs.iter()) {
            for (k, &local) in sp.c_local.iter().enumerate() {
                for j in 0..split.n_coarse() {
                    assert_eq!(bddc.basis.psi[(blk.offset + local, j)], sp.r_c[(k, j)]);
                }
            }
        }
    }

    #[test]
    fn energy_minimality_of_the_extension() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let s = ops.dense_s();
        let base_energy = (bddc.basis.psi.transpose() * &s * &bddc.basis.psi).trace();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            // perturb only the non-corner rows
            let mut delta = DMatrix::zeros(ops.w_dim(), split.n_coarse());
            for (blk, sp) in ops.blocks.iter().zip(split.subs.iter()) {
                for &local in &sp.r_local {
                    for j in 0..split.n_coarse() {
                        delta[(blk.offset + local, j)] = 0.1 * rng.random_range(-1.0..1.0);
                    }
                }
            }
            let cand = &bddc.basis.psi + delta;
            let energy = (cand.transpose() * &s * cand).trace();
            assert!(energy >= base_energy - 1e-12 * base_energy.abs());
        }
    }

    #[test]
    fn dense_preconditioner_is_symmetric_psd() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let m = bddc.dense();
        let scale = max_abs(&m);
        assert!(max_abs(&(&m - m.transpose())) <= 1e-11 * scale);
        let eig = sym_eig(&((&m + m.transpose()) * 0.5)).unwrap();
        assert!(eig.values[0] >= -1e-11 * eig.values[eig.values.len() - 1]);
    }

    #[test]
    fn two_independent_paths_agree() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let m_bddc = bddc.dense();
        let m_pfetidp = crate::preconditioners::fetidp::dense_pfetidp(&split);
        let diff = rel_frobenius_diff(&m_pfetidp, &m_bddc);
        assert!(diff <= 1e-10, "P-FETI-DP vs BDDC: {diff:.3e}");
    }
}
