//! The global substructuring algebra on top of a condensed [`Problem`]:
//! embedding `R`, fully redundant jump operator `B`, weight matrix `D_P`,
//! averaging `E = R^T D_P`, scaled jump `B_D`, the natural coarse space
//! `(Z, G = BZ, C = EZ)` of the dual methods, the assembled Schur complement
//! `S_hat = R^T S R`, and the corner-based coarse split used by FETI-DP and
//! BDDC.
//!
//! The defining identities (`BR = 0`, `ER = I`, `B_D^T B + RE = I`,
//! `B^T B_D E^T = 0`) are verified numerically by
//! [`CouplingOperators::verify_algebra`] rather than assumed.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{max_abs, sym_eig, EigDecomp, SpdFactor};
use crate::model::Problem;
use crate::{Error, Result};

/// Choice of the interface weights `D_P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// Weight `1 / multiplicity` for every copy of a dof.
    Multiplicity,
    /// Weight proportional to the local Schur diagonal, robust to
    /// coefficient jumps between substructures.
    Stiffness,
}

impl std::fmt::Display for Scaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scaling::Multiplicity => write!(f, "multiplicity"),
            Scaling::Stiffness => write!(f, "stiffness"),
        }
    }
}

/// Per-substructure cached pieces: the Schur complement, its spectral
/// decomposition (backing `S^+`), and the block offset in `W`.
pub struct SubBlock {
    pub offset: usize,
    pub dim: usize,
    pub s: DMatrix<f64>,
    pub eig: EigDecomp,
}

/// Max-norm residuals of the four defining identities.
#[derive(Clone, Copy, Debug)]
pub struct AlgebraReport {
    /// `|B R|`: structural zero, exact.
    pub br: f64,
    /// `|E R - I|`.
    pub er_minus_identity: f64,
    /// `|B_D^T B + R E - I|`.
    pub jump_plus_average: f64,
    /// `|B^T B_D E^T|`.
    pub b_bd_et: f64,
}

impl AlgebraReport {
    pub const TOL: f64 = 1e-12;

    pub fn pass(&self) -> bool {
        self.max() <= Self::TOL
    }

    pub fn max(&self) -> f64 {
        self.br
            .max(self.er_minus_identity)
            .max(self.jump_plus_average)
            .max(self.b_bd_et)
    }
}

/// The assembled coupling operators for one problem + scaling choice.
pub struct CouplingOperators {
    pub scaling: Scaling,
    /// Embedding of the continuous interface space into the broken one,
    /// `(dim W) x n_hat`, entries 0/1.
    pub r: DMatrix<f64>,
    /// Fully redundant signed jump operator, one row per unordered pair of
    /// sharers per dof; `+1` on the lower substructure id.
    pub b: DMatrix<f64>,
    /// Diagonal of the weight matrix on `W`.
    pub d_p: DVector<f64>,
    /// Averaging operator `E = R^T D_P`, `n_hat x (dim W)`.
    pub e: DMatrix<f64>,
    /// Scaled jump operator: the `+1` of a row pairing `(i, j)` carries the
    /// `D_P` weight of `j`'s copy, the `-1` the weight of `i`'s copy.
    pub b_d: DMatrix<f64>,
    /// Block-diagonal stack of the substructure nullspace bases.
    pub z: DMatrix<f64>,
    /// Natural coarse matrix `G = B Z`.
    pub g: DMatrix<f64>,
    /// Balancing matrix `C = E Z`.
    pub c: DMatrix<f64>,
    /// Assembled interface Schur complement `R^T S R`, SPD.
    pub s_hat: DMatrix<f64>,
    s_hat_factor: SpdFactor,
    pub blocks: Vec<SubBlock>,
    /// Stacked condensed loads (unit body force), an element of `W'`.
    pub f_stack: DVector<f64>,
}

impl CouplingOperators {
    pub fn build(problem: &Problem, scaling: Scaling) -> Result<Self> {
        let mut blocks = Vec::with_capacity(problem.subs.len());
        let mut offset = 0;
        for sub in &problem.subs {
            let dim = sub.iface_dim();
            blocks.push(SubBlock { offset, dim, s: sub.s.clone(), eig: sym_eig(&sub.s)? });
            offset += dim;
        }

        let (r, b) = build_embedding_and_jump(problem);
        let (d_p, e, b_d) = build_scalings(problem, scaling)?;
        let (z, g, c) = build_natural_coarse(problem, &b, &e);
        let s_hat = assemble_global_schur(problem);
        let s_hat_factor = SpdFactor::new(
            &s_hat,
            "assembled Schur complement (insufficient Dirichlet boundary?)",
        )?;

        let w_dim = offset;
        let mut f_stack = DVector::zeros(w_dim);
        for (sub, block) in problem.subs.iter().zip(blocks.iter()) {
            f_stack.rows_mut(block.offset, block.dim).copy_from(&sub.f);
        }

        Ok(Self { scaling, r, b, d_p, e, b_d, z, g, c, s_hat, s_hat_factor, blocks, f_stack })
    }

    pub fn w_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn n_hat(&self) -> usize {
        self.r.ncols()
    }

    pub fn n_lambda(&self) -> usize {
        self.b.nrows()
    }

    /// Number of columns of `Z` (total nullspace dimension).
    pub fn null_dim(&self) -> usize {
        self.z.ncols()
    }

    /// Block-diagonal product `S w`.
    pub fn apply_s(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.w_dim());
        for blk in &self.blocks {
            let chunk = w.rows(blk.offset, blk.dim);
            out.rows_mut(blk.offset, blk.dim).copy_from(&(&blk.s * chunk));
        }
        out
    }

    /// Block-diagonal pseudoinverse application `S^+ w`.
    pub fn apply_s_pinv(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.w_dim());
        for blk in &self.blocks {
            let chunk = w.rows(blk.offset, blk.dim).into_owned();
            out.rows_mut(blk.offset, blk.dim).copy_from(&blk.eig.pinv_apply(&chunk));
        }
        out
    }

    /// Solve `S_hat u = rhs` with the cached factorization.
    pub fn solve_s_hat(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.s_hat_factor.solve(rhs)
    }

    /// Dense block-diagonal `S` (diagnostic).
    pub fn dense_s(&self) -> DMatrix<f64> {
        let n = self.w_dim();
        let mut out = DMatrix::zeros(n, n);
        for blk in &self.blocks {
            out.view_mut((blk.offset, blk.offset), (blk.dim, blk.dim)).copy_from(&blk.s);
        }
        out
    }

    /// Dense block-diagonal `S^+` (diagnostic).
    pub fn dense_s_pinv(&self) -> DMatrix<f64> {
        let n = self.w_dim();
        let mut out = DMatrix::zeros(n, n);
        for blk in &self.blocks {
            out.view_mut((blk.offset, blk.offset), (blk.dim, blk.dim))
                .copy_from(&blk.eig.pinv_dense());
        }
        out
    }

    /// Max-norm residuals of the four defining identities.
    pub fn verify_algebra(&self) -> AlgebraReport {
        let n_hat = self.n_hat();
        let w = self.w_dim();
        let br = max_abs(&(&self.b * &self.r));
        let er = max_abs(&(&self.e * &self.r - DMatrix::identity(n_hat, n_hat)));
        let jump = max_abs(
            &(self.b_d.transpose() * &self.b + &self.r * &self.e - DMatrix::identity(w, w)),
        );
        let b_bd_et = max_abs(&(self.b.transpose() * &self.b_d * self.e.transpose()));
        AlgebraReport { br, er_minus_identity: er, jump_plus_average: jump, b_bd_et }
    }
}

/// Build the 0/1 embedding `R` and the fully redundant jump operator `B`.
/// A dof shared by `k` substructures contributes `k (k-1) / 2` rows to `B`.
pub fn build_embedding_and_jump(problem: &Problem) -> (DMatrix<f64>, DMatrix<f64>) {
    let n_hat = problem.n_interface();
    let w_dim = problem.w_dim();
    let offsets = block_offsets(problem);

    let mut r = DMatrix::zeros(w_dim, n_hat);
    for (g, list) in problem.interface.sharers.iter().enumerate() {
        for &(sub, local) in list {
            r[(offsets[sub] + local, g)] = 1.0;
        }
    }

    let mut b = DMatrix::zeros(jump_rows(problem), w_dim);
    let mut row = 0;
    for list in &problem.interface.sharers {
        for a in 0..list.len() {
            for c in a + 1..list.len() {
                let (sub_a, loc_a) = list[a];
                let (sub_c, loc_c) = list[c];
                b[(row, offsets[sub_a] + loc_a)] = 1.0;
                b[(row, offsets[sub_c] + loc_c)] = -1.0;
                row += 1;
            }
        }
    }
    (r, b)
}

/// Build the weights `D_P`, the averaging operator `E = R^T D_P` and the
/// scaled jump `B_D`. The `B_D` convention gives each signed entry the
/// weight of the *other* substructure's copy; with the fully redundant `B`
/// this makes `B_D^T B + R E = I` hold per dof.
pub fn build_scalings(
    problem: &Problem,
    scaling: Scaling,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n_hat = problem.n_interface();
    let w_dim = problem.w_dim();
    let offsets = block_offsets(problem);

    let mut d_p = DVector::zeros(w_dim);
    for (g, list) in problem.interface.sharers.iter().enumerate() {
        match scaling {
            Scaling::Multiplicity => {
                let w = 1.0 / list.len() as f64;
                for &(sub, local) in list {
                    d_p[offsets[sub] + local] = w;
                }
            }
            Scaling::Stiffness => {
                let diags: Vec<f64> =
                    list.iter().map(|&(sub, local)| problem.subs[sub].s[(local, local)]).collect();
                let total: f64 = diags.iter().sum();
                if total.is_nan() || total <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "stiffness scaling: zero Schur diagonal sum at interface dof {g}"
                    )));
                }
                for (&(sub, local), &d) in list.iter().zip(diags.iter()) {
                    d_p[offsets[sub] + local] = d / total;
                }
            }
        }
    }

    let mut e = DMatrix::zeros(n_hat, w_dim);
    for (g, list) in problem.interface.sharers.iter().enumerate() {
        for &(sub, local) in list {
            let w = offsets[sub] + local;
            e[(g, w)] = d_p[w];
        }
    }

    let mut b_d = DMatrix::zeros(jump_rows(problem), w_dim);
    let mut row = 0;
    for list in &problem.interface.sharers {
        for a in 0..list.len() {
            for c in a + 1..list.len() {
                let (sub_a, loc_a) = list[a];
                let (sub_c, loc_c) = list[c];
                let wa = offsets[sub_a] + loc_a;
                let wc = offsets[sub_c] + loc_c;
                b_d[(row, wa)] = d_p[wc];
                b_d[(row, wc)] = -d_p[wa];
                row += 1;
            }
        }
    }

    Ok((d_p, e, b_d))
}

fn jump_rows(problem: &Problem) -> usize {
    problem.interface.multiplicity.iter().map(|&k| k * (k - 1) / 2).sum()
}

/// Assemble `S_hat = R^T S R` by scattering the substructure Schur
/// complements into the global interface numbering.
pub fn assemble_global_schur(problem: &Problem) -> DMatrix<f64> {
    let n = problem.n_interface();
    let mut s_hat = DMatrix::zeros(n, n);
    for sub in &problem.subs {
        let map = &sub.iface_local_to_global;
        for (a, &ga) in map.iter().enumerate() {
            for (b, &gb) in map.iter().enumerate() {
                s_hat[(ga, gb)] += sub.s[(a, b)];
            }
        }
    }
    s_hat
}

/// Stack the substructure nullspace bases block-diagonally and form the
/// natural coarse matrices `G = B Z` and `C = E Z`. All three have zero
/// columns when no substructure floats.
pub fn build_natural_coarse(
    problem: &Problem,
    b: &DMatrix<f64>,
    e: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let w_dim = problem.w_dim();
    let offsets = block_offsets(problem);
    let n_z: usize = problem.subs.iter().map(|s| s.z.ncols()).sum();
    let mut z = DMatrix::zeros(w_dim, n_z);
    let mut col = 0;
    for sub in &problem.subs {
        for c in 0..sub.z.ncols() {
            z.view_mut((offsets[sub.id], col), (sub.iface_dim(), 1)).copy_from(&sub.z.column(c));
            col += 1;
        }
    }
    let g = b * &z;
    let c = e * &z;
    (z, g, c)
}

pub(crate) fn block_offsets(problem: &Problem) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(problem.subs.len());
    let mut acc = 0;
    for sub in &problem.subs {
        offsets.push(acc);
        acc += sub.iface_dim();
    }
    offsets
}

/// Per-substructure corner/remainder split of one Schur complement.
pub struct SubSplit {
    /// Local interface indices that are corner dofs, ascending.
    pub c_local: Vec<usize>,
    /// The remaining local interface indices, ascending.
    pub r_local: Vec<usize>,
    /// Map of global coarse dofs to this substructure's corner dofs,
    /// `|c_local| x n_c`, entries 0/1.
    pub r_c: DMatrix<f64>,
    pub s_cc: DMatrix<f64>,
    /// Coupling block, `|r_local| x |c_local|`.
    pub s_rc: DMatrix<f64>,
    pub s_rr: DMatrix<f64>,
    pub s_rr_factor: SpdFactor,
    /// Offset of this substructure's r-dofs in the stacked `W_r`.
    pub r_offset: usize,
}

/// The FETI-DP / BDDC block decomposition with corner coarse dofs.
pub struct CoarseSplit {
    /// Global interface dofs designated coarse, ascending.
    pub corner_dofs: Vec<usize>,
    /// Global dof -> coarse index (None for r-dofs).
    pub coarse_index: Vec<Option<usize>>,
    pub subs: Vec<SubSplit>,
    /// Assembled coarse block `sum R_c^T S_cc R_c`.
    pub s_cc_tilde: DMatrix<f64>,
    /// Coarse Schur complement `S_cc_tilde - R_c^T S_rc^T S_rr^-1 S_rc R_c`.
    pub s_cc_star: DMatrix<f64>,
    s_cc_star_factor: SpdFactor,
    /// Columns of `E` at the stacked r-dofs, `n_hat x dim W_r`.
    pub e_r: DMatrix<f64>,
    /// Coarse distribution `E_c`, `n_hat x n_c`.
    pub e_c: DMatrix<f64>,
}

impl CoarseSplit {
    pub fn n_coarse(&self) -> usize {
        self.corner_dofs.len()
    }

    pub fn wr_dim(&self) -> usize {
        self.e_r.ncols()
    }

    /// Apply `S_tilde` in `(u_c, u_r)` coordinates by block multiplication.
    pub fn apply_tilde(
        &self,
        u_c: &DVector<f64>,
        u_r: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut f_c = &self.s_cc_tilde * u_c;
        let mut f_r = DVector::zeros(self.wr_dim());
        for sub in &self.subs {
            let nr = sub.r_local.len();
            let uc_i = &sub.r_c * u_c;
            let ur_i = u_r.rows(sub.r_offset, nr).into_owned();
            f_c += sub.r_c.transpose() * (sub.s_rc.transpose() * &ur_i);
            let out = &sub.s_rc * uc_i + &sub.s_rr * ur_i;
            f_r.rows_mut(sub.r_offset, nr).copy_from(&out);
        }
        (f_c, f_r)
    }

    /// Solve `S_tilde (u_c, u_r) = (f_c, f_r)` by block elimination:
    /// r-solves, coarse Schur solve, r back-substitution.
    pub fn solve_tilde(
        &self,
        f_c: &DVector<f64>,
        f_r: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut g_c = f_c.clone();
        for sub in &self.subs {
            let nr = sub.r_local.len();
            if nr == 0 {
                continue;
            }
            let fr_i = f_r.rows(sub.r_offset, nr).into_owned();
            let t = sub.s_rr_factor.solve(&fr_i);
            g_c -= sub.r_c.transpose() * (sub.s_rc.transpose() * t);
        }
        let u_c = self.s_cc_star_factor.solve(&g_c);
        let mut u_r = DVector::zeros(self.wr_dim());
        for sub in &self.subs {
            let nr = sub.r_local.len();
            if nr == 0 {
                continue;
            }
            let fr_i = f_r.rows(sub.r_offset, nr).into_owned();
            let rhs = fr_i - &sub.s_rc * (&sub.r_c * &u_c);
            u_r.rows_mut(sub.r_offset, nr).copy_from(&sub.s_rr_factor.solve(&rhs));
        }
        (u_c, u_r)
    }

    /// Solve the coarse Schur system `S_cc_star x = rhs`.
    pub fn solve_coarse(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.s_cc_star_factor.solve(rhs)
    }

    /// Dense `S_tilde` in `(coarse, stacked r)` coordinates (diagnostic).
    pub fn dense_tilde(&self) -> DMatrix<f64> {
        let nc = self.n_coarse();
        let nr = self.wr_dim();
        let mut out = DMatrix::zeros(nc + nr, nc + nr);
        out.view_mut((0, 0), (nc, nc)).copy_from(&self.s_cc_tilde);
        for sub in &self.subs {
            let nri = sub.r_local.len();
            let src = &sub.s_rc * &sub.r_c; // nri x nc
            out.view_mut((nc + sub.r_offset, 0), (nri, nc)).copy_from(&src);
            out.view_mut((0, nc + sub.r_offset), (nc, nri)).copy_from(&src.transpose());
            out.view_mut((nc + sub.r_offset, nc + sub.r_offset), (nri, nri))
                .copy_from(&sub.s_rr);
        }
        out
    }
}

/// Split every substructure Schur complement by the corner rule (coarse
/// dofs are the interface dofs sitting on substructure-rectangle vertices),
/// assemble the coarse blocks and split the averaging operator into its
/// r-dof and coarse distributions.
pub fn build_coarse_split(problem: &Problem, e: &DMatrix<f64>) -> Result<CoarseSplit> {
    let n_hat = problem.n_interface();
    let offsets = block_offsets(problem);

    let corner_dofs: Vec<usize> = (0..n_hat).filter(|&g| problem.interface.is_vertex[g]).collect();
    let n_c = corner_dofs.len();
    let mut coarse_index = vec![None; n_hat];
    for (k, &g) in corner_dofs.iter().enumerate() {
        coarse_index[g] = Some(k);
    }

    let mut subs = Vec::with_capacity(problem.subs.len());
    let mut s_cc_tilde = DMatrix::zeros(n_c, n_c);
    let mut r_offset = 0;
    for sub in &problem.subs {
        let dim = sub.iface_dim();
        let mut c_local = Vec::new();
        let mut r_local = Vec::new();
        for local in 0..dim {
            if coarse_index[sub.iface_local_to_global[local]].is_some() {
                c_local.push(local);
            } else {
                r_local.push(local);
            }
        }
        if c_local.is_empty() && !sub.touches_dirichlet {
            return Err(Error::Config(format!(
                "floating substructure {} has no corner dof; its S_rr block is singular",
                sub.id
            )));
        }
        let nc_i = c_local.len();
        let nr_i = r_local.len();
        let mut r_c = DMatrix::zeros(nc_i, n_c);
        for (k, &local) in c_local.iter().enumerate() {
            r_c[(k, coarse_index[sub.iface_local_to_global[local]].unwrap())] = 1.0;
        }
        let s_cc = DMatrix::from_fn(nc_i, nc_i, |i, j| sub.s[(c_local[i], c_local[j])]);
        let s_rc = DMatrix::from_fn(nr_i, nc_i, |i, j| sub.s[(r_local[i], c_local[j])]);
        let s_rr = DMatrix::from_fn(nr_i, nr_i, |i, j| sub.s[(r_local[i], r_local[j])]);
        let s_rr_factor = SpdFactor::new(
            &s_rr,
            &format!("S_rr block of substructure {} (missing corner?)", sub.id),
        )?;
        s_cc_tilde += r_c.transpose() * &s_cc * &r_c;
        subs.push(SubSplit { c_local, r_local, r_c, s_cc, s_rc, s_rr, s_rr_factor, r_offset });
        r_offset += nr_i;
    }
    let wr_dim = r_offset;

    let mut s_cc_star = s_cc_tilde.clone();
    for sub in &subs {
        if sub.r_local.is_empty() {
            continue;
        }
        let x = sub.s_rr_factor.solve_mat(&sub.s_rc);
        let term = sub.s_rc.transpose() * x;
        s_cc_star -= sub.r_c.transpose() * term * &sub.r_c;
    }
    let s_cc_star_factor = SpdFactor::new(&s_cc_star, "coarse Schur complement S_cc_star")?;

    let mut e_r = DMatrix::zeros(n_hat, wr_dim);
    let mut e_c = DMatrix::zeros(n_hat, n_c);
    for (sub, split) in problem.subs.iter().zip(subs.iter()) {
        for (k, &local) in split.r_local.iter().enumerate() {
            e_r.set_column(split.r_offset + k, &e.column(offsets[sub.id] + local));
        }
        for &local in &split.c_local {
            let j = coarse_index[sub.iface_local_to_global[local]].unwrap();
            let col = e.column(offsets[sub.id] + local);
            for i in 0..n_hat {
                e_c[(i, j)] += col[i];
            }
        }
    }

    Ok(CoarseSplit {
        corner_dofs,
        coarse_index,
        subs,
        s_cc_tilde,
        s_cc_star,
        s_cc_star_factor,
        e_r,
        e_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_solve;
    use crate::model::{build_problem, full_assembly, CoefficientField, Problem, ProblemConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bar4_ops() -> CouplingOperators {
        CouplingOperators::build(&Problem::bar4(), Scaling::Multiplicity).unwrap()
    }

    #[test]
    fn bar4_operators_are_the_hand_values() {
        let ops = bar4_ops();
        assert_eq!(ops.r, DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
        assert_eq!(ops.b, DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        assert_eq!(ops.d_p, DVector::from_vec(vec![0.5, 0.5]));
        assert_eq!(ops.e, DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        assert_eq!(ops.b_d, DMatrix::from_row_slice(1, 2, &[0.5, -0.5]));
        assert_eq!(ops.z, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(ops.g, DMatrix::from_row_slice(1, 1, &[-1.0]));
        assert_eq!(ops.c, DMatrix::from_row_slice(1, 1, &[0.5]));
        assert_eq!(ops.s_hat, DMatrix::from_row_slice(1, 1, &[1.0]));

        let rep = ops.verify_algebra();
        assert_eq!(rep.max(), 0.0);
    }

    #[test]
    fn crosspoint_yields_six_jump_rows() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let cross = (0..p.n_interface()).find(|&g| p.interface.multiplicity[g] == 4).unwrap();
        let offsets = block_offsets(&p);
        let copies: Vec<usize> = p.interface.sharers[cross]
            .iter()
            .map(|&(sub, local)| offsets[sub] + local)
            .collect();
        let rows = (0..ops.n_lambda())
            .filter(|&r| copies.iter().any(|&c| ops.b[(r, c)] != 0.0))
            .count();
        assert_eq!(rows, 6);
    }

    #[test]
    fn br_is_structurally_zero() {
        for config in [ProblemConfig::new(2, 2, 2), ProblemConfig::new(3, 2, 3)] {
            let p = build_problem(&config).unwrap();
            let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
            assert_eq!(max_abs(&(&ops.b * &ops.r)), 0.0);
        }
    }

    #[test]
    fn algebra_identities_multiplicity_four_by_four() {
        let p = build_problem(&ProblemConfig::new(4, 4, 4)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let rep = ops.verify_algebra();
        assert_eq!(rep.br, 0.0);
        assert_eq!(rep.er_minus_identity, 0.0); // multiplicities 2 and 4 sum exactly
        assert!(rep.jump_plus_average <= 1e-13);
        assert!(rep.b_bd_et <= 1e-13);
        assert!(rep.pass());
    }

    #[test]
    fn algebra_identities_stiffness_with_jumps() {
        let mut config = ProblemConfig::new(4, 4, 2);
        config.coefficient = CoefficientField::Checkerboard(1.0, 1e6);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Stiffness).unwrap();
        let rep = ops.verify_algebra();
        assert!(rep.max() <= 1e-10, "residual {}", rep.max());
    }

    /// Two substructures, pinned on the outer left and right edges: mirror
    /// images of each other, so the Schur diagonals at shared dofs agree and
    /// the weights reduce to the pure coefficient ratio.
    fn mirror_config() -> ProblemConfig {
        let mut config = ProblemConfig::new(2, 1, 2);
        config.dirichlet =
            crate::model::DirichletEdges { left: true, right: true, bottom: false, top: false };
        config
    }

    #[test]
    fn stiffness_weights_follow_coefficient_jumps() {
        let mut config = mirror_config();
        config.coefficient = CoefficientField::PerSubstructure(vec![1.0, 1e6]);
        let p = build_problem(&config).unwrap();
        let (d_p, _, _) = build_scalings(&p, Scaling::Stiffness).unwrap();
        let small = 1.0 / (1.0 + 1e6);
        let dim0 = p.subs[0].iface_dim();
        for k in 0..dim0 {
            assert!((d_p[k] - small).abs() <= 1e-10 * small, "got {:e}", d_p[k]);
        }
        for k in 0..p.subs[1].iface_dim() {
            assert!((d_p[dim0 + k] - (1.0 - small)).abs() <= 1e-12);
        }
    }

    #[test]
    fn stiffness_equals_multiplicity_for_uniform_coefficient() {
        let p = build_problem(&mirror_config()).unwrap();
        let (dm, _, _) = build_scalings(&p, Scaling::Multiplicity).unwrap();
        let (ds, _, _) = build_scalings(&p, Scaling::Stiffness).unwrap();
        for (a, b) in dm.iter().zip(ds.iter()) {
            assert!((a - b).abs() <= 1e-12, "multiplicity {a} vs stiffness {b}");
        }
    }

    #[test]
    fn partition_of_unity_per_dof() {
        let mut config = ProblemConfig::new(3, 2, 2);
        config.coefficient = CoefficientField::Checkerboard(1.0, 50.0);
        let p = build_problem(&config).unwrap();
        let offsets = block_offsets(&p);
        for scaling in [Scaling::Multiplicity, Scaling::Stiffness] {
            let (d_p, _, _) = build_scalings(&p, scaling).unwrap();
            for list in &p.interface.sharers {
                let total: f64 = list.iter().map(|&(sub, local)| d_p[offsets[sub] + local]).sum();
                assert!((total - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn global_schur_matches_triple_product_and_full_elimination() {
        let config = ProblemConfig::new(2, 2, 2);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();

        let triple = ops.r.transpose() * ops.dense_s() * &ops.r;
        assert!(max_abs(&(&triple - &ops.s_hat)) <= 1e-13 * max_abs(&ops.s_hat));

        let full = full_assembly(&config).unwrap();
        let nf = full.k.nrows();
        let iface = &full.iface_positions;
        let interior: Vec<usize> = (0..nf).filter(|i| !iface.contains(i)).collect();
        let ni = interior.len();
        let ng = iface.len();
        let k_ii = DMatrix::from_fn(ni, ni, |i, j| full.k[(interior[i], interior[j])]);
        let k_ig = DMatrix::from_fn(ni, ng, |i, j| full.k[(interior[i], iface[j])]);
        let k_gg = DMatrix::from_fn(ng, ng, |i, j| full.k[(iface[i], iface[j])]);
        let x = SpdFactor::new(&k_ii, "test interior").unwrap().solve_mat(&k_ig);
        let s_oracle = k_gg - k_ig.transpose() * x;
        let rel = max_abs(&(&s_oracle - &ops.s_hat)) / max_abs(&ops.s_hat);
        assert!(rel <= 1e-10, "oracle mismatch {rel}");
    }

    #[test]
    fn jump_kernel_is_the_continuous_subspace() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        // continuous vectors are jump-free, exactly
        let u = DVector::from_fn(ops.n_hat(), |_, _| rng.random_range(-1.0..1.0));
        assert_eq!((&ops.b * (&ops.r * &u)).amax(), 0.0);

        // decomposition w = B_D^T B w + R E w splits any w
        let w = DVector::from_fn(ops.w_dim(), |_, _| rng.random_range(-1.0..1.0));
        let jump_part = ops.b_d.transpose() * (&ops.b * &w);
        let averaged = &ops.r * (&ops.e * &w);
        let resid = (&jump_part + &averaged - &w).norm();
        assert!(resid <= 1e-13 * w.norm());
    }

    #[test]
    fn averaging_annihilates_the_jump_part() {
        let p = build_problem(&ProblemConfig::new(3, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let prod = &ops.e * ops.b_d.transpose() * &ops.b;
        assert!(max_abs(&prod) <= 1e-13);
    }

    #[test]
    fn natural_coarse_degenerates_when_everything_is_pinned() {
        let mut config = ProblemConfig::new(2, 2, 2);
        config.dirichlet = crate::model::DirichletEdges::all();
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        assert_eq!(ops.null_dim(), 0);
        assert_eq!(ops.g.ncols(), 0);
        assert_eq!(ops.c.ncols(), 0);
    }

    #[test]
    fn balancing_matrix_columns_are_weighted_traces() {
        let p = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let offsets = block_offsets(&p);
        let mut col = 0;
        for sub in &p.subs {
            for zc in 0..sub.z.ncols() {
                for (local, &g) in sub.iface_local_to_global.iter().enumerate() {
                    let expect = ops.d_p[offsets[sub.id] + local] * sub.z[(local, zc)];
                    assert!((ops.c[(g, col)] - expect).abs() <= 1e-15);
                }
                col += 1;
            }
        }
    }

    #[test]
    fn pinv_times_s_complements_the_nullspace_projector() {
        // S^+ S = I - Z Z^T on every substructure
        let mut config = ProblemConfig::new(2, 2, 2);
        config.coefficient = CoefficientField::Checkerboard(1.0, 30.0);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        for (blk, sub) in ops.blocks.iter().zip(p.subs.iter()) {
            let proj = blk.eig.pinv_dense() * &blk.s;
            let expect = DMatrix::identity(blk.dim, blk.dim) - &sub.z * sub.z.transpose();
            assert!(max_abs(&(&proj - &expect)) <= 1e-9, "substructure {}", sub.id);
        }
    }

    #[test]
    fn bar4_coarse_split_is_fully_coarse() {
        let p = Problem::bar4();
        let ops = bar4_ops();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        assert_eq!(split.n_coarse(), 1);
        assert_eq!(split.wr_dim(), 0);
        assert_eq!(split.s_cc_tilde, DMatrix::from_row_slice(1, 1, &[1.0]));
        assert_eq!(split.s_cc_star, DMatrix::from_row_slice(1, 1, &[1.0]));
    }

    #[test]
    fn floating_substructure_without_corner_is_rejected() {
        let mut p = Problem::bar4();
        p.interface.is_vertex[0] = false;
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let err = match build_coarse_split(&p, &ops.e) {
            Err(e) => e,
            Ok(_) => panic!("split of a floating substructure without corners must fail"),
        };
        assert!(err.to_string().contains("no corner"), "got: {err}");
    }

    #[test]
    fn coarse_split_blocks_reassemble_exactly() {
        let config = ProblemConfig::new(2, 2, 2);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();

        // corner census: the center crosspoint plus the three free boundary
        // substructure vertices (the fourth sits on the Dirichlet edge)
        assert_eq!(split.n_coarse(), 4);

        for (sub, sp) in p.subs.iter().zip(split.subs.iter()) {
            let dim = sub.iface_dim();
            let mut re = DMatrix::zeros(dim, dim);
            for (a, &la) in sp.c_local.iter().enumerate() {
                for (b, &lb) in sp.c_local.iter().enumerate() {
                    re[(la, lb)] = sp.s_cc[(a, b)];
                }
                for (b, &lb) in sp.r_local.iter().enumerate() {
                    re[(lb, la)] = sp.s_rc[(b, a)];
                    re[(la, lb)] = sp.s_rc[(b, a)];
                }
            }
            for (a, &la) in sp.r_local.iter().enumerate() {
                for (b, &lb) in sp.r_local.iter().enumerate() {
                    re[(la, lb)] = sp.s_rr[(a, b)];
                }
            }
            assert_eq!(re, sub.s, "substructure {} reassembly", sub.id);
        }

        for sp in &split.subs {
            if sp.r_local.is_empty() {
                continue;
            }
            let eig = sym_eig(&sp.s_rr).unwrap();
            let lam_max = eig.values[eig.values.len() - 1];
            assert!(eig.values[0] > 1e-10 * lam_max);
        }
    }

    #[test]
    fn e_split_reproduces_averaging_on_tilde_vectors() {
        let config = ProblemConfig::new(3, 2, 2);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let offsets = block_offsets(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        // random element of W_tilde: continuous coarse values, arbitrary r
        let u_c = DVector::from_fn(split.n_coarse(), |_, _| rng.random_range(-1.0..1.0));
        let u_r = DVector::from_fn(split.wr_dim(), |_, _| rng.random_range(-1.0..1.0));

        let mut w = DVector::zeros(ops.w_dim());
        for (sub, sp) in p.subs.iter().zip(split.subs.iter()) {
            for &local in &sp.c_local {
                let j = split.coarse_index[sub.iface_local_to_global[local]].unwrap();
                w[offsets[sub.id] + local] = u_c[j];
            }
            for (k, &local) in sp.r_local.iter().enumerate() {
                w[offsets[sub.id] + local] = u_r[sp.r_offset + k];
            }
        }

        let via_split = &split.e_c * &u_c + &split.e_r * &u_r;
        let via_e = &ops.e * &w;
        assert!((via_split - via_e).norm() <= 1e-13);
    }

    #[test]
    fn tilde_solve_inverts_tilde_apply() {
        let config = ProblemConfig::new(2, 2, 2);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x_c = DVector::from_fn(split.n_coarse(), |_, _| rng.random_range(-1.0..1.0));
        let x_r = DVector::from_fn(split.wr_dim(), |_, _| rng.random_range(-1.0..1.0));
        let (f_c, f_r) = split.apply_tilde(&x_c, &x_r);
        let (y_c, y_r) = split.solve_tilde(&f_c, &f_r);
        assert!((&y_c - &x_c).norm() <= 1e-10 * x_c.norm());
        assert!((&y_r - &x_r).norm() <= 1e-10 * x_r.norm().max(1.0));

        // against the dense assembly of S_tilde
        let dense = split.dense_tilde();
        let nc = split.n_coarse();
        let stacked =
            DVector::from_fn(nc + split.wr_dim(), |i, _| if i < nc { x_c[i] } else { x_r[i - nc] });
        let via_dense = &dense * &stacked;
        assert!((via_dense.rows(0, nc) - &f_c).norm() <= 1e-12);
        assert!((via_dense.rows(nc, split.wr_dim()) - &f_r).norm() <= 1e-12);

        let direct = spd_solve(&dense, &via_dense).unwrap();
        assert!((direct.rows(0, nc) - &x_c).norm() <= 1e-10);
    }
}
