//! Spectra of the preconditioned operators and the machinery that certifies
//! the primal/dual eigenvalue relations.
//!
//! Every spectrum is computed through a symmetric similarity transform:
//! `M S_hat` via `L^T M L` with the Cholesky factor of `S_hat`, and dual
//! products `M A` via `A^(1/2) M A^(1/2)` with the PSD square root of the
//! (possibly projected) dual operator. Products of symmetric PSD factors
//! then come out with real spectra by construction.
//!
//! The headline comparison removes the eigenvalue 1 from the primal
//! multiset and {0, 1} from the dual multiset and demands the remainders
//! match pairwise, including cluster multiplicities.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{max_abs, sym_eig, SpdFactor};
use crate::operators::CouplingOperators;
use crate::preconditioners::{Feti1System, QChoice};
use crate::{Error, Result};

/// Absolute tolerance identifying eigenvalues with the excluded targets
/// (1 for primal operators, 0 and 1 for dual ones).
pub const EIG_ID_TOL: f64 = 1e-6;

/// Cluster gap for multiplicity tables.
pub const CLUSTER_GAP: f64 = 1e-6;

/// Residual bound for the operator-identity suite.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Eigenvalues of `M * S_hat` for a symmetric PSD preconditioner `M`:
/// factor `S_hat = L L^T` and decompose the similar symmetric matrix
/// `L^T M L`. Ascending.
pub fn primal_spectrum(m: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Result<Vec<f64>> {
    let factor = SpdFactor::new(s_hat, "S_hat in primal_spectrum")?;
    let l = factor.l();
    let sym = l.transpose() * m * &l;
    let sym = (&sym + sym.transpose()) * 0.5;
    Ok(sym_eig(&sym)?.values.iter().copied().collect())
}

/// Eigenvalues of `M * A` with `A = P^T F P` (or plain `F` without a
/// projection), via the PSD square root of `A`. The multiset includes the
/// zeros contributed by multiplier redundancy and by the projection.
pub fn dual_spectrum(
    m: &DMatrix<f64>,
    f: &DMatrix<f64>,
    projection: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let a = match projection {
        Some(p) => p.transpose() * f * p,
        None => f.clone(),
    };
    let a = (&a + a.transpose()) * 0.5;
    let eig = sym_eig(&a)?;
    let n = eig.values.len();
    let lam_max = eig.values.iter().fold(0.0_f64, |acc, &v| acc.max(v));
    if eig.values[0] < -1e-9 * lam_max.max(1e-300) {
        return Err(Error::Numerical(format!(
            "dual operator has negative eigenvalue {:.3e} (lambda_max {lam_max:.3e})",
            eig.values[0]
        )));
    }
    let mut half = eig.vectors.clone();
    for k in 0..n {
        half.column_mut(k).scale_mut(eig.values[k].max(0.0).sqrt());
    }
    let a_half = &half * eig.vectors.transpose();
    let sym = &a_half * m * a_half.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    Ok(sym_eig(&sym)?.values.iter().copied().collect())
}

/// Generalized condition number: largest over smallest eigenvalue,
/// ignoring the (near-)zero part of the multiset.
pub fn condition_number(eigs: &[f64]) -> f64 {
    let max = eigs.iter().fold(0.0_f64, |acc, &v| acc.max(v));
    if max <= 0.0 {
        return 1.0;
    }
    let min = eigs.iter().filter(|&&v| v > 1e-10 * max).fold(f64::INFINITY, |acc, &v| acc.min(v));
    max / min
}

/// One method's spectrum with the theorem-mandated exclusions applied.
pub struct SpectrumReport {
    pub method: String,
    /// Full multiset, ascending.
    pub eigenvalues: Vec<f64>,
    /// The values removed (within [`EIG_ID_TOL`] of an excluded target).
    pub excluded: Vec<f64>,
    /// What remains after exclusion, ascending.
    pub retained: Vec<f64>,
    pub tol_id: f64,
    /// Clusters of the retained multiset: (mean value, count).
    pub multiplicity_table: Vec<(f64, usize)>,
}

impl SpectrumReport {
    fn new(method: &str, mut eigenvalues: Vec<f64>, targets: &[f64]) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let mut excluded = Vec::new();
        let mut retained = Vec::new();
        for &v in &eigenvalues {
            if targets.iter().any(|t| (v - t).abs() <= EIG_ID_TOL) {
                excluded.push(v);
            } else {
                retained.push(v);
            }
        }
        let multiplicity_table = cluster(&retained, CLUSTER_GAP);
        SpectrumReport {
            method: method.to_string(),
            eigenvalues,
            excluded,
            retained,
            tol_id: EIG_ID_TOL,
            multiplicity_table,
        }
    }

    /// Primal preconditioned operator: exclude the eigenvalue 1.
    pub fn primal(method: &str, eigenvalues: Vec<f64>) -> Self {
        Self::new(method, eigenvalues, &[1.0])
    }

    /// Dual preconditioned operator: exclude 0 and 1.
    pub fn dual(method: &str, eigenvalues: Vec<f64>) -> Self {
        Self::new(method, eigenvalues, &[0.0, 1.0])
    }
}

fn cluster(sorted: &[f64], gap: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 0..sorted.len() {
        if i + 1 == sorted.len() || sorted[i + 1] - sorted[i] > gap {
            let members = &sorted[start..=i];
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            out.push((mean, members.len()));
            start = i + 1;
        }
    }
    out
}

/// Result of comparing a primal and a dual spectrum after exclusions.
pub struct SpectraMatch {
    pub pass: bool,
    /// Sorted value pairs `(primal, dual)`.
    pub matched_pairs: Vec<(f64, f64)>,
    pub max_pair_diff: f64,
    /// Values left over when the multiset sizes differ.
    pub orphan_primal: Vec<f64>,
    pub orphan_dual: Vec<f64>,
    /// Cluster counts agree between the two retained multisets.
    pub clusters_agree: bool,
}

/// Pair the retained multisets in sorted order; the verdict passes iff the
/// counts agree, every pair differs by at most `tol * max(1, |value|)`, and
/// the cluster multiplicities line up.
pub fn spectra_match(primal: &SpectrumReport, dual: &SpectrumReport, tol: f64) -> SpectraMatch {
    let np = primal.retained.len();
    let nd = dual.retained.len();
    let n = np.min(nd);
    let mut matched_pairs = Vec::with_capacity(n);
    let mut max_pair_diff = 0.0_f64;
    let mut pairs_ok = true;
    for i in 0..n {
        let (a, b) = (primal.retained[i], dual.retained[i]);
        let diff = (a - b).abs();
        max_pair_diff = max_pair_diff.max(diff);
        if diff > tol * a.abs().max(1.0) {
            pairs_ok = false;
        }
        matched_pairs.push((a, b));
    }
    let orphan_primal = primal.retained[n..].to_vec();
    let orphan_dual = dual.retained[n..].to_vec();

    let clusters_agree = primal.multiplicity_table.len() == dual.multiplicity_table.len()
        && primal
            .multiplicity_table
            .iter()
            .zip(dual.multiplicity_table.iter())
            .all(|(&(va, ca), &(vb, cb))| ca == cb && (va - vb).abs() <= tol * va.abs().max(1.0));

    SpectraMatch {
        pass: np == nd && pairs_ok && clusters_agree,
        matched_pairs,
        max_pair_diff,
        orphan_primal,
        orphan_dual,
        clusters_agree,
    }
}

/// Normalized residuals of the operator identities tying the dual and
/// primal preconditioned operators together.
pub struct IdentityReport {
    /// `(label, normalized max-norm residual)`.
    pub entries: Vec<(&'static str, f64)>,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, &(_, v)| acc.max(v))
    }

    pub fn pass(&self) -> bool {
        self.max() <= IDENTITY_TOL
    }
}

fn norm_of(mats: &[&DMatrix<f64>]) -> f64 {
    mats.iter().map(|m| max_abs(m).max(1e-300)).product()
}

/// Evaluate the identity suite on dense assemblies. Requires the Dirichlet
/// choice of `Q`; the primal/dual equivalences certified here do not hold
/// for other weightings.
pub fn identity_suite(ops: &CouplingOperators, sys: &Feti1System<'_>) -> Result<IdentityReport> {
    if sys.q_choice != QChoice::Dirichlet {
        return Err(Error::Config(
            "identity suite requires the FETI-1 system built with Q = dirichlet".into(),
        ));
    }
    let s = ops.dense_s();
    let s_pinv = ops.dense_s_pinv();
    let h = sys.dense_h();
    let st_plus = h.transpose() * &s_pinv * &h; // S_tilde^+ = H^T S^+ H
    let r = &ops.r;
    let b = &ops.b;
    let b_d = &ops.b_d;
    let e = &ops.e;

    let m_feti = b_d * &s * b_d.transpose();
    let f_proj = b * &st_plus * b.transpose(); // P^T F P = B S_tilde^+ B^T
    let mf = &m_feti * &f_proj;
    let e_st_et = e * &st_plus * e.transpose();
    let m_bdd_s = &e_st_et * &ops.s_hat;

    let mut entries = Vec::new();

    let lhs = &st_plus * &s * r;
    entries.push((
        "S~+ S R = R",
        max_abs(&(&lhs - r)) / norm_of(&[&st_plus, &s, r]),
    ));

    let lhs = &st_plus * &s * &st_plus;
    entries.push((
        "S~+ S S~+ = S~+",
        max_abs(&(&lhs - &st_plus)) / norm_of(&[&st_plus, &s, &st_plus]),
    ));

    let lhs = b * &st_plus * &s * r;
    entries.push(("B S~+ S R = 0", max_abs(&lhs) / norm_of(&[b, &st_plus, &s, r])));

    let lhs = &st_plus * b.transpose() * b_d * &s * &st_plus * e.transpose();
    entries.push((
        "S~+ B^T B_D S S~+ E^T = 0",
        max_abs(&lhs) / norm_of(&[&st_plus, b, b_d, &s, &st_plus, e]),
    ));

    let t_d = e * &st_plus * b.transpose();
    let lhs = &t_d * &mf;
    let rhs = &m_bdd_s * &t_d;
    entries.push((
        "T_D (M_FETI F) = (M_BDD S^) T_D",
        max_abs(&(&lhs - &rhs)) / (norm_of(&[&t_d]) * max_abs(&mf).max(max_abs(&m_bdd_s)).max(1e-300)),
    ));

    let t_p = &mf * b_d * &s * r;
    let lhs = &t_p * &m_bdd_s;
    let rhs = &mf * &t_p;
    entries.push((
        "T_P (M_BDD S^) = (M_FETI F) T_P",
        max_abs(&(&lhs - &rhs)) / (norm_of(&[&t_p]) * max_abs(&mf).max(max_abs(&m_bdd_s)).max(1e-300)),
    ));

    let x = b_d * &s * &st_plus * b.transpose();
    let lhs = &x * &x;
    entries.push((
        "B_D S S~+ B^T idempotent",
        max_abs(&(&lhs - &x)) / max_abs(&x).max(1e-300),
    ));

    Ok(IdentityReport { entries })
}

/// Seeded random interface residual for spectrum and solver diagnostics.
pub fn random_interface_residual(n: usize, seed: u64) -> DVector<f64> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
