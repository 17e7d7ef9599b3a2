//! Preconditioned conjugate gradients for the primal methods and the
//! FETI-DP dual system, and projected PCG for FETI-1 (directions and
//! preconditioned residuals are re-projected every iteration so the coarse
//! constraint `G^T lambda = Z^T f` cannot drift).
//!
//! Both drivers accumulate the CG coefficients into the Lanczos tridiagonal
//! and report its extreme-eigenvalue ratio as a condition number estimate.

use nalgebra::{DMatrix, DVector};

use crate::linalg::sym_eig;
use crate::preconditioners::Feti1System;
use crate::{Error, Result};

/// Default relative tolerance on the preconditioned residual norm.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const DEFAULT_MAXIT: usize = 500;

/// Outcome of one Krylov solve.
pub struct SolveReport {
    pub iterations: usize,
    /// Preconditioned residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// `lambda_max / lambda_min` of the Lanczos tridiagonal built from the
    /// CG coefficients; 1 when the solve ends within one iteration.
    pub kappa_estimate: f64,
    pub converged: bool,
    pub solution: DVector<f64>,
    /// Largest `|G^T lambda_k - Z^T f|` seen over all iterates; `None` for
    /// unprojected solves.
    pub constraint_drift: Option<f64>,
}

/// Condition estimate from the PCG coefficients: the alphas and betas fill
/// the Lanczos tridiagonal whose extreme eigenvalues approximate those of
/// the preconditioned operator.
fn lanczos_kappa(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return 1.0;
    }
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = 1.0 / alphas[i];
        if i > 0 {
            t[(i, i)] += betas[i - 1] / alphas[i - 1];
            let off = betas[i - 1].sqrt() / alphas[i - 1];
            t[(i, i - 1)] = off;
            t[(i - 1, i)] = off;
        }
    }
    match sym_eig(&t) {
        Ok(eig) => {
            let min = eig.values[0];
            let max = eig.values[k - 1];
            if min > 0.0 { max / min } else { f64::INFINITY }
        }
        Err(_) => f64::NAN,
    }
}

/// Plain preconditioned conjugate gradients for `A x = b`, `x_0 = 0`.
/// `converged` means the preconditioned residual norm fell below
/// `tol * initial`; the current iterate is returned either way.
pub fn pcg<A, M>(
    op: A,
    precond: M,
    rhs: &DVector<f64>,
    tol: f64,
    maxit: usize,
) -> Result<SolveReport>
where
    A: Fn(&DVector<f64>) -> DVector<f64>,
    M: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = rhs.len();
    let mut x = DVector::zeros(n);
    let mut r = rhs.clone();
    let mut z = precond(&r);
    let mut rho = r.dot(&z);
    if rho < 0.0 {
        return Err(Error::Numerical(format!(
            "preconditioner is indefinite: r^T M r = {rho:.3e}"
        )));
    }
    let norm0 = rho.sqrt();
    let mut history = vec![norm0];
    if norm0 == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: history,
            kappa_estimate: 1.0,
            converged: true,
            solution: x,
            constraint_drift: None,
        });
    }

    let mut p = z.clone();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..maxit {
        let q = op(&p);
        let p_ap = p.dot(&q);
        if p_ap <= 0.0 {
            return Err(Error::Numerical(format!(
                "operator is not positive definite on the Krylov space: p^T A p = {p_ap:.3e}"
            )));
        }
        let alpha = rho / p_ap;
        alphas.push(alpha);
        x += alpha * &p;
        r -= alpha * q;
        z = precond(&r);
        let rho_new = r.dot(&z).max(0.0);
        let res = rho_new.sqrt();
        history.push(res);
        iterations += 1;
        if res <= tol * norm0 {
            converged = true;
            break;
        }
        let beta = rho_new / rho;
        betas.push(beta);
        p = z + beta * p;
        rho = rho_new;
    }

    Ok(SolveReport {
        iterations,
        residual_history: history,
        kappa_estimate: lanczos_kappa(&alphas, &betas),
        converged,
        solution: x,
        constraint_drift: None,
    })
}

/// Projected PCG on the FETI-1 system `P^T F P lambda = P^T B S^+ f`,
/// starting from the coarse-compatible `lambda0`. Every direction and
/// preconditioned residual passes through the projection, keeping
/// `G^T lambda_k = Z^T f` for all iterates; drift beyond `1e-6` aborts.
pub fn projected_pcg(sys: &Feti1System<'_>, tol: f64, maxit: usize) -> Result<SolveReport> {
    let constraint_scale = 1.0 + sys.ztf.norm();
    let mut max_drift = 0.0_f64;
    let check_drift = |lambda: &DVector<f64>, max_drift: &mut f64| -> Result<()> {
        let drift = (sys.ops.g.transpose() * lambda - &sys.ztf).norm();
        *max_drift = max_drift.max(drift);
        if drift > 1e-6 * constraint_scale {
            return Err(Error::Numerical(format!(
                "coarse constraint drift {drift:.3e} exceeds 1e-6; projection lost"
            )));
        }
        Ok(())
    };

    let mut lambda = sys.lambda0.clone();
    check_drift(&lambda, &mut max_drift)?;

    let bsf = &sys.ops.b * sys.ops.apply_s_pinv(&sys.f);
    let mut r = &bsf - sys.apply_f(&lambda);

    let mut w = sys.apply_pt(&r);
    let mut z = sys.apply_m(&w);
    let mut y = sys.apply_p(&z);
    let mut rho = w.dot(&z);
    if rho < 0.0 {
        return Err(Error::Numerical(format!(
            "projected preconditioner is indefinite: w^T M w = {rho:.3e}"
        )));
    }
    let norm0 = rho.sqrt();
    let mut history = vec![norm0];
    if norm0 == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: history,
            kappa_estimate: 1.0,
            converged: true,
            solution: lambda,
            constraint_drift: Some(max_drift),
        });
    }

    let mut p = y.clone();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..maxit {
        let q = sys.apply_f(&p);
        let p_ap = p.dot(&q);
        if p_ap <= 0.0 {
            return Err(Error::Numerical(format!(
                "dual operator is not positive definite on range(P): p^T F p = {p_ap:.3e}"
            )));
        }
        let alpha = rho / p_ap;
        alphas.push(alpha);
        lambda += alpha * &p;
        r -= alpha * q;
        check_drift(&lambda, &mut max_drift)?;

        w = sys.apply_pt(&r);
        z = sys.apply_m(&w);
        y = sys.apply_p(&z);
        let rho_new = w.dot(&z).max(0.0);
        let res = rho_new.sqrt();
        history.push(res);
        iterations += 1;
        if res <= tol * norm0 {
            converged = true;
            break;
        }
        let beta = rho_new / rho;
        betas.push(beta);
        p = y + beta * p;
        rho = rho_new;
    }

    Ok(SolveReport {
        iterations,
        residual_history: history,
        kappa_estimate: lanczos_kappa(&alphas, &betas),
        converged,
        solution: lambda,
        constraint_drift: Some(max_drift),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_solve;
    use crate::model::{build_problem, DirichletEdges, Problem, ProblemConfig, RhsSeed};
    use crate::operators::{build_coarse_split, CouplingOperators, Scaling};
    use crate::preconditioners::{bddc_build, feti1_build, QChoice};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_preconditioner_converges_in_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(20, 20);
        let a_inv = a.clone().try_inverse().unwrap();
        let rhs = DVector::from_fn(20, |i, _| (i as f64).cos());
        let rep = pcg(|v| &a * v, |v| &a_inv * v, &rhs, 1e-8, 50).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((rep.kappa_estimate - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_preconditioner_on_diagonal_terminates_in_two() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let rep = pcg(|v| &a * v, |v| v.clone(), &rhs, 1e-12, 10).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 2);
        let expect = DVector::from_vec(vec![1.0, 0.5]);
        assert!((rep.solution - expect).norm() < 1e-12);
    }

    #[test]
    fn zero_rhs_converges_immediately() {
        let a = DMatrix::identity(4, 4);
        let rep = pcg(|v| &a * v, |v| v.clone(), &DVector::zeros(4), 1e-8, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.kappa_estimate, 1.0);
    }

    #[test]
    fn indefinite_operator_is_reported() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let rhs = DVector::from_vec(vec![0.0, 1.0]);
        assert!(pcg(|v| &a * v, |v| v.clone(), &rhs, 1e-8, 10).is_err());
    }

    #[test]
    fn kappa_estimate_matches_dense_spectrum_after_full_termination() {
        // diagonal spectrum, plain CG run to finite termination: the Lanczos
        // tridiagonal then carries the extreme eigenvalues almost exactly
        let values: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let a = DMatrix::from_diagonal(&DVector::from_vec(values));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rhs = DVector::from_fn(30, |_, _| rng.random_range(0.5..1.0));
        let rep = pcg(|v| &a * v, |v| v.clone(), &rhs, 1e-14, 60).unwrap();
        assert!(rep.converged);
        let true_kappa = 30.0;
        assert!(
            (rep.kappa_estimate - true_kappa).abs() <= 0.1 * true_kappa,
            "kappa estimate {} vs {}",
            rep.kappa_estimate,
            true_kappa
        );
    }

    #[test]
    fn bddc_bar4_converges_in_one_iteration() {
        let p = Problem::bar4();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let rhs = DVector::from_vec(vec![1.0]);
        let rep = pcg(|v| &ops.s_hat * v, |v| bddc.apply(v), &rhs, 1e-8, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((rep.solution[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bddc_four_by_four_converges_against_direct_solve() {
        let config = ProblemConfig::new(4, 4, 4);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let split = build_coarse_split(&p, &ops.e).unwrap();
        let bddc = bddc_build(&ops, &split).unwrap();
        let rhs = p.interface_rhs(&RhsSeed::Random(7));
        let rep = pcg(|v| &ops.s_hat * v, |v| bddc.apply(v), &rhs, 1e-8, 100).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 25, "took {} iterations", rep.iterations);
        let direct = spd_solve(&ops.s_hat, &rhs).unwrap();
        let err = (&rep.solution - &direct).norm() / direct.norm();
        assert!(err <= 1e-6, "solution error {err:.3e}");
    }

    #[test]
    fn projected_pcg_bar4_stops_at_lambda0() {
        let p = Problem::bar4();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let f = ops.e.transpose() * DVector::from_vec(vec![1.0]);
        let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
        let rep = projected_pcg(&sys, 1e-8, 50).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        let (_, u) = sys.recover_primal(&rep.solution).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projected_pcg_keeps_the_coarse_constraint() {
        let config = ProblemConfig::new(2, 2, 2);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let rhs = p.interface_rhs(&RhsSeed::Random(3));
        let f = ops.e.transpose() * &rhs;
        let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
        let rep = projected_pcg(&sys, 1e-10, 200).unwrap();
        assert!(rep.converged);
        // every iterate, not just the last one, stayed on the constraint
        let drift = rep.constraint_drift.expect("projected solve records drift");
        assert!(drift <= 1e-8 * (1.0 + sys.ztf.norm()), "max drift {drift:.3e}");
        let final_drift = (ops.g.transpose() * &rep.solution - &sys.ztf).norm();
        assert!(final_drift <= 1e-8 * (1.0 + sys.ztf.norm()));
        let (_, u) = sys.recover_primal(&rep.solution).unwrap();
        let direct = spd_solve(&ops.s_hat, &rhs).unwrap();
        let err = (&u - &direct).norm() / direct.norm();
        assert!(err <= 1e-7, "solution error {err:.3e}");
    }

    #[test]
    fn pinned_problem_runs_plain_pcg_through_the_projection() {
        let mut config = ProblemConfig::new(2, 2, 2);
        config.dirichlet = DirichletEdges::all();
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let rhs = p.interface_rhs(&RhsSeed::Random(5));
        let f = ops.e.transpose() * &rhs;
        let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
        let rep = projected_pcg(&sys, 1e-10, 200).unwrap();
        assert!(rep.converged);
        let (_, u) = sys.recover_primal(&rep.solution).unwrap();
        let direct = spd_solve(&ops.s_hat, &rhs).unwrap();
        assert!((&u - &direct).norm() / direct.norm() <= 1e-7);
    }

    #[test]
    fn kappa_estimate_is_at_least_one() {
        let config = ProblemConfig::new(2, 2, 4);
        let p = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&p, Scaling::Multiplicity).unwrap();
        let rhs = p.interface_rhs(&RhsSeed::Random(11));
        let rep = pcg(|v| &ops.s_hat * v, |v| v.clone(), &rhs, 1e-10, 400).unwrap();
        assert!(rep.converged);
        assert!(rep.kappa_estimate >= 1.0 - 1e-8);
        // strictly recorded history: one entry per iteration plus the start
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
    }
}
