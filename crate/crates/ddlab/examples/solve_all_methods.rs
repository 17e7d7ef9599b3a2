//! Run all six methods on the same 4x4 problem and compare each converged
//! solution against the dense direct solve.
//!
//!     cargo run --release --example solve_all_methods

use ddlab::krylov::{pcg, projected_pcg};
use ddlab::model::{build_problem, ProblemConfig, RhsSeed};
use ddlab::operators::{build_coarse_split, CouplingOperators, Scaling};
use ddlab::preconditioners::{
    bdd_build, bddc_build, feti1_build, fetidp_build, pfetidp_apply, QChoice,
};
use nalgebra::DVector;

fn main() {
    let config = ProblemConfig::new(4, 4, 4);
    let problem = build_problem(&config).unwrap();
    let ops = CouplingOperators::build(&problem, Scaling::Multiplicity).unwrap();
    let split = build_coarse_split(&problem, &ops.e).unwrap();
    let rhs = problem.interface_rhs(&RhsSeed::Random(0));
    let direct = ops.solve_s_hat(&rhs);
    let err = |u: &DVector<f64>| (u - &direct).norm() / direct.norm();

    println!(
        "4x4 substructures, 4x4 elements each: {} interface dofs, {} multipliers, {} corners",
        ops.n_hat(),
        ops.n_lambda(),
        split.n_coarse()
    );
    println!("{:<10} {:>5} {:>12} {:>12}", "method", "iters", "kappa(CG)", "error");

    let tol = 1e-8;
    let maxit = 500;

    let f = ops.e.transpose() * &rhs;
    let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
    let rep = projected_pcg(&sys, tol, maxit).unwrap();
    let (_, u) = sys.recover_primal(&rep.solution).unwrap();
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "feti1", rep.iterations, rep.kappa_estimate, err(&u));

    let rep = pcg(|v| &ops.s_hat * v, |v| sys.pfeti1_apply(v), &rhs, tol, maxit).unwrap();
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "pfeti1", rep.iterations, rep.kappa_estimate, err(&rep.solution));

    let bdd = bdd_build(&ops).unwrap();
    let rep = pcg(|v| &ops.s_hat * v, |v| bdd.apply(v), &rhs, tol, maxit).unwrap();
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "bdd", rep.iterations, rep.kappa_estimate, err(&rep.solution));

    let dp = fetidp_build(&problem, &ops, &split, &rhs).unwrap();
    let rep = pcg(|v| dp.apply_f(v), |v| dp.apply_m(v), &dp.rhs, tol, maxit).unwrap();
    let u = dp.recover(&rep.solution);
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "fetidp", rep.iterations, rep.kappa_estimate, err(&u));

    let rep = pcg(|v| &ops.s_hat * v, |v| pfetidp_apply(&split, v), &rhs, tol, maxit).unwrap();
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "pfetidp", rep.iterations, rep.kappa_estimate, err(&rep.solution));

    let bddc = bddc_build(&ops, &split).unwrap();
    let rep = pcg(|v| &ops.s_hat * v, |v| bddc.apply(v), &rhs, tol, maxit).unwrap();
    println!("{:<10} {:>5} {:>12.4} {:>12.3e}", "bddc", rep.iterations, rep.kappa_estimate, err(&rep.solution));
}
