//! The 1D desk example worked end to end: every operator is a scalar or a
//! 2-vector, so the printed values can be checked by hand.
//!
//!     cargo run --example bar4_walkthrough

use ddlab::krylov::{pcg, projected_pcg};
use ddlab::model::Problem;
use ddlab::operators::{build_coarse_split, CouplingOperators, Scaling};
use ddlab::preconditioners::{bdd_build, bddc_build, feti1_build, fetidp_build, QChoice};
use nalgebra::DVector;

fn main() {
    let problem = Problem::bar4();
    println!("bar4: the unit-load bar (0,2), four elements, two substructures");
    println!("  S_1 = {:?} (pinned side)", problem.subs[0].s.as_slice());
    println!("  S_2 = {:?} (floating side)", problem.subs[1].s.as_slice());
    println!("  condensed loads f = ({}, {})", problem.subs[0].f[0], problem.subs[1].f[0]);

    let ops = CouplingOperators::build(&problem, Scaling::Multiplicity).unwrap();
    println!("\ncoupling operators:");
    println!("  R   = {:?}^T", ops.r.as_slice());
    println!("  B   = {:?}", ops.b.as_slice());
    println!("  E   = {:?}", ops.e.as_slice());
    println!("  B_D = {:?}", ops.b_d.as_slice());
    println!("  Z   = {:?}^T, G = {:?}, C = {:?}", ops.z.as_slice(), ops.g.as_slice(), ops.c.as_slice());
    println!("  S_hat = {:?}", ops.s_hat.as_slice());
    let rep = ops.verify_algebra();
    println!("  identity residuals: BR={} ER-I={} jump={} BtBdEt={}",
        rep.br, rep.er_minus_identity, rep.jump_plus_average, rep.b_bd_et);

    // interface residual r = 1, so u = S_hat^-1 r = 1 for every method
    let r = DVector::from_vec(vec![1.0]);
    let f = ops.e.transpose() * &r;

    let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
    println!("\nFETI-1 with the Dirichlet Q:");
    println!("  projected rhs = {:?}, lambda0 = {}, P = 0 so the solve stops immediately",
        sys.rhs.as_slice(), sys.lambda0[0]);
    let solve = projected_pcg(&sys, 1e-8, 10).unwrap();
    let (w, u) = sys.recover_primal(&solve.solution).unwrap();
    println!("  {} iterations, w = ({}, {}), u = {}", solve.iterations, w[0], w[1], u[0]);

    println!("\nP-FETI-1: u = {}", sys.pfeti1_apply(&r)[0]);

    let bdd = bdd_build(&ops).unwrap();
    println!("BDD:      u = {} (S_C = 1, P_C = 0)", bdd.apply(&r)[0]);

    let split = build_coarse_split(&problem, &ops.e).unwrap();
    let dp = fetidp_build(&problem, &ops, &split, &r).unwrap();
    println!("FETI-DP:  the single interface dof is a corner, {} multipliers left", dp.n_lambda());
    println!("          u = {} from the coarse solve alone", dp.recover(&DVector::zeros(0))[0]);

    println!("P-FETI-DP: u = {}", ddlab::preconditioners::pfetidp_apply(&split, &r)[0]);

    let bddc = bddc_build(&ops, &split).unwrap();
    println!("BDDC:     u = {} (Psi = constant trace, gram = S_hat)", bddc.apply(&r)[0]);

    let solve = pcg(|v| &ops.s_hat * v, |v| bddc.apply(v), &r, 1e-8, 10).unwrap();
    println!("\nBDDC-preconditioned CG finishes in {} iteration(s)", solve.iterations);
}
