//! The eigenvalue-level statement behind the preconditioner equalities:
//! after removing 1 from the primal spectrum and {0, 1} from the dual one,
//! the multisets agree pairwise, multiplicities included. Shown for
//! BDD vs FETI-1 (Dirichlet Q) and BDDC vs FETI-DP.
//!
//!     cargo run --release --example spectral_equality

use ddlab::model::{build_problem, ProblemConfig, RhsSeed};
use ddlab::operators::{build_coarse_split, CouplingOperators, Scaling};
use ddlab::preconditioners::{bdd_build, bddc_build, feti1_build, fetidp_build, QChoice};
use ddlab::spectral::{dual_spectrum, primal_spectrum, spectra_match, SpectrumReport};
use nalgebra::DVector;

fn show(report: &SpectrumReport) {
    println!(
        "  {:<8} {} eigenvalues, {} excluded near {{0,1}}, retained clusters:",
        report.method,
        report.eigenvalues.len(),
        report.excluded.len()
    );
    for (value, count) in &report.multiplicity_table {
        println!("    {value:.12}  x{count}");
    }
}

fn main() {
    let config = ProblemConfig::new(2, 2, 2);
    let problem = build_problem(&config).unwrap();
    let ops = CouplingOperators::build(&problem, Scaling::Multiplicity).unwrap();
    let split = build_coarse_split(&problem, &ops.e).unwrap();

    println!("BDD vs FETI-1 on 2x2 substructures (Q = dirichlet):");
    let bdd = bdd_build(&ops).unwrap();
    let primal = SpectrumReport::primal("bdd", primal_spectrum(&bdd.dense(), &ops.s_hat).unwrap());
    let f = DVector::zeros(ops.w_dim());
    let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
    let dual = SpectrumReport::dual(
        "feti1",
        dual_spectrum(&sys.dense_m(), &sys.dense_f_op(), Some(&sys.dense_p())).unwrap(),
    );
    show(&primal);
    show(&dual);
    let verdict = spectra_match(&primal, &dual, 1e-6);
    println!(
        "  match: {} (max pair diff {:.3e})\n",
        if verdict.pass { "pass" } else { "FAIL" },
        verdict.max_pair_diff
    );

    println!("BDDC vs FETI-DP on the same problem:");
    let bddc = bddc_build(&ops, &split).unwrap();
    let primal =
        SpectrumReport::primal("bddc", primal_spectrum(&bddc.dense(), &ops.s_hat).unwrap());
    let rhs = problem.interface_rhs(&RhsSeed::Ones);
    let dp = fetidp_build(&problem, &ops, &split, &rhs).unwrap();
    let dual =
        SpectrumReport::dual("fetidp", dual_spectrum(&dp.dense_m(), &dp.dense_f_op(), None).unwrap());
    show(&primal);
    show(&dual);
    let verdict = spectra_match(&primal, &dual, 1e-6);
    println!(
        "  match: {} (max pair diff {:.3e})",
        if verdict.pass { "pass" } else { "FAIL" },
        verdict.max_pair_diff
    );
}
