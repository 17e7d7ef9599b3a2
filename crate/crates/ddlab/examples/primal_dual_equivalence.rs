//! Certify the two preconditioner-equality theorems by dense assembly:
//! P-FETI-1 with the Dirichlet Q equals BDD, and P-FETI-DP equals BDDC
//! (with the coarse Gram matrix equal to the coarse Schur complement).
//!
//!     cargo run --release --example primal_dual_equivalence

use ddlab::linalg::rel_frobenius_diff;
use ddlab::model::{build_problem, CoefficientField, ProblemConfig};
use ddlab::operators::{build_coarse_split, CouplingOperators, Scaling};
use ddlab::preconditioners::fetidp::dense_pfetidp;
use ddlab::preconditioners::{bdd_build, bddc_build, feti1_build, QChoice};
use nalgebra::DVector;

fn main() {
    println!("theorem checks (relative Frobenius differences, tolerance 1e-10)\n");
    for grid in [(2usize, 2usize), (4, 4)] {
        for scaling in [Scaling::Multiplicity, Scaling::Stiffness] {
            for (coeff_label, coeff) in [
                ("uniform", CoefficientField::Uniform(1.0)),
                ("rho jump 1e6", CoefficientField::Checkerboard(1.0, 1e6)),
            ] {
                let mut config = ProblemConfig::new(grid.0, grid.1, 2);
                config.coefficient = coeff;
                let problem = build_problem(&config).unwrap();
                let ops = CouplingOperators::build(&problem, scaling).unwrap();
                let split = build_coarse_split(&problem, &ops.e).unwrap();

                let f = DVector::zeros(ops.w_dim());
                let sys = feti1_build(&ops, QChoice::Dirichlet, &f).unwrap();
                let bdd = bdd_build(&ops).unwrap();
                let d1 = rel_frobenius_diff(&sys.dense_pfeti1(), &bdd.dense());

                let bddc = bddc_build(&ops, &split).unwrap();
                let d2 = rel_frobenius_diff(&dense_pfetidp(&split), &bddc.dense());
                let d3 = rel_frobenius_diff(&bddc.basis.coarse_gram, &split.s_cc_star);

                println!(
                    "{}x{} {:<13} {:<13}  pfeti1-bdd {:.2e}  pfetidp-bddc {:.2e}  gram {:.2e}",
                    grid.0, grid.1, scaling.to_string(), coeff_label, d1, d2, d3
                );
            }
        }
    }
    println!("\nand the deliberate mismatch: P-FETI-1 with Q = identity differs from BDD");
    let problem = build_problem(&ProblemConfig::new(2, 2, 2)).unwrap();
    let ops = CouplingOperators::build(&problem, Scaling::Multiplicity).unwrap();
    let f = DVector::zeros(ops.w_dim());
    let sys = feti1_build(&ops, QChoice::Identity, &f).unwrap();
    let bdd = bdd_build(&ops).unwrap();
    println!(
        "2x2 multiplicity identity-Q   pfeti1-bdd {:.2e}",
        rel_frobenius_diff(&sys.dense_pfeti1(), &bdd.dense())
    );
}
