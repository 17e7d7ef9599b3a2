//! Condition-number study of BDDC: growth in the substructure size follows
//! the (1 + log(1+n))^2 shape, the substructure count barely matters, and
//! stiffness scaling keeps large coefficient jumps harmless.
//!
//!     cargo run --release --example scaling_study

use ddlab::model::{build_problem, CoefficientField, ProblemConfig};
use ddlab::operators::{build_coarse_split, CouplingOperators, Scaling};
use ddlab::preconditioners::bddc_build;
use ddlab::spectral::{condition_number, primal_spectrum};

fn kappa(grid: (usize, usize), n: usize, scaling: Scaling, coeff: CoefficientField) -> f64 {
    let mut config = ProblemConfig::new(grid.0, grid.1, n);
    config.coefficient = coeff;
    let problem = build_problem(&config).unwrap();
    let ops = CouplingOperators::build(&problem, scaling).unwrap();
    let split = build_coarse_split(&problem, &ops.e).unwrap();
    let bddc = bddc_build(&ops, &split).unwrap();
    condition_number(&primal_spectrum(&bddc.dense(), &ops.s_hat).unwrap())
}

fn main() {
    println!("kappa(BDDC) vs substructure size at 4x4 substructures:");
    println!("{:>5} {:>10} {:>12} {:>12}", "n", "kappa", "(1+ln(1+n))^2", "ratio");
    for n in [2usize, 4, 8, 16] {
        let k = kappa((4, 4), n, Scaling::Multiplicity, CoefficientField::Uniform(1.0));
        let shape = {
            let l = 1.0 + (1.0 + n as f64).ln();
            l * l
        };
        println!("{n:>5} {k:>10.4} {shape:>12.4} {:>12.4}", k / shape);
    }

    println!("\nkappa(BDDC) vs substructure count at n = 4:");
    for m in [2usize, 4, 8] {
        let k = kappa((m, m), 4, Scaling::Multiplicity, CoefficientField::Uniform(1.0));
        println!("  {m}x{m}: {k:.4}");
    }

    println!("\ncoefficient jumps (checkerboard rho = 1 vs 1e6) at 4x4, n = 4:");
    for (scaling, label) in [(Scaling::Stiffness, "stiffness"), (Scaling::Multiplicity, "multiplicity")] {
        let uniform = kappa((4, 4), 4, scaling, CoefficientField::Uniform(1.0));
        let jump = kappa((4, 4), 4, scaling, CoefficientField::Checkerboard(1.0, 1e6));
        println!("  {label:<13} uniform {uniform:>10.4}   jumped {jump:>12.4}");
    }
}
