//! Check the defining identities of the coupling algebra on a range of
//! configurations: `BR = 0`, `ER = I`, `B_D^T B + RE = I`, `B^T B_D E^T = 0`.
//!
//!     cargo run --example verify_algebra

use ddlab::model::{build_problem, CoefficientField, ProblemConfig};
use ddlab::operators::{CouplingOperators, Scaling};

fn main() {
    println!(
        "{:<26} {:>9} {:>9} {:>9} {:>9}  verdict",
        "config", "BR", "ER-I", "jump", "BtBdEt"
    );
    let cases: Vec<(&str, ProblemConfig, Scaling)> = vec![
        ("2x2 n=2 multiplicity", ProblemConfig::new(2, 2, 2), Scaling::Multiplicity),
        ("4x4 n=4 multiplicity", ProblemConfig::new(4, 4, 4), Scaling::Multiplicity),
        ("4x4 n=4 stiffness", ProblemConfig::new(4, 4, 4), Scaling::Stiffness),
        (
            "4x4 n=2 stiff, rho 1e6",
            {
                let mut c = ProblemConfig::new(4, 4, 2);
                c.coefficient = CoefficientField::Checkerboard(1.0, 1e6);
                c
            },
            Scaling::Stiffness,
        ),
        ("3x2 n=3 multiplicity", ProblemConfig::new(3, 2, 3), Scaling::Multiplicity),
    ];

    for (label, config, scaling) in cases {
        let problem = build_problem(&config).unwrap();
        let ops = CouplingOperators::build(&problem, scaling).unwrap();
        let rep = ops.verify_algebra();
        println!(
            "{:<26} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e}  {}",
            label,
            rep.br,
            rep.er_minus_identity,
            rep.jump_plus_average,
            rep.b_bd_et,
            if rep.pass() { "pass" } else { "FAIL" }
        );
    }
}
