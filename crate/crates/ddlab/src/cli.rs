//! The flag-driven experiment runner behind the `ddlab` binary: build a
//! configured problem, run the requested methods, optionally run the full
//! certification suite, and emit machine-readable reports.
//!
//! Two output artifacts exist: a structured key/value report (`--out`, or
//! stdout) and a comma-separated sweep table (`--table`) with one row per
//! `(grid, n, method)` and a trailing fit row per group. Reports are
//! byte-stable for fixed flags and seed, except for the lines under the
//! `timestamp:` block.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when a numerical check
//! fails.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use nalgebra::DVector;

use crate::krylov::{pcg, projected_pcg, SolveReport};
use crate::linalg::rel_frobenius_diff;
use crate::model::{
    build_problem, CoefficientField, DirichletEdges, Problem, ProblemConfig, RhsSeed,
};
use crate::operators::{build_coarse_split, CoarseSplit, CouplingOperators, Scaling};
use crate::preconditioners::fetidp::dense_pfetidp;
use crate::preconditioners::{
    bdd_build, bddc_build, feti1_build, fetidp_build, pfetidp_apply, QChoice,
};
use crate::spectral::{
    condition_number, dual_spectrum, identity_suite, primal_spectrum, spectra_match,
    SpectrumReport, EIG_ID_TOL, IDENTITY_TOL,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Relative Frobenius tolerance for the two preconditioner-equality
/// theorems.
pub const THEOREM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DirichletArg {
    Left,
    All,
    LeftBottom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Multiplicity,
    Stiffness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QArg {
    Identity,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Feti1,
    Pfeti1,
    Bdd,
    Fetidp,
    Pfetidp,
    Bddc,
}

impl MethodArg {
    pub fn name(&self) -> &'static str {
        match self {
            MethodArg::Feti1 => "feti1",
            MethodArg::Pfeti1 => "pfeti1",
            MethodArg::Bdd => "bdd",
            MethodArg::Fetidp => "fetidp",
            MethodArg::Pfetidp => "pfetidp",
            MethodArg::Bddc => "bddc",
        }
    }
}

/// Command-line flags of the experiment runner.
#[derive(Parser, Debug, Clone)]
#[command(
    name = "ddlab",
    version,
    about = "Iterative substructuring experiments: FETI-1, P-FETI-1, BDD, FETI-DP, P-FETI-DP, BDDC"
)]
pub struct Args {
    /// Substructure grid "MxN"; a comma-separated list sweeps (needs --table).
    #[arg(long, default_value = "4x4")]
    pub sub_grid: String,

    /// Elements per substructure per direction; comma list sweeps (needs --table).
    #[arg(long, default_value = "4")]
    pub elems_per_sub: String,

    /// Dirichlet edges of the unit square.
    #[arg(long, value_enum, default_value_t = DirichletArg::Left)]
    pub dirichlet: DirichletArg,

    /// Coefficient field: "uniform:RHO" or "checkerboard:RHO1,RHO2".
    #[arg(long, default_value = "uniform:1")]
    pub coeff: String,

    /// Interface weight construction.
    #[arg(long, value_enum, default_value_t = ScalingArg::Multiplicity)]
    pub scaling: ScalingArg,

    /// FETI-1 coarse weighting Q (the equality theorems need "dirichlet").
    #[arg(long, value_enum, default_value_t = QArg::Dirichlet)]
    pub q: QArg,

    /// Method to run; repeatable or comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<MethodArg>,

    /// Run the certification suite: algebra identities, the two
    /// preconditioner-equality theorems, both spectral matches, and the
    /// operator-identity table. The theorem checks always use Q=dirichlet.
    #[arg(long)]
    pub certify_all: bool,

    /// Relative tolerance on the preconditioned residual norm.
    #[arg(long, default_value_t = crate::krylov::DEFAULT_TOL)]
    pub tol: f64,

    /// Iteration cap.
    #[arg(long, default_value_t = crate::krylov::DEFAULT_MAXIT)]
    pub maxit: usize,

    /// Seed of the random interface residual.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write the structured report to this path instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Sweep mode: write comma-separated rows (m,n,scaling,method,
    /// iterations,kappa) plus one fit row per (grid, method) group.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("bad sub-grid '{s}', expected MxN")))?;
    let m_x = a.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad grid '{s}'")))?;
    let m_y = b.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad grid '{s}'")))?;
    Ok((m_x, m_y))
}

fn parse_coeff(s: &str) -> Result<CoefficientField> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| {
        Error::Config(format!("bad coeff '{s}', expected uniform:R or checkerboard:R1,R2"))
    })?;
    let parse = |v: &str| -> Result<f64> {
        v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad coefficient value '{v}'")))
    };
    match kind {
        "uniform" => Ok(CoefficientField::Uniform(parse(rest)?)),
        "checkerboard" => {
            let (a, b) = rest.split_once(',').ok_or_else(|| {
                Error::Config(format!("checkerboard needs two values, got '{rest}'"))
            })?;
            Ok(CoefficientField::Checkerboard(parse(a)?, parse(b)?))
        }
        other => Err(Error::Config(format!("unknown coefficient field '{other}'"))),
    }
}

impl Args {
    fn grids(&self) -> Result<Vec<(usize, usize)>> {
        self.sub_grid.split(',').map(parse_grid).collect()
    }

    fn elem_counts(&self) -> Result<Vec<usize>> {
        self.elems_per_sub
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad elems-per-sub '{s}'")))
            })
            .collect()
    }

    fn problem_config(&self, grid: (usize, usize), n: usize) -> Result<ProblemConfig> {
        Ok(ProblemConfig {
            sub_grid: grid,
            elems_per_sub: n,
            coefficient: parse_coeff(&self.coeff)?,
            dirichlet: match self.dirichlet {
                DirichletArg::Left => DirichletEdges::left(),
                DirichletArg::All => DirichletEdges::all(),
                DirichletArg::LeftBottom => DirichletEdges::left_bottom(),
            },
            seed_rhs: RhsSeed::Random(self.seed),
        })
    }

    fn scaling(&self) -> Scaling {
        match self.scaling {
            ScalingArg::Multiplicity => Scaling::Multiplicity,
            ScalingArg::Stiffness => Scaling::Stiffness,
        }
    }

    fn q_choice(&self) -> QChoice {
        match self.q {
            QArg::Identity => QChoice::Identity,
            QArg::Dirichlet => QChoice::Dirichlet,
        }
    }
}

/// One method's solve outcome plus its dense spectrum summary.
struct MethodOutcome {
    name: &'static str,
    solve: SolveReport,
    solution_error: f64,
    kappa_dense: f64,
    spectrum: SpectrumReport,
    ms: u128,
}

/// A named numerical check with its measured value and threshold.
struct Check {
    name: String,
    measured: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    fn bounded(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, threshold, pass: measured <= threshold }
    }

    fn verdict(name: impl Into<String>, pass: bool, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, threshold, pass }
    }
}

struct Workspace {
    problem: Problem,
    ops: CouplingOperators,
    split: CoarseSplit,
    rhs: DVector<f64>,
    direct: DVector<f64>,
}

fn build_workspace(args: &Args, grid: (usize, usize), n: usize) -> Result<Workspace> {
    let config = args.problem_config(grid, n)?;
    let problem = build_problem(&config)?;
    let ops = CouplingOperators::build(&problem, args.scaling())?;
    let split = build_coarse_split(&problem, &ops.e)?;
    let rhs = problem.interface_rhs(&config.seed_rhs);
    let direct = ops.solve_s_hat(&rhs);
    Ok(Workspace { problem, ops, split, rhs, direct })
}

fn solution_error(u: &DVector<f64>, direct: &DVector<f64>) -> f64 {
    let scale = direct.norm();
    let diff = (u - direct).norm();
    if scale > 0.0 { diff / scale } else { diff }
}

fn run_method(args: &Args, ws: &Workspace, method: MethodArg) -> Result<MethodOutcome> {
    let start = Instant::now();
    let ops = &ws.ops;
    let split = &ws.split;
    let (solve, u, eigs): (SolveReport, DVector<f64>, Vec<f64>) = match method {
        MethodArg::Feti1 => {
            let f = ops.e.transpose() * &ws.rhs;
            let sys = feti1_build(ops, args.q_choice(), &f)?;
            let solve = projected_pcg(&sys, args.tol, args.maxit)?;
            let (_, u) = sys.recover_primal(&solve.solution)?;
            let eigs = dual_spectrum(&sys.dense_m(), &sys.dense_f_op(), Some(&sys.dense_p()))?;
            (solve, u, eigs)
        }
        MethodArg::Pfeti1 => {
            let f = ops.e.transpose() * &ws.rhs;
            let sys = feti1_build(ops, args.q_choice(), &f)?;
            let solve =
                pcg(|v| &ops.s_hat * v, |v| sys.pfeti1_apply(v), &ws.rhs, args.tol, args.maxit)?;
            let eigs = primal_spectrum(&sys.dense_pfeti1(), &ops.s_hat)?;
            let u = solve.solution.clone();
            (solve, u, eigs)
        }
        MethodArg::Bdd => {
            let bdd = bdd_build(ops)?;
            let solve = pcg(|v| &ops.s_hat * v, |v| bdd.apply(v), &ws.rhs, args.tol, args.maxit)?;
            let eigs = primal_spectrum(&bdd.dense(), &ops.s_hat)?;
            let u = solve.solution.clone();
            (solve, u, eigs)
        }
        MethodArg::Fetidp => {
            let dp = fetidp_build(&ws.problem, ops, split, &ws.rhs)?;
            let solve = pcg(|v| dp.apply_f(v), |v| dp.apply_m(v), &dp.rhs, args.tol, args.maxit)?;
            let u = dp.recover(&solve.solution);
            let eigs = dual_spectrum(&dp.dense_m(), &dp.dense_f_op(), None)?;
            (solve, u, eigs)
        }
        MethodArg::Pfetidp => {
            let solve = pcg(
                |v| &ops.s_hat * v,
                |v| pfetidp_apply(split, v),
                &ws.rhs,
                args.tol,
                args.maxit,
            )?;
            let eigs = primal_spectrum(&dense_pfetidp(split), &ops.s_hat)?;
            let u = solve.solution.clone();
            (solve, u, eigs)
        }
        MethodArg::Bddc => {
            let bddc = bddc_build(ops, split)?;
            let solve = pcg(|v| &ops.s_hat * v, |v| bddc.apply(v), &ws.rhs, args.tol, args.maxit)?;
            let eigs = primal_spectrum(&bddc.dense(), &ops.s_hat)?;
            let u = solve.solution.clone();
            (solve, u, eigs)
        }
    };
    let kappa_dense = condition_number(&eigs);
    let spectrum = match method {
        MethodArg::Feti1 | MethodArg::Fetidp => SpectrumReport::dual(method.name(), eigs),
        _ => SpectrumReport::primal(method.name(), eigs),
    };
    Ok(MethodOutcome {
        name: method.name(),
        solution_error: solution_error(&u, &ws.direct),
        solve,
        kappa_dense,
        spectrum,
        ms: start.elapsed().as_millis(),
    })
}

/// The four certification verdicts plus the identity table, all with
/// Q = dirichlet (the equality theorems are statements about that variant).
fn certify(ws: &Workspace, checks: &mut Vec<Check>, lines: &mut Vec<String>) -> Result<()> {
    let ops = &ws.ops;
    let split = &ws.split;
    let f = ops.e.transpose() * &ws.rhs;
    let sys = feti1_build(ops, QChoice::Dirichlet, &f)?;
    let bdd = bdd_build(ops)?;
    let bddc = bddc_build(ops, split)?;

    let algebra = ops.verify_algebra();
    for (label, value) in [
        ("algebra BR", algebra.br),
        ("algebra ER-I", algebra.er_minus_identity),
        ("algebra BD^T B + RE - I", algebra.jump_plus_average),
        ("algebra B^T BD E^T", algebra.b_bd_et),
    ] {
        checks.push(Check::bounded(label, value, crate::operators::AlgebraReport::TOL));
    }

    let m_pfeti1 = sys.dense_pfeti1();
    let m_bdd = bdd.dense();
    let d1 = rel_frobenius_diff(&m_pfeti1, &m_bdd);
    checks.push(Check::bounded("pfeti1-eq-bdd", d1, THEOREM_TOL));

    let m_pfetidp = dense_pfetidp(split);
    let m_bddc = bddc.dense();
    let d2 = rel_frobenius_diff(&m_pfetidp, &m_bddc);
    checks.push(Check::bounded("pfetidp-eq-bddc", d2, THEOREM_TOL));
    let d2b = rel_frobenius_diff(&bddc.basis.coarse_gram, &split.s_cc_star);
    checks.push(Check::bounded("coarse-gram-eq-s_cc_star", d2b, THEOREM_TOL));

    let primal = SpectrumReport::primal("bdd", primal_spectrum(&m_bdd, &ops.s_hat)?);
    let dual = SpectrumReport::dual(
        "feti1",
        dual_spectrum(&sys.dense_m(), &sys.dense_f_op(), Some(&sys.dense_p()))?,
    );
    let m1 = spectra_match(&primal, &dual, EIG_ID_TOL);
    checks.push(Check::verdict("spectra-bdd-feti1", m1.pass, m1.max_pair_diff, EIG_ID_TOL));

    let dp = fetidp_build(&ws.problem, ops, split, &ws.rhs)?;
    let primal_dp = SpectrumReport::primal("bddc", primal_spectrum(&m_bddc, &ops.s_hat)?);
    let dual_dp =
        SpectrumReport::dual("fetidp", dual_spectrum(&dp.dense_m(), &dp.dense_f_op(), None)?);
    let m2 = spectra_match(&primal_dp, &dual_dp, EIG_ID_TOL);
    checks.push(Check::verdict("spectra-bddc-fetidp", m2.pass, m2.max_pair_diff, EIG_ID_TOL));

    let identities = identity_suite(ops, &sys)?;
    lines.push("identities:".to_string());
    for (label, resid) in &identities.entries {
        lines.push(format!("  {label}: {}", sci(*resid)));
        checks.push(Check::bounded(format!("identity {label}"), *resid, IDENTITY_TOL));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn render_report(
    args: &Args,
    grid: (usize, usize),
    n: usize,
    ws: &Workspace,
    outcomes: &[MethodOutcome],
    extra_lines: &[String],
    checks: &[Check],
    total_ms: u128,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ddlab experiment report");
    let _ = writeln!(s, "timestamp:");
    let _ = writeln!(
        s,
        "  generated_unix_ms: {}",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0)
    );
    let _ = writeln!(s, "  total_ms: {total_ms}");
    let method_ms: Vec<String> = outcomes.iter().map(|o| format!("{}={}", o.name, o.ms)).collect();
    let _ = writeln!(s, "  method_ms: {}", method_ms.join(" "));
    let _ = writeln!(s, "config:");
    let _ = writeln!(s, "  sub_grid: {}x{}", grid.0, grid.1);
    let _ = writeln!(s, "  elems_per_sub: {n}");
    let _ = writeln!(s, "  dirichlet: {:?}", args.dirichlet);
    let _ = writeln!(s, "  coeff: {}", args.coeff);
    let _ = writeln!(s, "  scaling: {}", args.scaling());
    let _ = writeln!(s, "  q: {}", args.q_choice());
    let _ = writeln!(s, "  tol: {}", sci(args.tol));
    let _ = writeln!(s, "  maxit: {}", args.maxit);
    let _ = writeln!(s, "  seed: {}", args.seed);
    let _ = writeln!(s, "  interface_dofs: {}", ws.ops.n_hat());
    let _ = writeln!(s, "  broken_dofs: {}", ws.ops.w_dim());
    let _ = writeln!(s, "  multipliers: {}", ws.ops.n_lambda());
    let _ = writeln!(s, "  coarse_dofs: {}", ws.split.n_coarse());

    for o in outcomes {
        let _ = writeln!(s, "method {}:", o.name);
        let _ = writeln!(s, "  iterations: {}", o.solve.iterations);
        let _ = writeln!(s, "  converged: {}", o.solve.converged);
        let final_res = o.solve.residual_history.last().copied().unwrap_or(0.0);
        let _ = writeln!(s, "  final_residual: {}", sci(final_res));
        let _ = writeln!(s, "  kappa_lanczos: {}", sci(o.solve.kappa_estimate));
        let _ = writeln!(s, "  kappa_dense: {}", sci(o.kappa_dense));
        let _ = writeln!(s, "  solution_error_vs_direct: {}", sci(o.solution_error));
        let ne = o.spectrum.eigenvalues.len();
        let _ = writeln!(s, "  spectrum_size: {ne}");
        if ne > 0 {
            let _ = writeln!(s, "  eig_min: {}", sci(o.spectrum.eigenvalues[0]));
            let _ = writeln!(s, "  eig_max: {}", sci(o.spectrum.eigenvalues[ne - 1]));
        }
        let _ = writeln!(s, "  excluded_count: {}", o.spectrum.excluded.len());
    }

    for line in extra_lines {
        let _ = writeln!(s, "{line}");
    }

    if !checks.is_empty() {
        let _ = writeln!(s, "checks:");
        for c in checks {
            let _ = writeln!(
                s,
                "  {}: {} measured={} tol={}",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                sci(c.measured),
                sci(c.threshold)
            );
        }
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let _ = writeln!(s, "result: {}", if all_pass { "pass" } else { "FAIL" });
    s
}

fn run_experiment(args: &Args) -> Result<i32> {
    let grids = args.grids()?;
    let ns = args.elem_counts()?;
    if grids.len() != 1 || ns.len() != 1 {
        return Err(Error::Config(
            "comma-separated ranges are only valid in sweep mode (--table)".into(),
        ));
    }
    if args.method.is_empty() && !args.certify_all {
        return Err(Error::Config("nothing to run: pass --method and/or --certify-all".into()));
    }

    let start = Instant::now();
    let ws = build_workspace(args, grids[0], ns[0])?;

    let mut outcomes = Vec::new();
    let mut checks = Vec::new();
    for &method in &args.method {
        let outcome = run_method(args, &ws, method)?;
        checks.push(Check::verdict(
            format!("{} converged", outcome.name),
            outcome.solve.converged,
            outcome.solve.residual_history.last().copied().unwrap_or(0.0),
            args.tol,
        ));
        let err_tol = (100.0 * args.tol).max(1e-6);
        checks.push(Check::bounded(
            format!("{} solution vs direct", outcome.name),
            outcome.solution_error,
            err_tol,
        ));
        outcomes.push(outcome);
    }

    let mut extra_lines = Vec::new();
    if args.certify_all {
        certify(&ws, &mut checks, &mut extra_lines)?;
    }

    let report = render_report(
        args,
        grids[0],
        ns[0],
        &ws,
        &outcomes,
        &extra_lines,
        &checks,
        start.elapsed().as_millis(),
    );
    match &args.out {
        Some(path) => std::fs::write(path, &report)?,
        None => print!("{report}"),
    }

    if let Some(failing) = checks.iter().find(|c| !c.pass) {
        eprintln!(
            "check failed: {} (measured {}, tolerance {})",
            failing.name,
            sci(failing.measured),
            sci(failing.threshold)
        );
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn log_shape(n: usize) -> f64 {
    let l = 1.0 + (1.0 + n as f64).ln();
    l * l
}

fn run_sweep(args: &Args, table_path: &PathBuf) -> Result<i32> {
    let grids = args.grids()?;
    let ns = args.elem_counts()?;
    if args.method.is_empty() {
        return Err(Error::Config("sweep needs at least one --method".into()));
    }

    let mut rows = String::from("m,n,scaling,method,iterations,kappa\n");
    let mut any_error = false;
    let mut kappas: Vec<((usize, usize), MethodArg, usize, f64)> = Vec::new();
    for &grid in &grids {
        for &n in &ns {
            for &method in &args.method {
                match build_workspace(args, grid, n).and_then(|ws| run_method(args, &ws, method)) {
                    Ok(o) => {
                        let _ = writeln!(
                            rows,
                            "{}x{},{},{},{},{},{}",
                            grid.0,
                            grid.1,
                            n,
                            args.scaling(),
                            o.name,
                            o.solve.iterations,
                            sci(o.kappa_dense)
                        );
                        kappas.push((grid, method, n, o.kappa_dense));
                    }
                    Err(e) => {
                        any_error = true;
                        let _ = writeln!(
                            rows,
                            "{}x{},{},{},{},error,{}",
                            grid.0,
                            grid.1,
                            n,
                            args.scaling(),
                            method.name(),
                            e
                        );
                    }
                }
            }
        }
    }

    // one least-squares fit of kappa against (1 + log(1 + n))^2 per group
    for &grid in &grids {
        for &method in &args.method {
            let pts: Vec<(usize, f64)> = kappas
                .iter()
                .filter(|(g, m, _, _)| *g == grid && *m == method)
                .map(|&(_, _, n, k)| (n, k))
                .collect();
            if pts.len() < 2 {
                continue;
            }
            let num: f64 = pts.iter().map(|&(n, k)| k * log_shape(n)).sum();
            let den: f64 = pts.iter().map(|&(n, _)| log_shape(n) * log_shape(n)).sum();
            let c = num / den;
            let _ = writeln!(
                rows,
                "{}x{},fit,{},{},,{}",
                grid.0,
                grid.1,
                args.scaling(),
                method.name(),
                sci(c)
            );
        }
    }

    std::fs::write(table_path, &rows)?;
    println!("sweep table written to {}", table_path.display());
    Ok(if any_error { EXIT_NUMERICAL } else { EXIT_OK })
}

/// Entry point used by the binary; maps error classes onto exit codes.
pub fn run(args: &Args) -> i32 {
    let result = match &args.table {
        Some(path) => run_sweep(args, path),
        None => run_experiment(args),
    };
    match result {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
    }
}
