use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use vekua_core::field::write_field_csv;
use vekua_core::homogeneous::PointSummary;
use vekua_core::report::{to_json_string, SpectrumEntry};
use vekua_core::{
    build_homogeneous, build_w, find_exponents, make_grid, solve_CR, verify_suite, Error, Grid, GridField, HomogeneousOptions, Level, ModelOptions,
    PeriodicProfile, ProblemSpec, Report, SolverOptions, SpecFile,
};

use crate::Common;

pub const MAX_N: usize = 512;
const DEFAULT_N: usize = 64;

/// Exit codes.
const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

enum Failure {
    /// Bad input; nothing is written.
    Input(Error),
    /// Computation error or failed gate; the report is still written.
    Run(Option<Error>, Box<Report>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

pub fn run(command: &str, args: &Common, level: Option<Level>) -> u8 {
    match dispatch(command, args, level) {
        Ok(report) => match write_report(&args.out, &report) {
            Ok(()) => OK,
            Err(e) => {
                eprintln!("error: {e}");
                FAILED
            }
        },
        Err(Failure::Input(e)) => {
            eprintln!("error: {}: {e}", args.spec.display());
            USAGE
        }
        Err(Failure::Run(e, report)) => {
            if let Some(e) = e {
                eprintln!("error: {e}");
            }
            if let Err(e) = write_report(&args.out, &report) {
                eprintln!("error: could not write report: {e}");
            }
            FAILED
        }
    }
}

struct Setup {
    file: SpecFile,
    n: usize,
    solver: SolverOptions,
    gate: Option<f64>,
}

fn setup(args: &Common) -> Result<Setup, Error> {
    let file = SpecFile::load(&args.spec)?;
    let n = args.n.map(usize::from).or(file.grid.n).unwrap_or(DEFAULT_N);
    if !(4..=MAX_N).contains(&n) {
        return Err(Error::Invalid(format!("grid resolution {n} outside 4..={MAX_N}")));
    }
    let mut solver = SolverOptions { seed: args.seed, ..Default::default() };
    let s = &file.solver;
    if let Some(m) = s.method {
        solver.method = m;
    }
    if let Some(t) = s.tolerance {
        solver.tolerance = t;
    }
    if let Some(k) = s.max_iterations {
        solver.max_iterations = k;
    }
    if let Some(c) = s.sv_cutoff {
        solver.sv_cutoff = c;
    }
    if let Some(k) = s.n_h {
        solver.n_h = k;
    }
    if let Some(e) = s.excision_factor {
        solver.transform.excision_factor = e;
    }
    if let Some(m) = args.method {
        solver.method = m;
    }
    solver.validate()?;
    let gate = args.tolerance.or(s.residual_tolerance);
    if let Some(g) = gate {
        if !(g > 0.0) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {g}")));
        }
    }
    Ok(Setup { file, n, solver, gate })
}

fn problem_grid(s: &Setup) -> Result<(ProblemSpec, Arc<Grid>), Error> {
    let spec = s.file.problem()?;
    let grid = Arc::new(make_grid(&spec.domain, s.n, &spec.locations(), s.file.ring_spec())?);
    Ok((spec, grid))
}

fn dispatch(command: &str, args: &Common, level: Option<Level>) -> Result<Report, Failure> {
    let s = setup(args)?;
    fs::create_dir_all(&args.out).map_err(Error::from)?;
    let out = args.out.as_path();
    let mut report = Report::new(command, args.seed);
    match command {
        "solve" => {
            let (spec, grid) = problem_grid(&s)?;
            write_grid(out, &grid)?;
            let sol = solve_CR(&spec, &grid, &s.solver).map_err(|e| Failure::Run(Some(e), Box::new(report.clone())))?;
            write_field(out, "u.csv", &sol.u)?;
            let r = &sol.report;
            report.residual("integral", r.integral_residual);
            if let Some(v) = r.pde_residual_sup {
                report.residual("pde_sup", v);
            }
            let weighted = r.pde_residual_weighted.unwrap_or(f64::NAN);
            report.residual("pde_weighted", weighted);
            report.norm("u_max", sol.u.max_abs()).norm("rho", r.rho);
            if let Some(v) = r.norm_u_over_m {
                report.norm("u_over_m", v);
            }
            if let Some(v) = r.holder_u_over_m {
                report.norm("holder_u_over_m", v);
            }
            if let Some(v) = r.sigma_min {
                report.norm("sigma_min", v);
            }
            if let Some(v) = r.sigma_max {
                report.norm("sigma_max", v);
            }
            report.kernel_dim = r.kernel_dim;
            let gate = s.gate.unwrap_or(grid.h());
            eprintln!("solve: method {}, weighted residual {weighted:.3e} (gate {gate:.3e})", r.method);
            gate_check(weighted, gate, report)
        }
        "reduce" => {
            let (spec, grid) = problem_grid(&s)?;
            write_grid(out, &grid)?;
            let red = build_w(&spec, &grid, &s.solver.transform).map_err(|e| Failure::Run(Some(e), Box::new(report.clone())))?;
            for (name, f) in [("w.csv", &red.w), ("mu.csv", &red.mu), ("b1.csv", &red.b1), ("f1.csv", &red.f1)] {
                write_field(out, name, f)?;
            }
            let b = vekua_core::coefficients::sample_coefficients(&spec, &grid)?.b;
            let nodes = grid.verification_nodes(grid.default_exclusion());
            let modulus = nodes.iter().map(|&k| (red.b1.values()[k].norm() - b.values()[k].norm()).abs()).fold(0.0, f64::max);
            report.residual("reduction", red.report.residual).residual("b1_modulus", modulus);
            report.norm("mu_max", red.report.mu_max);
            for (j, (g, ge)) in red.report.gamma.iter().zip(&red.report.gamma_eff).enumerate() {
                report.norm(&format!("gamma_{}_re", j + 1), g.re).norm(&format!("gamma_{}_im", j + 1), g.im);
                report.norm(&format!("gamma_eff_{}_re", j + 1), ge.re).norm(&format!("gamma_eff_{}_im", j + 1), ge.im);
            }
            gate_check(modulus, 1e-10, report)
        }
        "exponents" => {
            let (q, lambda_max) = s.file.exponents_profile()?;
            let e = s.file.exponents.as_ref().expect("checked by exponents_profile");
            let mut opts = ModelOptions::default();
            if let Some(steps) = e.steps {
                opts.steps = steps;
            }
            if let Some(step) = e.scan_step {
                opts.scan_step = step;
            }
            let spectrum = find_exponents(&q, lambda_max, &opts).map_err(|e| Failure::Run(Some(e), Box::new(report.clone())))?;
            for w in &spectrum.warnings {
                eprintln!("warning: {w}");
            }
            for (k, entry) in spectrum.entries.iter().enumerate() {
                for (i, p) in entry.profiles.iter().enumerate() {
                    let name = if i == 0 { format!("profile_{}.csv", k + 1) } else { format!("profile_{}_{}.csv", k + 1, i + 1) };
                    write_profile(out, &name, p)?;
                }
            }
            let worst = spectrum.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
            report.residual("monodromy", worst);
            report.spectrum = Some(SpectrumEntry::from_spectrum(&spectrum));
            if spectrum.entries.is_empty() {
                return Err(Failure::Run(None, Box::new(report)));
            }
            Ok(report)
        }
        "homogeneous" => {
            let (spec, grid) = problem_grid(&s)?;
            let h = s.file.homogeneous.as_ref().ok_or_else(|| Error::Invalid("the spec has no 'homogeneous' block".into()))?;
            let mut opts = HomogeneousOptions::new(h.a, h.epsilon);
            opts.k = h.k;
            opts.lambda_max = h.lambda_max;
            opts.m = h.m;
            opts.correction = h.correction;
            opts.solver = s.solver.clone();
            write_grid(out, &grid)?;
            let res = build_homogeneous(&spec, &grid, &opts).map_err(|e| Failure::Run(Some(e), Box::new(report.clone())))?;
            write_field(out, "u.csv", &res.u)?;
            write_field(out, "w.csv", &res.w)?;
            write_field(out, "glue.csv", &res.glue)?;
            report.residual("pde_sup", res.pde_residual_sup).residual("pde_weighted", res.pde_residual_weighted).residual("glue_outside", res.glue_outside);
            report.norm("nontriviality", res.nontriviality).norm("nontriviality_relative", res.nontriviality_relative).norm("epsilon", res.epsilon);
            for (j, p) in res.points.iter().enumerate() {
                report.norm(&format!("lambda_{}", j + 1), p.lambda);
            }
            report.orders = Some(res.points.iter().map(|p: &PointSummary| p.vanishing_order).collect());
            report.kernel_dim = res.solve.kernel_dim;
            let gate = s.gate.unwrap_or(4.0 * grid.h());
            eprintln!(
                "homogeneous: weighted residual {:.3e} (gate {gate:.3e}), relative nontriviality {:.3e}",
                res.pde_residual_weighted, res.nontriviality_relative
            );
            if res.degenerate {
                return Err(Failure::Run(None, Box::new(report)));
            }
            gate_check(res.pde_residual_weighted, gate, report)
        }
        "verify" => {
            let (spec, grid) = problem_grid(&s)?;
            let outcome = verify_suite(&spec, &grid, level.unwrap_or_default(), &s.solver);
            write_text(out, "checks.json", &to_json_string(&outcome).map_err(Failure::Input)?)?;
            for c in &outcome.checks {
                eprintln!(
                    "{} {:<24} {:.3e} (bound {:.3e}){}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold,
                    c.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
                );
            }
            if outcome.passed {
                Ok(outcome.report)
            } else {
                Err(Failure::Run(None, Box::new(outcome.report)))
            }
        }
        _ => unreachable!("subcommands are fixed by the parser"),
    }
}

fn gate_check(value: f64, bound: f64, report: Report) -> Result<Report, Failure> {
    if value.is_finite() && value <= bound {
        Ok(report)
    } else {
        eprintln!("residual {value:.3e} exceeds {bound:.3e}");
        Err(Failure::Run(None, Box::new(report)))
    }
}

fn write_report(out: &Path, report: &Report) -> Result<(), Error> {
    write_text(out, "report.json", &report.to_json()?)
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<(), Error> {
    fs::write(out.join(name), text)?;
    Ok(())
}

fn write_grid(out: &Path, grid: &Grid) -> Result<(), Error> {
    write_text(out, "grid.json", &to_json_string(&grid.meta())?)
}

fn write_field(out: &Path, name: &str, field: &GridField) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(out.join(name))?);
    write_field_csv(field, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_profile(out: &Path, name: &str, p: &PeriodicProfile) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(out.join(name))?);
    writeln!(w, "theta,re,im")?;
    for (j, v) in p.samples().iter().enumerate() {
        writeln!(w, "{},{},{}", vekua_core::field::fmt17(p.theta(j)), vekua_core::field::fmt17(v.re), vekua_core::field::fmt17(v.im))?;
    }
    w.flush()?;
    Ok(())
}
