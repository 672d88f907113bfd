//! `disloc-fix` command-line front end.
//!
//! Exit status: 0 when every check passes or the solve succeeds, 1 when a
//! check fails or the solver does not converge (the report is still
//! written), 2 for usage and input errors.

pub mod cobweb;
pub mod output;
pub mod problem;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use disloc_fix::{
    check_dominance, check_phi_class, solve_alternating, solve_integral, solve_picard, solve_sequence,
    verify_contraction, verify_family_contraction, verify_integral_contraction, verify_pair_contraction,
    ConditionReport, IterationTrace, SolveError,
};
use serde::Serialize;
use thiserror::Error;

pub use cobweb::{emit_cobweb, emit_cobweb_alternating, CobwebRow, CobwebSeries};
pub use output::to_json;
pub use problem::{MapForm, Overrides, ProblemFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("`{key}`: {message}")]
    Input { key: String, message: String },
    #[error("problem file: {0}")]
    Schema(String),
    #[error(transparent)]
    Library(#[from] disloc_fix::Error),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Parser)]
#[command(name = "disloc-fix", version, about = "Fixed points and hypothesis checks on dislocated metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Sample the dislocated metric axioms.
    CheckMetric(Flags),
    /// Check the control-function axioms (A2, A3; A1 with --check-continuity).
    CheckAlpha(Flags),
    /// Sample the contraction condition for the problem's map form.
    CheckContraction(Flags),
    /// Picard iteration for a single map.
    Solve(Flags),
    /// Iteration through a map family.
    SolveSeq(Flags),
    /// Picard iteration under the integral-type condition.
    SolveIntegral(Flags),
    /// Alternating iteration for a common fixed point of map_t and map_s.
    SolveTwoMetric(Flags),
    /// Staircase CSV (step, x, tx) for a map or a map pair.
    Cobweb(Flags),
}

#[derive(Debug, Clone, PartialEq, clap::Args)]
pub struct Flags {
    #[arg(long)]
    pub problem: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the iteration trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Run the (heuristic) A1 continuity check.
    #[arg(long)]
    pub check_continuity: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckMetric(_) => "check-metric",
            Command::CheckAlpha(_) => "check-alpha",
            Command::CheckContraction(_) => "check-contraction",
            Command::Solve(_) => "solve",
            Command::SolveSeq(_) => "solve-seq",
            Command::SolveIntegral(_) => "solve-integral",
            Command::SolveTwoMetric(_) => "solve-two-metric",
            Command::Cobweb(_) => "cobweb",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::CheckMetric(f)
            | Command::CheckAlpha(f)
            | Command::CheckContraction(f)
            | Command::Solve(f)
            | Command::SolveSeq(f)
            | Command::SolveIntegral(f)
            | Command::SolveTwoMetric(f)
            | Command::Cobweb(f) => f,
        }
    }
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    command: &'a str,
    seed: u64,
    passed: bool,
    reports: Vec<ConditionReport<f64>>,
}

#[derive(Serialize)]
struct SolveOutput<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    passed: bool,
    certificate: C,
}

/// Result of a subcommand before it is written out.
pub struct Outcome {
    pub text: String,
    pub trace: Option<IterationTrace<f64>>,
    pub passed: bool,
    pub message: Option<String>,
}

fn checks(command: &str, seed: u64, reports: Vec<ConditionReport<f64>>) -> Outcome {
    let passed = reports.iter().all(ConditionReport::passed);
    let text = to_json(&CheckOutput { command, seed, passed, reports });
    Outcome { text, trace: None, passed, message: (!passed).then(|| "a check failed".to_string()) }
}

trait Certificate: Serialize + std::fmt::Debug {
    fn sound(&self) -> bool;
    fn trace(&self) -> Option<&IterationTrace<f64>>;
}

impl Certificate for disloc_fix::FixedPointCertificate<f64> {
    fn sound(&self) -> bool {
        disloc_fix::FixedPointCertificate::sound(self)
    }
    fn trace(&self) -> Option<&IterationTrace<f64>> {
        self.trace.as_ref()
    }
}

impl Certificate for disloc_fix::CommonFixedPointCertificate<f64> {
    fn sound(&self) -> bool {
        self.sound
    }
    fn trace(&self) -> Option<&IterationTrace<f64>> {
        self.trace.as_ref()
    }
}

fn solved<C: Certificate>(
    command: &str,
    seed: u64,
    result: Result<C, SolveError<C>>,
    extra: impl FnOnce(&mut C),
) -> Result<Outcome, CliError> {
    let (mut cert, message) = match result {
        Ok(c) => (c, None),
        Err(SolveError::Input(e)) => return Err(e.into()),
        Err(e @ SolveError::ContractionViolated { .. }) => {
            let msg = e.to_string();
            let SolveError::ContractionViolated { report, .. } = e else { unreachable!() };
            (*report, Some(msg))
        }
        Err(SolveError::NotConverged(c)) => (*c, Some("no convergence within the iteration budget".to_string())),
    };
    extra(&mut cert);
    let passed = cert.sound();
    let message = message.or_else(|| (!passed).then(|| "converged, but an attached check failed".to_string()));
    let trace = cert.trace().cloned();
    let text = to_json(&SolveOutput { command, seed, passed, certificate: &cert });
    Ok(Outcome { text, trace, passed, message })
}

/// Runs one subcommand against a loaded problem.
pub fn execute(command: &Command, problem: &ProblemFile) -> Result<Outcome, CliError> {
    let flags = command.flags();
    let overrides = Overrides { seed: flags.seed, tol: flags.tol, max_iters: flags.max_iters };
    let name = command.name();
    let domain = problem.domain()?;
    let (plan, seed) = problem.sampling(&overrides)?;
    let cfg = problem.solver(&domain, &plan, &overrides);
    match command {
        Command::CheckMetric(_) => {
            let mut reports: Vec<ConditionReport<f64>> = Vec::new();
            let d = problem.metric(domain)?;
            reports.extend(d.check_axioms(&plan)?.into_iter().map(ConditionReport::from));
            if let Some(delta) = problem.metric_delta(domain)? {
                reports.extend(delta.check_axioms(&plan)?.into_iter().map(ConditionReport::from));
                reports.push(check_dominance(&d, &delta, &plan)?.into());
            }
            Ok(checks(name, seed, reports))
        }
        Command::CheckAlpha(f) => {
            let alpha = problem.require_alpha()?;
            let bound = problem.contraction_metric(domain)?.sampling_bound(&plan)?;
            let mut reports: Vec<ConditionReport<f64>> = Vec::new();
            if f.check_continuity {
                reports.push(alpha.check_a1_continuity(&plan, bound)?.into());
            }
            reports.push(alpha.check_a2(&plan, bound, cfg.k_max)?.into());
            reports.push(alpha.check_a3(&plan, bound)?.into());
            Ok(checks(name, seed, reports))
        }
        Command::CheckContraction(_) => {
            let alpha = problem.require_alpha()?;
            let reports = match problem.map_form()? {
                Some(MapForm::Single) => {
                    let d = problem.metric(domain)?;
                    let t = problem.map(domain, &plan)?;
                    let mut r: Vec<ConditionReport<f64>> = vec![verify_contraction(&t, &d, &alpha, &plan)?.into()];
                    if let Some(phi) = problem.phi()? {
                        let q = problem.quadrature()?;
                        r.push(check_phi_class(&phi, &plan, &q, d.sampling_bound(&plan)?)?.into());
                        r.push(verify_integral_contraction(&t, &d, &alpha, &phi, &plan, &q)?.into());
                    }
                    r
                }
                Some(MapForm::Family) => {
                    let d = problem.metric(domain)?;
                    let fam = problem.family(domain, &plan)?;
                    vec![verify_family_contraction(&fam, &d, &alpha, &plan, None)?.into()]
                }
                Some(MapForm::Pair) => {
                    let delta = problem.contraction_metric(domain)?;
                    let (t, s) = problem.map_pair(domain, &plan)?;
                    let mut r: Vec<ConditionReport<f64>> = Vec::new();
                    if problem.metric_delta.is_some() {
                        r.push(check_dominance(&problem.metric(domain)?, &delta, &plan)?.into());
                    }
                    r.push(verify_pair_contraction(&t, &s, &delta, &alpha, &plan)?.into());
                    r
                }
                None => return Err(CliError::Input { key: "map".into(), message: "missing".into() }),
            };
            Ok(checks(name, seed, reports))
        }
        Command::Solve(_) => {
            problem.require_form(MapForm::Single)?;
            let d = problem.metric(domain)?;
            let t = problem.map(domain, &plan)?;
            let alpha = problem.alpha()?;
            let report = alpha.as_ref().map(|a| verify_contraction(&t, &d, a, &plan)).transpose()?;
            solved(name, seed, solve_picard(&t, &d, alpha.as_ref(), &cfg), |c| {
                if let Some(r) = report {
                    c.attach(r);
                }
            })
        }
        Command::SolveSeq(_) => {
            problem.require_form(MapForm::Family)?;
            let d = problem.metric(domain)?;
            let fam = problem.family(domain, &plan)?;
            let alpha = problem.alpha()?;
            let report = alpha.as_ref().map(|a| verify_family_contraction(&fam, &d, a, &plan, None)).transpose()?;
            solved(name, seed, solve_sequence(&fam, &d, alpha.as_ref(), &cfg), |c| {
                if let Some(r) = report {
                    c.attach(r);
                }
            })
        }
        Command::SolveIntegral(_) => {
            problem.require_form(MapForm::Single)?;
            let d = problem.metric(domain)?;
            let t = problem.map(domain, &plan)?;
            let alpha = problem.require_alpha()?;
            let phi = problem.phi()?.ok_or_else(|| CliError::Input { key: "phi".into(), message: "missing".into() })?;
            let q = problem.quadrature()?;
            let class = check_phi_class(&phi, &plan, &q, d.sampling_bound(&plan)?)?;
            solved(name, seed, solve_integral(&t, &d, &alpha, &phi, &cfg, &plan, &q), |c| c.attach(class))
        }
        Command::SolveTwoMetric(_) => {
            problem.require_form(MapForm::Pair)?;
            let d = problem.metric(domain)?;
            let delta = problem
                .metric_delta(domain)?
                .ok_or_else(|| CliError::Input { key: "metric_delta".into(), message: "missing".into() })?;
            let (t, s) = problem.map_pair(domain, &plan)?;
            let alpha = problem.require_alpha()?;
            solved(name, seed, solve_alternating(&t, &s, &d, &delta, &alpha, &cfg, &plan), |_| {})
        }
        Command::Cobweb(_) => {
            let series = match problem.map_form()? {
                Some(MapForm::Pair) => {
                    let d = problem.metric(domain)?;
                    let delta = problem.contraction_metric(domain)?;
                    let (t, s) = problem.map_pair(domain, &plan)?;
                    emit_cobweb_alternating(&t, &s, &d, &delta, &problem.require_alpha()?, &cfg, &plan)?
                }
                _ => {
                    problem.require_form(MapForm::Single)?;
                    let d = problem.metric(domain)?;
                    let t = problem.map(domain, &plan)?;
                    emit_cobweb(&t, &d, problem.alpha()?.as_ref(), &cfg)?
                }
            };
            Ok(Outcome {
                text: series.to_csv(),
                trace: None,
                passed: series.converged,
                message: series.warning.clone(),
            })
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(command: &Command) -> Result<bool, CliError> {
    let flags = command.flags();
    let problem = ProblemFile::load(&flags.problem)?;
    let outcome = execute(command, &problem)?;
    match &flags.out {
        Some(p) => write(p, &outcome.text)?,
        None => print!("{}", outcome.text),
    }
    if let Some(p) = &flags.trace_csv {
        let trace = outcome.trace.as_ref().ok_or_else(|| CliError::Input {
            key: "--trace-csv".into(),
            message: format!("`{}` produces no iteration trace", command.name()),
        })?;
        write(p, &trace.to_csv())?;
    }
    if let Some(m) = &outcome.message {
        eprintln!("disloc-fix {}: {m}", command.name());
    }
    Ok(outcome.passed)
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match emit(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e @ CliError::Library(disloc_fix::Error::ContractionConstant(_))) => {
            eprintln!("disloc-fix: {e}");
            1
        }
        Err(e) => {
            eprintln!("disloc-fix: {e}");
            2
        }
    }
}
