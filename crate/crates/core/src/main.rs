//! Command-line front end for the laboratory: parameter solving, cover
//! geometry, seeded spectra, box classification, bound verification,
//! recursion traces, eigensystem audits, and Monte Carlo runs.
//!
//! Exit codes: 0 when every requested check passed, 1 when a check failed
//! (including an infeasible exponent system or a solver breakdown), 2 for
//! usage and configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eigenlab::harness::{
    audit_interior_transfer, audit_separated_decay, run_trials, save_record, separated_field,
    verify_init_step, verify_init_step_separated, ExperimentConfig,
};
use eigenlab::lattice::{make_box, suitable_cover};
use eigenlab::localization::{classify_box, BoxClass};
use eigenlab::operator::{build_hamiltonian, sample_disorder, Distribution};
use eigenlab::parameters::{solve_parameters, validate, validate_csv, ParameterSet};
use eigenlab::recursion::{msa1_trace, msa2_mass, msa3_trace, RecursionTrace};
use eigenlab::spectral::eigensystem;
use eigenlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "eigenlab",
    version,
    about = "Finite-volume eigensystem laboratory for the disordered tight-binding model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the exponent system from (theta, xi, alpha, dim) and validate
    /// every inequality, or validate a parameter set from a JSON file.
    Params(ParamsArgs),
    /// Construct the suitable cover of a box and dump its geometry.
    Cover(CoverArgs),
    /// Eigensystem of one seeded disorder realization on a box.
    Spectrum(SpectrumArgs),
    /// Classify one seeded realization against a localizing class.
    Check(CheckArgs),
    /// Verify the initial-scale probability bound by seeded Monte Carlo.
    Init(InitArgs),
    /// Trace a probability recursion across scales.
    Msa(MsaArgs),
    /// Deterministic eigensystem audits.
    Audit(AuditArgs),
    /// Seeded Monte Carlo classification run from flags or a config file.
    Run(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    /// Polynomial spacing, polynomial decay.
    Pl,
    /// Polynomial spacing, exponential decay.
    Ml,
    /// Exponential spacing, subexponential decay.
    Sel,
    /// Exponential spacing, exponential decay.
    Loc,
}

impl From<ClassArg> for BoxClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Pl => BoxClass::PolyLocalizing,
            ClassArg::Ml => BoxClass::MixLocalizing,
            ClassArg::Sel => BoxClass::SubexpLocalizing,
            ClassArg::Loc => BoxClass::ExpLocalizing,
        }
    }
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Target decay exponent of the exponent system.
    #[arg(long, default_value_t = 12.0)]
    theta: f64,
    /// Target final subexponential exponent.
    #[arg(long, default_value_t = 0.3)]
    xi: f64,
    /// Disorder concentration exponent.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Validate this JSON parameter set instead of solving.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Parent box side.
    #[arg(long, default_value_t = 200.0)]
    side: f64,
    /// Cell side (at most side / 6 is always feasible).
    #[arg(long, default_value_t = 20.0)]
    cell: f64,
    /// Parent box center, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    center: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 20.0)]
    side: f64,
    /// Hopping strength.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform disorder support, lower end.
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    /// Uniform disorder support, upper end.
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    center: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ClassArg::Pl)]
    class: ClassArg,
    /// Class exponent: decay power, decay rate, or subexponential exponent.
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
    /// Polynomial level-spacing exponent.
    #[arg(long, default_value_t = 3.0)]
    q: f64,
    /// Exponential level-spacing exponent.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Exponential decay is enforced from radius floor(side^tau).
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    center: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 100.0)]
    side: f64,
    #[arg(long, default_value_t = 3.0)]
    q: f64,
    /// Realizations per center offset.
    #[arg(long, default_value_t = 500)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use exactly separated potentials (deterministic verdict).
    #[arg(long)]
    separated: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MsaKind {
    /// Quadratic recursion with polynomial thresholds.
    Msa1,
    /// Multiplicative mass-erosion bound.
    Msa2,
    /// Degree-(N+1) recursion with subexponential thresholds.
    Msa3,
}

#[derive(Args)]
struct MsaArgs {
    #[arg(long, value_enum)]
    kind: MsaKind,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Scale ratio between consecutive steps.
    #[arg(long, default_value_t = 400.0)]
    y: f64,
    /// Polynomial threshold exponent (msa1).
    #[arg(long, default_value_t = 5.0)]
    p: f64,
    /// Starting probability (msa1, msa3).
    #[arg(long, default_value_t = 0.0)]
    p0: f64,
    /// Starting scale.
    #[arg(long, default_value_t = 20.0)]
    l0: f64,
    #[arg(long, default_value_t = 16)]
    kmax: u32,
    /// Starting mass (msa2).
    #[arg(long, default_value_t = 0.1)]
    m0: f64,
    /// Scale-growth exponent (msa2).
    #[arg(long, default_value_t = 1.04)]
    gamma1: f64,
    /// Spacing exponent entering the erosion factor (msa2).
    #[arg(long, default_value_t = 3.375)]
    q: f64,
    #[arg(long, default_value_t = 0.99)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Erosion constant (msa2).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Degree exponent: N = floor(Y^s) (msa3).
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// Subexponential threshold exponent (msa3).
    #[arg(long, default_value_t = 0.45)]
    zeta: f64,
    /// Emit plot-ready two-column data instead of json/csv.
    #[arg(long)]
    plot: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    /// Gap and decay bounds for an exactly separated potential.
    Separated,
    /// Interior eigenvalue transfer into an ambient box.
    Transfer,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum)]
    kind: AuditKind,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Box side (the sub-box side for the transfer audit).
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    /// Ambient box side (transfer audit only).
    #[arg(long, default_value_t = 120.0)]
    ambient: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Potential separation (separated audit only).
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    /// Polynomial decay exponent audited (transfer audit only).
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    /// Realizations (transfer audit only).
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the experiment config; other flags except
    /// --out and --format are ignored when present.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, value_enum, default_value_t = ClassArg::Pl)]
    class: ClassArg,
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
    #[arg(long, default_value_t = 3.0)]
    q: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    center: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Save the full record (JSON plus CSV) here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)
                        .map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
                }
            }
            let mut text = text.to_string();
            if !text.ends_with('\n') {
                text.push('\n');
            }
            std::fs::write(path, text)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })
        }
        None => {
            print_tolerant(text);
            Ok(())
        }
    }
}

/// Print to stdout, treating a closed pipe (e.g. `| head`) as success.
fn print_tolerant(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}");
}

fn centered(center: &[f64], dim: usize) -> Vec<f64> {
    if center.is_empty() {
        vec![0.0; dim]
    } else {
        center.to_vec()
    }
}

fn cmd_params(a: &ParamsArgs) -> Result<bool> {
    let ps: ParameterSet = match &a.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            serde_json::from_str(&text)?
        }
        None => solve_parameters(a.theta, a.xi, a.alpha, a.dim as u32)?,
    };
    let checks = validate(&ps);
    let feasible = checks.iter().all(|c| c.pass);
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "parameters": ps,
            "feasible": feasible,
            "checks": checks,
        }))?,
        Format::Csv => validate_csv(&ps),
    };
    emit(&text, &a.out)?;
    Ok(feasible)
}

fn cmd_cover(a: &CoverArgs) -> Result<bool> {
    let center = centered(&a.center, a.dim);
    let cover = suitable_cover(&center, a.side, a.cell)?;
    let covers_parent = cover.interiors_cover_parent()?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "cover": cover.to_json(),
            "rho": cover.rho_f64(),
            "cells": cover.len(),
            "interiors_cover_parent": covers_parent,
        }))?,
        Format::Csv => {
            use std::fmt::Write;
            let mut out = String::from("index,center\n");
            for i in 0..cover.len() {
                let c: Vec<String> = cover.center_f64(i).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{},\"{}\"", i, c.join(" ")).unwrap();
            }
            out
        }
    };
    emit(&text, &a.out)?;
    Ok(covers_parent)
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<bool> {
    let bx = make_box(&centered(&a.center, a.dim), a.side)?;
    let field =
        sample_disorder(bx.region(), Distribution::Uniform { lo: a.lo, hi: a.hi }, a.seed)?;
    let op = build_hamiltonian(&field, a.epsilon)?;
    let es = eigensystem(&op)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "sites": es.n(),
            "eigenvalues": es.eigenvalues,
            "min_gap": es.min_gap(),
        }))?,
        Format::Csv => es.to_csv(),
    };
    emit(&text, &a.out)?;
    Ok(true)
}

fn cmd_check(a: &CheckArgs) -> Result<bool> {
    let bx = make_box(&centered(&a.center, a.dim), a.side)?;
    let field = sample_disorder(bx.region(), Distribution::default(), a.seed)?;
    let op = build_hamiltonian(&field, a.epsilon)?;
    let ps = ParameterSet::for_predicates(a.dim as u32, a.q, a.beta, a.tau);
    let verdict = classify_box(&bx, &op, a.class.into(), &ps, a.rate)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&verdict)?,
        Format::Csv => {
            let witness = verdict.witness.as_ref().map_or(String::new(), |(x, y)| {
                format!("\"{:?} -> {:?}\"", x, y)
            });
            format!(
                "class,rate,side,verdict,spacing_ok,min_gap,degenerate,witness\n{},{},{},{},{},{},{},{}\n",
                verdict.class.tag(),
                verdict.rate,
                verdict.side,
                verdict.verdict,
                verdict.spacing_ok,
                verdict.min_gap.map_or(String::new(), |g| g.to_string()),
                verdict.degenerate_labeling,
                witness,
            )
        }
    };
    emit(&text, &a.out)?;
    Ok(verdict.verdict)
}

fn cmd_init(a: &InitArgs) -> Result<bool> {
    let rep = if a.separated {
        verify_init_step_separated(a.dim, a.side, a.q, a.n, a.seed)?
    } else {
        verify_init_step(a.dim, a.side, a.q, a.n, a.seed)?
    };
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&rep)?,
        Format::Csv => {
            use std::fmt::Write;
            let mut out = String::from("offset,frequency,threshold,pass\n");
            for (off, freq) in rep.offsets.iter().zip(&rep.frequencies) {
                let o: Vec<String> = off.iter().map(|v| v.to_string()).collect();
                writeln!(
                    out,
                    "\"{}\",{},{},{}",
                    o.join(" "),
                    freq,
                    rep.threshold,
                    *freq >= rep.threshold
                )
                .unwrap();
            }
            out
        }
    };
    emit(&text, &a.out)?;
    Ok(rep.pass)
}

fn cmd_msa(a: &MsaArgs) -> Result<bool> {
    let trace: RecursionTrace = match a.kind {
        MsaKind::Msa1 => msa1_trace(a.y, a.dim as u32, a.p, a.p0, a.l0, a.kmax)?,
        MsaKind::Msa2 => msa2_mass(a.m0, a.gamma1, a.q, a.tau, a.kappa, a.l0, a.kmax, a.c)?,
        MsaKind::Msa3 => msa3_trace(a.y, a.s, a.dim as u32, a.zeta, a.p0, a.l0, a.kmax)?,
    };
    let text = if a.plot {
        trace.to_gnuplot()
    } else {
        match a.format {
            Format::Json => serde_json::to_string_pretty(&trace)?,
            Format::Csv => trace.to_csv(),
        }
    };
    emit(&text, &a.out)?;
    Ok(match a.kind {
        MsaKind::Msa2 => trace.mass_half_retained == Some(true),
        _ => !trace.capped,
    })
}

fn cmd_audit(a: &AuditArgs) -> Result<bool> {
    match a.kind {
        AuditKind::Separated => {
            let bx = make_box(&vec![0.0; a.dim], a.side)?;
            let field = separated_field(bx.region(), a.eta, a.seed)?;
            let audit = audit_separated_decay(&bx, &field, a.eta, a.epsilon)?;
            let text = match a.format {
                Format::Json => serde_json::to_string_pretty(&audit)?,
                Format::Csv => format!(
                    "eta,epsilon,gap_floor,decay_ratio,gap_checks,decay_checks,violations,pass\n{},{},{},{},{},{},{},{}\n",
                    audit.eta,
                    audit.epsilon,
                    audit.gap_floor,
                    audit.decay_ratio,
                    audit.gap_checks,
                    audit.decay_checks,
                    audit.gap_violations.len() + audit.decay_violations.len(),
                    audit.pass,
                ),
            };
            emit(&text, &a.out)?;
            Ok(audit.pass)
        }
        AuditKind::Transfer => {
            let audit =
                audit_interior_transfer(a.dim, a.side, a.ambient, a.epsilon, a.theta, a.n, a.seed)?;
            let text = match a.format {
                Format::Json => serde_json::to_string_pretty(&audit)?,
                Format::Csv => format!(
                    "ell,ambient,epsilon,theta,bound,audited,failures,excluded,pass\n{},{},{},{},{},{},{},{},{}\n",
                    audit.ell,
                    audit.theta_side,
                    audit.epsilon,
                    audit.theta_tilde,
                    audit.bound,
                    audit.audited,
                    audit.failures.len(),
                    audit.excluded,
                    audit.pass,
                ),
            };
            emit(&text, &a.out)?;
            Ok(audit.pass)
        }
    }
}

fn cmd_run(a: &RunArgs) -> Result<bool> {
    let mut config: ExperimentConfig = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            serde_json::from_str(&text)?
        }
        None => ExperimentConfig {
            dim: a.dim,
            side: a.side,
            epsilon: a.epsilon,
            distribution: Distribution::Uniform { lo: a.lo, hi: a.hi },
            seed: a.seed,
            n_realizations: a.n,
            class: a.class.into(),
            rate: a.rate,
            q: a.q,
            beta: a.beta,
            tau: a.tau,
            center: a.center.clone(),
            parameters: None,
            out: None,
        },
    };
    if let Some(path) = &a.out {
        config.out = Some(path.display().to_string());
    }
    let record = run_trials(&config)?;
    if let Some(path) = config.out.clone() {
        save_record(&record, Path::new(&path))?;
        print_tolerant(&format!(
            "saved {} ({} realizations, frequency {})",
            path, record.config.n_realizations, record.frequency
        ));
    } else {
        let text = match a.format {
            Format::Json => serde_json::to_string_pretty(&record)?,
            Format::Csv => record.to_csv(),
        };
        print_tolerant(&text);
    }
    let valid = record.config.n_realizations - record.excluded;
    let bound_ok = record.bound.map_or(true, |b| {
        let sigma = (b * (1.0 - b) / valid.max(1) as f64).sqrt();
        record.frequency >= b - 3.0 * sigma
    });
    Ok(record.excluded == 0 && bound_ok)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Params(a) => cmd_params(a),
        Command::Cover(a) => cmd_cover(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Check(a) => cmd_check(a),
        Command::Init(a) => cmd_init(a),
        Command::Msa(a) => cmd_msa(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Run(a) => cmd_run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let benign = e.exit_code() == 0;
            let _ = e.print();
            return ExitCode::from(if benign { 0 } else { 2 });
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible { .. } | Error::SolverFailure(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
