//! `julia-thermo`: batch front end for the `julia_thermo` library.
//!
//! Exit status: 0 success, 2 invalid configuration, 3 numerical failure,
//! 1 anything else (I/O).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use julia_thermo::family::FamilyDef;
use julia_thermo::Error;

use config::{invalid, parse_lambda, parse_relation, Command, Pair, Run, RunConfig, ValidationError};

#[derive(Debug, Parser)]
#[command(name = "julia-thermo", version, about = "Pressure, dimension, tower spectra and pressure-metric fields for polynomial families")]
struct Cli {
    /// Subcommand; may instead come from the config file.
    command: Option<Command>,
    /// TOML run configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Family name: quadratic, cubic_pm_a.
    #[arg(long)]
    family: Option<String>,
    /// Critical relation "index,preperiod,period"; repeatable.
    #[arg(long = "relation", value_parser = parse_relation)]
    relations: Vec<julia_thermo::family::Relation>,
    /// Parameter "re,im;re,im;..."
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Second parameter for joint pressure.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Newton-solve the relations from --lambda.
    #[arg(long)]
    solve: bool,
    /// Chart coordinates, comma separated.
    #[arg(long, value_delimiter = ',')]
    chart: Option<Vec<usize>>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
    /// Second exponents for joint pressure.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t2: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long = "chi-star", allow_hyphen_values = true)]
    chi_star: Option<f64>,
    /// Mesh density.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// "re0,re1,im0,im1,nx,ny"
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    /// Finite-difference step.
    #[arg(long)]
    h: Option<f64>,
    /// Distance source node.
    #[arg(long)]
    from: Option<usize>,
    /// Distance target node (default: last node).
    #[arg(long)]
    to: Option<usize>,
}

impl Cli {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let family = if self.family.is_some() || !self.relations.is_empty() {
            let mut def =
                file.family.clone().unwrap_or(FamilyDef { name: "quadratic".into(), coeffs: vec![], ambient_dim: None, relations: vec![] });
            if let Some(name) = self.family {
                def.name = name;
            }
            if !self.relations.is_empty() {
                def.relations = self.relations;
            }
            Some(def)
        } else {
            None
        };
        let flags = RunConfig {
            command: self.command,
            family,
            lambda: complex_flag("lambda", self.lambda.as_deref())?,
            mu: complex_flag("mu", self.mu.as_deref())?,
            scan: None,
            solve: self.solve.then_some(true),
            chart: self.chart,
            t: self.t,
            t2: self.t2,
            depth: self.depth,
            kmax: self.kmax,
            chi_star: self.chi_star,
            mesh: self.mesh,
            kappa: self.kappa,
            grid: self.grid,
            tol: self.tol,
            h: self.h,
            from: self.from,
            to: self.to,
            seed: self.seed,
            threads: self.threads,
            out: self.out,
        };
        Ok(file.merge(flags))
    }
}

fn complex_flag(name: &str, value: Option<&str>) -> anyhow::Result<Option<Vec<Pair>>> {
    value.map(|s| parse_lambda(s).map_err(|e| invalid(format!("--{name}: {e}")))).transpose()
}

fn exit_code(e: &anyhow::Error) -> (u8, &'static str) {
    if e.downcast_ref::<ValidationError>().is_some() {
        return (2, "ValidationError");
    }
    match e.downcast_ref::<Error>() {
        Some(err @ (Error::InvalidInput(_) | Error::ParamOutOfRange(_))) => (2, err.name()),
        Some(err) => (3, err.name()),
        None => (1, "IoError"),
    }
}

fn run(cli: Cli) -> Result<(), (anyhow::Error, Option<Box<Run>>)> {
    let cfg = cli.into_config().map_err(|e| (e, None))?;
    let run = Run::resolve(cfg).map_err(|e| (e, None))?;
    if let Some(n) = run.threads {
        if n == 0 {
            return Err((invalid("--threads must be positive"), Some(Box::new(run))));
        }
        // a second initialisation only happens in-process, never from the CLI
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::execute(&run) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            Ok(())
        }
        Err(e) => Err((e, Some(Box::new(run)))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, run)) => {
            let (code, name) = exit_code(&e);
            eprintln!("error [{name}]: {e:#}");
            if let Some(run) = run {
                let report = serde_json::json!({
                    "command": run.command.name(),
                    "seed": run.seed,
                    "exit_code": code,
                    "error": name,
                    "message": format!("{e:#}"),
                });
                if std::fs::create_dir_all(&run.out).is_ok() {
                    let _ = std::fs::write(run.out.join("failure.json"), format!("{report:#}\n"));
                }
            }
            ExitCode::from(code)
        }
    }
}
