mod io;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use ckn_core::constants::FORMULA_DISCREPANCY;
use ckn_core::functionals::ckn_quotient;
use ckn_core::gauge::{gauge_quotient, Gauge};
use ckn_core::params::{validate, CknParams, RawParams, Regime};
use ckn_core::profiles::RadialProfile;
use ckn_core::quadrature::DEFAULT_TOL;
use ckn_core::search::{maximize_quotient, SearchOptions, SearchResult};
use ckn_core::transform::{forward, inverse, TransformSpec};
use ckn_core::verify::{run_suite, Suite, VerifyOptions};

use io::{print_json, read_json, write_atomic, Failure, Outcome};
use sweep::{BranchArg, SweepSpec};

#[derive(Parser)]
#[command(
    name = "ckn",
    version,
    about = "Sharp constants and optimizers for weighted CKN inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form sharp constant with its quadrature cross-check
    Constant {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_enum)]
        branch: BranchArg,
    },
    /// Quotient of a radial profile, optionally for an l^rho gauge
    Quotient {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// gauge exponent rho in [1, inf]
        #[arg(long)]
        gauge: Option<f64>,
    },
    /// Run a seeded property suite
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = VerifyOptions::default().mc_samples)]
        mc_samples: usize,
        /// also write the JSON log here
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Maximize the quotient over grid profiles from several random starts
    Search {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = SearchOptions::default().nodes)]
        nodes: usize,
        /// first seed; runs use seed, seed+1, ...
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Apply the profile transform or its inverse
    Transform {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum)]
        direction: Direction,
    },
    /// Evaluate a parameter grid and write CSV
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Fwd,
    Inv,
}

fn load_params(path: &PathBuf) -> Outcome<CknParams> {
    let raw: RawParams = read_json(path)?;
    let c = validate(&raw)?;
    if c.regime == Regime::Invalid {
        return Err(Failure::Input(format!(
            "{}: parameters are invalid: {}",
            path.display(),
            c.violations.join("; ")
        )));
    }
    Ok(c.params)
}

fn constant(params: &PathBuf, branch: BranchArg) -> Outcome<()> {
    let c = load_params(params)?;
    let rep = branch.constant(&c)?;
    print_json(&rep)?;
    if rep.flags.iter().any(|f| f == FORMULA_DISCREPANCY) {
        return Err(Failure::Verification(format!(
            "closed form and optimizer quotient differ by {:e}",
            rep.rel_gap.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

fn quotient(params: &PathBuf, profile: &PathBuf, gauge: Option<f64>) -> Outcome<()> {
    let c = load_params(params)?;
    let g: RadialProfile = read_json(profile)?;
    match gauge {
        None => print_json(&ckn_quotient(&c, &g)?),
        Some(rho) => {
            let gauge = Gauge::new(rho, c.n)?;
            print_json(&gauge_quotient(&c, &g, &gauge, DEFAULT_TOL)?)
        }
    }
}

fn verify(suite: Suite, seed: u64, mc_samples: usize, log: Option<&PathBuf>) -> Outcome<()> {
    let rep = run_suite(suite, &VerifyOptions { seed, mc_samples });
    eprint!("{}", rep.summary());
    let text = serde_json::to_string_pretty(&rep)
        .map_err(|e| Failure::Input(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    if let Some(path) = log {
        write_atomic(path, format!("{text}\n").as_bytes())?;
    }
    if !rep.passed {
        let failed: Vec<&str> = rep
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Failure::Verification(format!(
            "suite {suite}: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedRun {
    seed: u64,
    best_quotient: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct SearchOutput {
    best: SearchResult,
    runs: Vec<SeedRun>,
    family_summary: String,
}

fn search(
    params: &PathBuf,
    seeds: u64,
    nodes: usize,
    seed: u64,
    max_it: Option<usize>,
) -> Outcome<()> {
    let c = load_params(params)?;
    if seeds == 0 {
        return Err(Failure::Input("at least one seed is needed".into()));
    }
    let defaults = SearchOptions::default();
    let results = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let opts = SearchOptions {
                nodes,
                seed: seed.wrapping_add(k),
                max_iterations: max_it.unwrap_or(defaults.max_iterations),
                ..defaults
            };
            maximize_quotient(&c, None, &opts).map(|r| (opts.seed, r))
        })
        .collect::<ckn_core::Result<Vec<_>>>()?;
    let runs = results
        .iter()
        .map(|(s, r)| SeedRun {
            seed: *s,
            best_quotient: r.best_quotient,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    let best = results
        .into_iter()
        .map(|(_, r)| r)
        .max_by(|a, b| a.best_quotient.total_cmp(&b.best_quotient))
        .expect("at least one run");
    let family_summary = match &best.family_fit {
        Some(f) => format!(
            "{:?} family: amplitude {:.6e}, scale {:.6e}, sup-norm residual {:.3e}",
            f.family, f.amplitude, f.scale, f.residual
        ),
        None => format!("no closed-form family for regime {}", best.regime),
    };
    eprintln!(
        "best quotient {:.12e}; {family_summary}",
        best.best_quotient
    );
    print_json(&SearchOutput {
        best,
        runs,
        family_summary,
    })
}

fn transform(profile: &PathBuf, d: f64, p: f64, direction: Direction) -> Outcome<()> {
    let g: RadialProfile = read_json(profile)?;
    // the profile map does not depend on the dimension
    let spec = TransformSpec::new(d, p, 1.0)?;
    let out = match direction {
        Direction::Fwd => forward(&g, &spec)?,
        Direction::Inv => inverse(&g, &spec)?,
    };
    print_json(&out)
}

fn run_sweep(path: &PathBuf) -> Outcome<()> {
    let spec: SweepSpec = read_json(path)?;
    let rows = sweep::run(&spec)?;
    let bytes = sweep::to_csv(&rows)?;
    match &spec.output {
        Some(out) => write_atomic(out, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    let flagged = rows.iter().filter(|r| r.discrepancy).count();
    if flagged > 0 {
        return Err(Failure::Verification(format!(
            "{flagged} rows flagged {FORMULA_DISCREPANCY}"
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Constant { params, branch } => constant(params, *branch),
        Command::Quotient {
            params,
            profile,
            gauge,
        } => quotient(params, profile, *gauge),
        Command::Verify {
            suite,
            seed,
            mc_samples,
            log,
        } => verify(*suite, *seed, *mc_samples, log.as_ref()),
        Command::Search {
            params,
            seeds,
            nodes,
            seed,
            max_iterations,
        } => search(params, *seeds, *nodes, *seed, *max_iterations),
        Command::Transform {
            profile,
            d,
            p,
            direction,
        } => transform(profile, *d, *p, *direction),
        Command::Sweep { spec } => run_sweep(spec),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ckn: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
