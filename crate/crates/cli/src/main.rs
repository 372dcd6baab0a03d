//! Experiment CLI: validate configs, run experiments, list catalogs,
//! regenerate reports from existing CSV.
//!
//! Exit codes: 0 all checks/flags pass, 1 flag or check failure,
//! 2 config/usage error, 3 numerical failure (divergence, non-finite).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use langevin_anneal::diffusion::{ellipticity_scan, field_get, field_names};
use langevin_anneal::gibbs::auto_box;
use langevin_anneal::harness::{
    compute_flags, parse_config_text, parse_metrics_csv, render_plots, run_and_emit,
    verdict_text, ExperimentConfig, EXPERIMENTS,
};
use langevin_anneal::potentials::{catalog_get, catalog_names, check_assumptions};
use langevin_anneal::schedules::StepSequence;
use langevin_anneal::{Error, Result};

const OUTDIR_ENV: &str = "LANGEVIN_ANNEAL_OUTDIR";

#[derive(Parser)]
#[command(name = "langevin-anneal", version, about = "Langevin simulated annealing experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment name (defaults for everything else); see `list`
    experiment: Option<String>,
    /// Config file with key = value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory (else $LANGEVIN_ANNEAL_OUTDIR, else "out")
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// Override the report tag (default "seed<seed>")
    #[arg(long)]
    tag: Option<String>,
    /// Worker threads for chain-parallel simulation
    #[arg(long)]
    jobs: Option<usize>,
    /// Verbose output (repeatable)
    #[arg(short, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its report directory
    Run(ConfigArgs),
    /// Probe structural assumptions of a config without simulating
    Validate(ConfigArgs),
    /// List experiments, potentials, and diffusion fields
    List,
    /// Recompute flags and plots of an existing report directory from its
    /// metrics.csv; never re-simulates
    Report {
        /// Report directory containing metrics.csv and config.echo
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Validate(args) => cmd_validate(&args),
        Cmd::List => cmd_list(),
        Cmd::Report { dir } => cmd_report(&dir),
    };
    ExitCode::from(code)
}

/// 2 for config/usage problems, 3 for numerical failures.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. }
        | Error::EnsembleDiverged { .. }
        | Error::NonFinite(_)
        | Error::EnvelopeFailure(_)
        | Error::Truncation(_)
        | Error::RatioBound(_) => 3,
        _ => 2,
    }
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    error_code(e)
}

fn build_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut map = match &args.config {
        Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    if let Some(exp) = &args.experiment {
        map.insert("experiment".into(), exp.clone());
    }
    if let Some(seed) = args.seed {
        map.insert("seed".into(), seed.to_string());
    }
    if let Some(outdir) = &args.outdir {
        map.insert("outdir".into(), outdir.display().to_string());
    } else if !map.contains_key("outdir") {
        if let Ok(env) = std::env::var(OUTDIR_ENV) {
            map.insert("outdir".into(), env);
        }
    }
    if let Some(tag) = &args.tag {
        map.insert("tag".into(), tag.clone());
    }
    ExperimentConfig::from_map(map)
}

fn set_jobs(args: &ConfigArgs) -> Result<()> {
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("--jobs: {e}")))?;
    }
    Ok(())
}

fn cmd_run(args: &ConfigArgs) -> u8 {
    let cfg = match build_config(args).and_then(|c| {
        set_jobs(args)?;
        Ok(c)
    }) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if args.verbose > 0 {
        print!("{}", cfg.echo());
    }
    match run_and_emit(&cfg) {
        Ok((report, dir)) => {
            println!("wrote {}", dir.display());
            print!("{}", verdict_text(&report));
            u8::from(!report.all_passed())
        }
        Err(e) => fail(&e),
    }
}

fn validate_inner(cfg: &ExperimentConfig) -> Result<bool> {
    let mut failed = false;
    println!("experiment: {}", cfg.experiment);
    if let Ok(pname) = cfg.str("potential") {
        let p = catalog_get(pname)?;
        let a_big = cfg.f64("a").or_else(|_| cfg.f64("schedule.A")).unwrap_or(1.0);
        let (lo, hi) = match cfg.f64_list("box") {
            Ok(b) if b.len() == 2 && p.dim == 1 => (vec![b[0]], vec![b[1]]),
            _ => auto_box(&p, a_big),
        };
        let r = check_assumptions(&p, &lo, &hi, a_big)?;
        println!(
            "H_V2: sup |grad V|^2 / V = {:.4}, sup ||hess V|| = {:.4}",
            r.sup_grad_sq_over_v, r.sup_hess_norm
        );
        match r.dissipativity {
            Some((r0, a0)) => {
                println!("dissipativity: witnessed (R0, alpha0) = ({r0:.3}, {a0:.4})")
            }
            None => println!("dissipativity: not witnessed on the probe box"),
        }
        println!(
            "moment integral: rel change {:.3e} ({})",
            r.moment_integral_rel_change,
            if r.moment_integral_converged { "converged" } else { "NOT CONVERGED" }
        );
        failed |= !r.moment_integral_converged;
        if let Ok(fname) = cfg.str("field") {
            let f = field_get(fname, p.dim, Some(&p))?;
            let e = ellipticity_scan(&f, &lo, &hi, 2000)?;
            println!(
                "ellipticity: min eig sigma sigma^T = {:.6}, declared sigma0^2 = {:.6}{}",
                e.min_eigenvalue,
                e.declared_sigma0_sq,
                if e.violated { " VIOLATION" } else { "" }
            );
            failed |= e.violated;
        }
    }
    if let (Ok(g1), Ok(alpha)) = (cfg.f64("steps.gamma1"), cfg.f64("steps.alpha")) {
        if alpha <= 0.5 {
            println!("H_gamma1 VIOLATION: alpha = {alpha} <= 1/2, sum gamma_n^2 diverges");
            failed = true;
        } else {
            let s = StepSequence::power(g1, alpha)?;
            println!("varpi estimate: {:.4}", s.varpi_estimate(100_000));
        }
    }
    Ok(failed)
}

fn cmd_validate(args: &ConfigArgs) -> u8 {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if args.verbose > 0 {
        print!("{}", cfg.echo());
    }
    match validate_inner(&cfg) {
        Ok(failed) => {
            println!("validate: {}", if failed { "FAIL" } else { "OK" });
            u8::from(failed)
        }
        Err(e) => fail(&e),
    }
}

fn cmd_list() -> u8 {
    println!("experiments:");
    for e in EXPERIMENTS {
        println!("  {e}");
    }
    println!("potentials:");
    for p in catalog_names() {
        println!("  {p}");
    }
    println!("fields:");
    for f in field_names() {
        println!("  {f}");
    }
    0
}

fn cmd_report(dir: &Path) -> u8 {
    let inner = || -> Result<bool> {
        let csv = fs::read_to_string(dir.join("metrics.csv"))?;
        let echo = fs::read_to_string(dir.join("config.echo"))?;
        let experiment = echo
            .lines()
            .find_map(|l| l.strip_prefix("experiment = "))
            .ok_or_else(|| Error::InvalidInput("config.echo: missing experiment line".into()))?;
        let m = parse_metrics_csv(&csv)?;
        let flags = compute_flags(experiment, &m)?;
        for (name, svg) in render_plots(experiment, &m) {
            fs::write(dir.join(name), svg)?;
        }
        let mut all = true;
        for f in &flags {
            println!(
                "{} {}: value={} threshold={}",
                if f.passed { "PASS" } else { "FAIL" },
                f.name,
                f.value,
                f.threshold
            );
            all &= f.passed;
        }
        println!("VERDICT: {}", if all { "PASS" } else { "FAIL" });
        Ok(all)
    };
    match inner() {
        Ok(all) => u8::from(!all),
        // a report dir is an input artifact: any read/parse problem is
        // a usage error, never a numerical one
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
