use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hawkes_harness::config::ExperimentConfig;
use hawkes_harness::{experiments, report, HarnessError, Result};

/// Simulation and convergence experiments for nonlinear compound marked
/// Hawkes processes.
#[derive(Parser, Debug)]
#[command(name = "hawkesbench", version, disable_help_subcommand = true)]
struct Cli {
    /// Experiment config file (flat key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config and the SEED environment variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replica count; overrides the config.
    #[arg(long, global = true)]
    replicas: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print model constants (rho, moments, resolvent mass, bounds).
    Constants,
    /// Export one simulated path and its compensator checkpoints.
    Simulate,
    /// Estimate the stationary mean intensity.
    Sigma2,
    /// W1 convergence of the terminal marginal to the Gaussian limit.
    ConvergeMarginal,
    /// Functional W1 lower bounds along the horizon grid.
    ConvergeFunctional,
    /// Moment-bound ratio tables over the (T, n) grid.
    Lemmas,
    /// Insertion-derivative bound table and threshold-irrelevance check.
    Malliavin,
    /// Discretization gap E sup|F - Pi_n F| across the n grid.
    DiscretizeError,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version print and exit cleanly; anything else is usage
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    // seed priority: --seed flag, then SEED env, then the config file
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    } else if let Ok(env_seed) = std::env::var("SEED") {
        cfg.master_seed = env_seed
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad SEED env value `{env_seed}`")))?;
    }
    if let Some(replicas) = cli.replicas {
        if replicas < 100 {
            return Err(HarnessError::Config(format!(
                "--replicas must be >= 100, got {replicas}"
            )));
        }
        cfg.replicas = replicas;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let dir = report::ensure_dir(&cfg.output_dir)?;
    match cli.cmd {
        Cmd::Constants => {
            let table = experiments::run_constants(&cfg)?;
            let file = report::write_constants(&dir, &table)?;
            report::write_manifest(&dir, &cfg, "constants", &[&file])?;
            println!("rho = {}", table.rho);
            println!("resolvent_l1 = {}", table.resolvent_l1);
            println!("mean_intensity_bound = {}", table.mean_intensity_bound);
            println!("wrote {}", dir.join(file).display());
        }
        Cmd::Simulate => {
            let export = experiments::run_simulate(&cfg)?;
            let files = report::write_simulate(&dir, &export)?;
            let refs: Vec<&str> = files.iter().map(|s| s.as_str()).collect();
            report::write_manifest(&dir, &cfg, "simulate", &refs)?;
            println!(
                "simulated {} events / {} candidates over T = {}",
                export.path.count(),
                export.path.candidates.len(),
                export.path.horizon
            );
        }
        Cmd::Sigma2 => {
            let table = experiments::run_sigma2(&cfg)?;
            let file = report::write_sigma2(&dir, &table)?;
            report::write_manifest(&dir, &cfg, "sigma2", &[&file])?;
            println!("sigma2 = {} +- {}", table.value, table.stderr);
        }
        Cmd::ConvergeMarginal => {
            let rep = experiments::run_marginal_convergence(&cfg)?;
            let file = report::write_convergence(&dir, "marginal_convergence", &rep)?;
            report::write_manifest(&dir, &cfg, "converge-marginal", &[&file])?;
            println!("slope = {}, fitted_c = {}", rep.slope, rep.fitted_c);
        }
        Cmd::ConvergeFunctional => {
            let rep = experiments::run_functional_convergence(&cfg)?;
            let file = report::write_convergence(&dir, "functional_convergence", &rep)?;
            report::write_manifest(&dir, &cfg, "converge-functional", &[&file])?;
            println!("slope = {}, fitted_c = {}", rep.slope, rep.fitted_c);
        }
        Cmd::Lemmas => {
            let rep = experiments::run_lemma_checks(&cfg)?;
            let file = report::write_lemmas(&dir, &rep)?;
            report::write_manifest(&dir, &cfg, "lemmas", &[&file])?;
            println!("{} cells", rep.rows.len());
        }
        Cmd::Malliavin => {
            let rep = experiments::run_malliavin(&cfg)?;
            let file = report::write_malliavin(&dir, &rep)?;
            report::write_manifest(&dir, &cfg, "malliavin", &[&file])?;
            println!(
                "{} lag rows, theta pairs equal: {}",
                rep.rows.len(),
                rep.theta_all_equal
            );
            if !rep.all_satisfied() {
                return Err(HarnessError::CheckFailed(
                    "derivative bound or threshold-irrelevance check failed".into(),
                ));
            }
        }
        Cmd::DiscretizeError => {
            let rep = experiments::run_discretization(&cfg)?;
            let file = report::write_discretization(&dir, &rep)?;
            report::write_manifest(&dir, &cfg, "discretize-error", &[&file])?;
            println!("slope in n = {}", rep.slope);
        }
    }
    Ok(())
}
