use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fair_nrm::benchmark::experiment::{run_experiment_to_csv, thread_count};
use fair_nrm::benchmark::fluid::solve_fluid_with;
use fair_nrm::benchmark::ExperimentConfig;
use fair_nrm::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "fair-nrm", version, about = "Fairness-aware network revenue management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of the experiment grid and write the CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output path; overrides `experiment.output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Seed of trial 0; trial k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (capped by FAIR_NRM_THREADS).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the fluid optimum for every inventory level and λ.
    Fluid {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parse the config and check every instance and regularizer it defines.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_config_error() || matches!(err, Error::Io { .. }) {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

/// Builds every instance and regularizer so that invariant violations
/// surface before any simulation starts.
fn check(cfg: &ExperimentConfig) -> Result<(), Error> {
    cfg.validate()?;
    for g in 0..cfg.gammas.len() {
        for &t in &cfg.horizons {
            cfg.instance(g, t)?;
        }
        for &lambda in &cfg.lambdas {
            cfg.regularizer(lambda, g)?;
        }
    }
    Ok(())
}

fn run(config: PathBuf, out: Option<PathBuf>, trials: Option<usize>, seed: Option<u64>, parallel: Option<usize>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    if let Some(n) = trials {
        cfg.trials = n;
    }
    if let Some(s) = seed {
        cfg.seed_base = s;
    }
    if let Err(e) = check(&cfg) {
        return fail(e);
    }
    let Some(path) = out.or_else(|| cfg.output.clone()) else {
        eprintln!("error: no output path (pass --out or set experiment.output)");
        return ExitCode::from(EXIT_CONFIG);
    };
    let threads = thread_count(parallel);
    let output = match run_experiment_to_csv(&cfg, Some(&path), threads) {
        Ok(o) => o,
        Err(Error::Io { path, source }) => {
            eprintln!("error: cannot write {}: {source}", path.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
        Err(e) => return fail(e),
    };
    for row in &output.aggregates {
        println!(
            "{:<8} λ={:<4} T={:<6} regret {:>10.2} ± {:<8.2} rel {:.4}  maxmin {:.3}  reward {:.3}",
            row.gamma_label,
            row.lambda,
            row.horizon,
            row.regret,
            row.regret_ci95.unwrap_or(0.0),
            row.relative_regret,
            row.maxmin_fairness,
            row.avg_reward,
        );
    }
    println!(
        "wrote {} rows ({} episodes, {threads} threads) to {}",
        output.cells.len() + output.aggregates.len(),
        output.cells.len(),
        path.display()
    );
    ExitCode::SUCCESS
}

fn fluid(config: PathBuf) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config).and_then(|c| check(&c).map(|_| c)) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    for (g, (label, _)) in cfg.gammas.iter().enumerate() {
        for &lambda in &cfg.lambdas {
            let sol = cfg
                .instance(g, 1)
                .and_then(|inst| Ok((inst, cfg.regularizer(lambda, g)?)))
                .and_then(|(inst, reg)| solve_fluid_with(&inst, &reg, cfg.fluid_resolution, cfg.fluid_method));
            let sol = match sol {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let p: Vec<String> = sol.p_star.iter().map(|x| format!("{x:.4}")).collect();
            println!(
                "{label} λ={lambda}: p* = ({}), J_D = {:.6}, binding = {:?}",
                p.join(", "),
                sol.j_d_per_period,
                sol.binding
            );
        }
    }
    ExitCode::SUCCESS
}

fn validate(config: PathBuf) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    match check(&cfg) {
        Ok(()) => {
            println!("{}: ok ({} cells)", config.display(), cfg.cell_count());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            parallel,
        } => run(config, out, trials, seed, parallel),
        Command::Fluid { config } => fluid(config),
        Command::Validate { config } => validate(config),
    }
}
