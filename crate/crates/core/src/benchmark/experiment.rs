//! Multi-trial experiment runner.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::benchmark::config::ExperimentConfig;
use crate::benchmark::csv_io::{write_csv, ExperimentRow, Trial};
use crate::benchmark::fluid::{solve_fluid_with, FluidSolution};
use crate::benchmark::metrics::{episode_metrics, mean_ci95};
use crate::error::{Error, Result};
use crate::policy::{run_episode, PolicyConfig, SafetyReport};

pub const THREADS_ENV: &str = "FAIR_NRM_THREADS";

/// One `(γ, λ, T, trial)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub gamma_idx: usize,
    pub lambda_idx: usize,
    pub horizon: usize,
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub row: ExperimentRow,
    pub safety: SafetyReport,
    /// Periods whose checked parameters came from the fallback.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<ExperimentRow>,
    /// Fluid solutions indexed by `(gamma_idx, lambda_idx)`.
    pub fluid: HashMap<(usize, usize), FluidSolution>,
}

impl ExperimentOutput {
    /// Data rows followed by aggregate rows, in cell order.
    pub fn rows(&self) -> Vec<ExperimentRow> {
        self.cells
            .iter()
            .map(|c| c.row.clone())
            .chain(self.aggregates.iter().cloned())
            .collect()
    }

    pub fn aggregate(&self, gamma_label: &str, lambda: f64, horizon: usize) -> Option<&ExperimentRow> {
        self.aggregates
            .iter()
            .find(|r| r.gamma_label == gamma_label && r.lambda == lambda && r.horizon == horizon)
    }
}

/// Threads to use: the request (or all cores), capped by `FAIR_NRM_THREADS`.
pub fn thread_count(requested: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0);
    let n = requested.unwrap_or(available).max(1);
    cap.map_or(n, |c| n.min(c))
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::with_capacity(cfg.cell_count());
    for gamma_idx in 0..cfg.gammas.len() {
        for lambda_idx in 0..cfg.lambdas.len() {
            for &horizon in &cfg.horizons {
                for trial in 0..cfg.trials {
                    out.push(Cell {
                        gamma_idx,
                        lambda_idx,
                        horizon,
                        trial,
                    });
                }
            }
        }
    }
    out
}

fn run_cell(cfg: &ExperimentConfig, cell: Cell, fluid: &FluidSolution) -> Result<CellResult> {
    let inst = cfg.instance(cell.gamma_idx, cell.horizon)?;
    let lambda = cfg.lambdas[cell.lambda_idx];
    let reg = cfg.regularizer(lambda, cell.gamma_idx)?;
    let seed = cfg.seed_base.wrapping_add(cell.trial as u64);
    let policy = PolicyConfig {
        seed,
        ..cfg.policy.clone()
    };
    let traj = run_episode(&inst, &reg, &policy)?;
    let m = episode_metrics(&traj, fluid, &reg, &inst);
    Ok(CellResult {
        cell,
        row: ExperimentRow {
            trial: Trial::Index(cell.trial),
            horizon: cell.horizon,
            lambda,
            gamma_label: cfg.gammas[cell.gamma_idx].0.clone(),
            regularizer: reg.name().to_string(),
            seed,
            tau: traj.tau as f64,
            regret: m.regret,
            relative_regret: m.relative_regret,
            maxmin_fairness: m.maxmin_fairness,
            avg_reward: m.avg_reward,
            realized_objective: m.realized_objective,
            fluid_per_period: fluid.j_d_per_period,
            regret_ci95: None,
            relative_regret_ci95: None,
            maxmin_fairness_ci95: None,
            avg_reward_ci95: None,
        },
        safety: traj.check_safety(&inst),
        fallbacks: traj.fallback_count(),
    })
}

fn aggregate(rows: &[&ExperimentRow], seed_base: u64) -> ExperimentRow {
    let col = |f: fn(&ExperimentRow) -> f64| mean_ci95(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (regret, regret_ci) = col(|r| r.regret);
    let (rel, rel_ci) = col(|r| r.relative_regret);
    let (fair, fair_ci) = col(|r| r.maxmin_fairness);
    let (reward, reward_ci) = col(|r| r.avg_reward);
    let first = rows[0];
    ExperimentRow {
        trial: Trial::Aggregate,
        seed: seed_base,
        tau: col(|r| r.tau).0,
        regret,
        relative_regret: rel,
        maxmin_fairness: fair,
        avg_reward: reward,
        realized_objective: col(|r| r.realized_objective).0,
        regret_ci95: Some(regret_ci),
        relative_regret_ci95: Some(rel_ci),
        maxmin_fairness_ci95: Some(fair_ci),
        avg_reward_ci95: Some(reward_ci),
        ..first.clone()
    }
}

/// Runs every cell of `cfg` on a pool of `threads` workers. Results do not
/// depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;

    let keys: Vec<(usize, usize)> = (0..cfg.gammas.len())
        .flat_map(|g| (0..cfg.lambdas.len()).map(move |l| (g, l)))
        .collect();
    let cells = cells(cfg);

    pool.install(|| {
        let fluid: HashMap<(usize, usize), FluidSolution> = keys
            .par_iter()
            .map(|&(g, l)| {
                let inst = cfg.instance(g, 1)?;
                let reg = cfg.regularizer(cfg.lambdas[l], g)?;
                Ok(((g, l), solve_fluid_with(&inst, &reg, cfg.fluid_resolution, cfg.fluid_method)?))
            })
            .collect::<Result<_>>()?;

        let results: Vec<CellResult> = cells
            .par_iter()
            .with_max_len(1)
            .map(|c| run_cell(cfg, *c, &fluid[&(c.gamma_idx, c.lambda_idx)]))
            .collect::<Result<_>>()?;

        let mut aggregates = Vec::new();
        for chunk in results.chunks(cfg.trials) {
            let rows: Vec<&ExperimentRow> = chunk.iter().map(|c| &c.row).collect();
            aggregates.push(aggregate(&rows, cfg.seed_base));
        }
        Ok(ExperimentOutput {
            cells: results,
            aggregates,
            fluid,
        })
    })
}

/// Runs the experiment and writes all rows to `cfg.output` (or `out`).
pub fn run_experiment_to_csv(
    cfg: &ExperimentConfig,
    out: Option<&std::path::Path>,
    threads: usize,
) -> Result<ExperimentOutput> {
    let path = out
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::config("experiment.output", "no output path given"))?;
    let output = run_experiment(cfg, threads)?;
    write_csv(&path, &output.rows())?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn smoke() -> ExperimentConfig {
        ExperimentConfig {
            horizons: vec![100],
            trials: 1,
            lambdas: vec![0.5],
            gammas: vec![("high".into(), DVector::from_row_slice(&[15.0, 12.0, 30.0]))],
            ..ExperimentConfig::reference_grid()
        }
    }

    #[test]
    fn smoke_cell_gives_one_row_and_one_aggregate() {
        let out = run_experiment(&smoke(), 1).unwrap();
        assert_eq!(out.cells.len(), 1);
        assert_eq!(out.aggregates.len(), 1);
        let rows = out.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].trial, Trial::Index(0));
        assert!(rows[1].is_aggregate());
        assert_eq!(rows[1].regret, rows[0].regret);
        assert_eq!(rows[1].regret_ci95, Some(0.0));
        assert!(out.cells[0].safety.all());
    }

    #[test]
    fn cell_order_and_seeds() {
        let cfg = ExperimentConfig {
            horizons: vec![20, 40],
            trials: 3,
            seed_base: 100,
            ..smoke()
        };
        let out = run_experiment(&cfg, 2).unwrap();
        let seeds: Vec<u64> = out.cells.iter().map(|c| c.row.seed).collect();
        assert_eq!(seeds, vec![100, 101, 102, 100, 101, 102]);
        assert_eq!(out.aggregates.len(), 2);
        assert_eq!(out.aggregates[1].horizon, 40);
        let again = run_experiment(&cfg, 1).unwrap();
        assert_eq!(out.rows(), again.rows());
    }

    #[test]
    fn thread_cap_from_environment() {
        assert!(thread_count(Some(3)) >= 1);
        assert_eq!(thread_count(Some(1)), 1);
    }

    #[test]
    fn missing_output_path_is_config_error() {
        let err = run_experiment_to_csv(&smoke(), None, 1).unwrap_err();
        assert!(err.is_config_error());
    }
}
