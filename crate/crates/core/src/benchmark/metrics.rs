//! Regret against the fluid benchmark and the fairness/reward summaries.

use crate::benchmark::fluid::FluidSolution;
use crate::env::{Instance, ModelParams};
use crate::policy::TrajectoryRecord;
use crate::regularizers::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub regret: f64,
    pub relative_regret: f64,
    /// `min_i (1/T) Σ_t [A d_t]_i`
    pub maxmin_fairness: f64,
    /// `(1/T) Σ_t r(p_t)`
    pub avg_reward: f64,
    /// `Σ_t r(p_t) + T φ((1/T) Σ_t A d_t)`
    pub realized_objective: f64,
    pub fluid_objective: f64,
}

/// Expected revenue summed over the priced periods.
pub fn expected_revenue_total(traj: &TrajectoryRecord, params: &ModelParams) -> f64 {
    traj.prices.iter().map(|p| params.expected_revenue(p)).sum()
}

/// `Σ_t r(p_t) + T φ(s̄)` with `s̄` the per-period average consumption.
pub fn realized_objective(traj: &TrajectoryRecord, reg: &Regularizer, params: &ModelParams) -> f64 {
    let t = traj.horizon as f64;
    expected_revenue_total(traj, params) + t * reg.eval(&(&traj.consumption_total / t))
}

/// `T·J_D − (Σ_t r(p_t) + T φ(s̄))`.
pub fn regret_of(traj: &TrajectoryRecord, fluid: &FluidSolution, reg: &Regularizer, inst: &Instance) -> f64 {
    traj.horizon as f64 * fluid.j_d_per_period - realized_objective(traj, reg, inst.params())
}

pub fn maxmin_fairness(traj: &TrajectoryRecord) -> f64 {
    (&traj.consumption_total / traj.horizon as f64).min()
}

pub fn avg_reward(traj: &TrajectoryRecord, params: &ModelParams) -> f64 {
    expected_revenue_total(traj, params) / traj.horizon as f64
}

pub fn episode_metrics(
    traj: &TrajectoryRecord,
    fluid: &FluidSolution,
    reg: &Regularizer,
    inst: &Instance,
) -> EpisodeMetrics {
    let fluid_objective = traj.horizon as f64 * fluid.j_d_per_period;
    let realized = realized_objective(traj, reg, inst.params());
    let regret = fluid_objective - realized;
    EpisodeMetrics {
        regret,
        relative_regret: regret / fluid_objective,
        maxmin_fairness: maxmin_fairness(traj),
        avg_reward: avg_reward(traj, inst.params()),
        realized_objective: realized,
        fluid_objective,
    }
}

/// Sample mean and normal-approximation 95% half-width `1.96·sd/√n`.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::fluid::solve_fluid;
    use crate::estimator::CheckOutcome;
    use nalgebra::DVector;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    /// A trajectory that charges `p` every period with demand `d`.
    fn constant_trajectory(inst: &Instance, p: &DVector<f64>, d: &DVector<f64>) -> TrajectoryRecord {
        let t = inst.horizon();
        let used = inst.a() * d;
        let mut level = inst.initial_inventory().levels;
        let mut path = Vec::new();
        for _ in 0..t {
            level -= &used;
            path.push(level.clone());
        }
        TrajectoryRecord {
            prices: vec![p.clone(); t],
            demands: vec![d.clone(); t],
            inventory_path: path,
            initial_inventory: inst.initial_inventory().levels,
            tau: t,
            horizon: t,
            revenue_per_step: vec![p.dot(d); t],
            consumption_total: used * t as f64,
            mu_path: vec![DVector::zeros(inst.m()); t],
            checked_demand: vec![d.clone(); t],
            radii: Vec::new(),
            check_outcomes: vec![CheckOutcome::Ellipsoid { iterations: 0 }; t],
            dual_radius: 1.0,
        }
    }

    #[test]
    fn benchmark_attains_itself() {
        let inst = Instance::reference(v(&[15.0, 12.0, 30.0]), 250);
        for lambda in [0.0, 1.0] {
            let reg = Regularizer::max_min(lambda, 3).unwrap();
            let fluid = solve_fluid(&inst, &reg, 0.01).unwrap();
            let d = inst.params().expected_demand(&fluid.p_star);
            let traj = constant_trajectory(&inst, &fluid.p_star, &d);
            let r = regret_of(&traj, &fluid, &reg, &inst);
            assert!(r.abs() < 1e-9 * 250.0 * fluid.j_d_per_period, "{r}");
        }
    }

    #[test]
    fn zero_lambda_is_pure_revenue_regret() {
        let inst = Instance::reference(v(&[15.0, 12.0, 30.0]), 40);
        let reg = Regularizer::max_min(0.0, 3).unwrap();
        let fluid = solve_fluid(&inst, &reg, 0.01).unwrap();
        let p = v(&[2.0, 2.0]);
        let traj = constant_trajectory(&inst, &p, &v(&[1.0, 1.0]));
        let expected = 40.0 * (fluid.j_d_per_period - inst.params().expected_revenue(&p));
        assert!((regret_of(&traj, &fluid, &reg, &inst) - expected).abs() < 1e-9);
    }

    #[test]
    fn fairness_and_reward_examples() {
        let inst = Instance::reference(v(&[15.0, 12.0, 30.0]), 17);
        let traj = constant_trajectory(&inst, &v(&[2.0, 2.0]), &v(&[1.0, 1.0]));
        assert!((maxmin_fairness(&traj) - 2.0).abs() < 1e-12);
        let zero = constant_trajectory(&inst, &v(&[2.0, 2.0]), &v(&[0.0, 0.0]));
        assert_eq!(maxmin_fairness(&zero), 0.0);
        let quiet = Instance::reference(v(&[15.0, 12.0, 30.0]), 17);
        let mut none = constant_trajectory(&quiet, &v(&[2.0, 2.0]), &v(&[0.0, 0.0]));
        none.prices.clear();
        assert_eq!(avg_reward(&none, quiet.params()), 0.0);
    }

    #[test]
    fn ci_half_width() {
        assert_eq!(mean_ci95(&[3.0]), (3.0, 0.0));
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((h - 1.96 * sd / 2.0).abs() < 1e-15);
    }
}
