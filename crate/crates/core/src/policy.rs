//! One episode of learn, price, observe and update with depletion stopping.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual::{estimated_subgradient, DualConfig, DualState};
use crate::env::Instance;
use crate::error::{Error, Result};
use crate::estimator::{kappa_value, CheckOutcome, ConfidenceRadii, EstimatorState};
use crate::linalg::inf_norm_mat;
use crate::primal::primal_price_update;
use crate::regularizers::Regularizer;

/// Which family of defaults to use for the tuning constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Constants from the regret analysis.
    Theory,
    /// `C = 5`, `η = 0.01/√T`, ridge weight `0.001`, UCB coefficient `20√(ln T)`.
    #[default]
    Experiment,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "theory" => Some(Mode::Theory),
            "experiment" => Some(Mode::Experiment),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Theory => "theory",
            Mode::Experiment => "experiment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyConfig {
    pub mode: Mode,
    /// Fixed coefficient on `‖L⁻¹p̃‖∞` in the optimistic objective.
    pub ucb_coefficient: Option<f64>,
    pub reg_weight: Option<f64>,
    pub c: Option<f64>,
    pub eta: Option<f64>,
    pub seed: u64,
}

impl PolicyConfig {
    pub fn experiment(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn theory(seed: u64) -> Self {
        Self {
            mode: Mode::Theory,
            seed,
            ..Self::default()
        }
    }

    pub fn reg_weight_for(&self, n: usize) -> f64 {
        self.reg_weight.unwrap_or(match self.mode {
            Mode::Theory => (n + 1) as f64,
            Mode::Experiment => 0.001,
        })
    }

    pub fn dual_config(&self, inst: &Instance, reg: &Regularizer) -> Result<DualConfig> {
        let base = match self.mode {
            Mode::Theory => DualConfig::theory(inst, reg),
            Mode::Experiment => DualConfig::experiment(inst),
        };
        let c = self.c.unwrap_or(base.c);
        let eta = match (self.eta, self.c, self.mode) {
            (Some(eta), _, _) => eta,
            (None, Some(c), Mode::Theory) => DualConfig::balanced_eta(inst.m(), c, base.g, inst.horizon()),
            _ => base.eta,
        };
        DualConfig::new(c, eta, base.g)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.ucb_coefficient {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::param("ucb_coefficient", "must be finite and ≥ 0"));
            }
        }
        if let Some(w) = self.reg_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::param("reg_weight", "must be finite and positive"));
            }
        }
        Ok(())
    }
}

/// Coefficient on `‖L⁻¹p̃‖∞` for the current dual iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Coefficient {
    Fixed(f64),
    /// `2·√(N+1)·κ·(N·p̄ + ‖μ‖₁·‖A‖∞)`
    Theory { scale: f64, base: f64, dual: f64 },
}

impl Coefficient {
    fn at(&self, mu_l1: f64) -> f64 {
        match *self {
            Coefficient::Fixed(k) => k,
            Coefficient::Theory { scale, base, dual } => scale * (base + mu_l1 * dual),
        }
    }
}

/// Everything logged during one episode. Per-period vectors have one entry
/// per priced period, so their length is `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub prices: Vec<DVector<f64>>,
    pub demands: Vec<DVector<f64>>,
    /// Inventory after each priced period, before any flooring.
    pub inventory_path: Vec<DVector<f64>>,
    pub initial_inventory: DVector<f64>,
    /// Number of priced periods; the last one is the period that depleted a
    /// resource when the episode stopped early.
    pub tau: usize,
    pub horizon: usize,
    /// Realized revenue `⟨p_t, d_t⟩`, length `T`, zero after `tau`.
    pub revenue_per_step: Vec<f64>,
    pub consumption_total: DVector<f64>,
    /// Dual iterate used to price period `t`.
    pub mu_path: Vec<DVector<f64>>,
    /// `Ď_t(p_t)` from the checked parameters of period `t`.
    pub checked_demand: Vec<DVector<f64>>,
    pub radii: Vec<ConfidenceRadii>,
    pub check_outcomes: Vec<CheckOutcome>,
    pub dual_radius: f64,
}

impl TrajectoryRecord {
    /// Inventory path floored at zero.
    pub fn reported_inventory(&self) -> Vec<DVector<f64>> {
        self.inventory_path.iter().map(|l| l.map(|x| x.max(0.0))).collect()
    }

    pub fn stopped_early(&self) -> bool {
        self.tau < self.horizon
    }

    pub fn fallback_count(&self) -> usize {
        self.check_outcomes
            .iter()
            .filter(|o| matches!(o, CheckOutcome::Fallback { .. }))
            .count()
    }
}

/// Outcome of the per-episode safety checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SafetyReport {
    /// `I_t = I_{t−1} − A d_t` holds bit-for-bit along the path.
    pub inventory_identity: bool,
    /// No revenue and no logged price after `tau`, and the stop is justified.
    pub no_pricing_after_tau: bool,
    /// `‖μ_t‖₁ ≤ C` for every period after the first.
    pub dual_in_ball: bool,
    /// `consumption_total` equals `Σ A d_t` up to summation rounding.
    pub consumption_matches: bool,
}

impl SafetyReport {
    pub fn all(&self) -> bool {
        self.inventory_identity && self.no_pricing_after_tau && self.dual_in_ball && self.consumption_matches
    }
}

impl TrajectoryRecord {
    pub fn check_safety(&self, inst: &Instance) -> SafetyReport {
        let a = inst.a();
        let mut level = self.initial_inventory.clone();
        let mut identity = self.inventory_path.len() == self.tau;
        let mut total = DVector::zeros(a.nrows());
        for (d, logged) in self.demands.iter().zip(&self.inventory_path) {
            level = &level - a * d;
            total += a * d;
            identity &= level == *logged;
        }
        let depleted_at = self
            .inventory_path
            .iter()
            .position(|l| l.iter().any(|x| *x <= 0.0));
        let stop_ok = match depleted_at {
            Some(t) => t + 1 == self.tau,
            None => self.tau == self.horizon,
        };
        let no_pricing = stop_ok
            && self.prices.len() == self.tau
            && self.revenue_per_step.len() == self.horizon
            && self.revenue_per_step[self.tau..].iter().all(|r| *r == 0.0);
        let dual_in_ball = self
            .mu_path
            .iter()
            .skip(1)
            .all(|mu| mu.lp_norm(1) <= self.dual_radius * (1.0 + 1e-12));
        let scale = 1.0 + total.amax();
        SafetyReport {
            inventory_identity: identity,
            no_pricing_after_tau: no_pricing,
            dual_in_ball,
            consumption_matches: (total - &self.consumption_total).amax() <= 1e-9 * scale,
        }
    }
}

/// Runs the primal-dual UCB policy on `inst` for up to `T` periods.
pub fn run_episode(inst: &Instance, reg: &Regularizer, cfg: &PolicyConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if reg.dim() != inst.m() {
        return Err(Error::Dimension(format!(
            "regularizer acts on {} resources, instance has {}",
            reg.dim(),
            inst.m()
        )));
    }
    let n = inst.n();
    let m = inst.m();
    let horizon = inst.horizon();
    let p_bar = inst.price_hi();
    let row_bound = inst.params().row_norm_bound();
    let a = inst.a();
    let a_norm = inf_norm_mat(a);

    let kappa = kappa_value(n, horizon, inst.d_bar(), row_bound, p_bar);
    let mut est = EstimatorState::new(n, cfg.reg_weight_for(n), kappa)?;
    let dual_cfg = cfg.dual_config(inst, reg)?;
    let mut dual = DualState::from_config(m, &dual_cfg)?;
    let coeff = match (cfg.ucb_coefficient, cfg.mode) {
        (Some(k), _) => Coefficient::Fixed(k),
        (None, Mode::Experiment) => Coefficient::Fixed(20.0 * (horizon as f64).ln().max(0.0).sqrt()),
        (None, Mode::Theory) => Coefficient::Theory {
            scale: 2.0 * ((n + 1) as f64).sqrt() * kappa,
            base: n as f64 * p_bar,
            dual: a_norm,
        },
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut inventory = inst.initial_inventory();
    let initial_inventory = inventory.levels.clone();
    let mut rec = TrajectoryRecord {
        prices: Vec::with_capacity(horizon),
        demands: Vec::with_capacity(horizon),
        inventory_path: Vec::with_capacity(horizon),
        initial_inventory,
        tau: 0,
        horizon,
        revenue_per_step: vec![0.0; horizon],
        consumption_total: DVector::zeros(m),
        mu_path: Vec::with_capacity(horizon),
        checked_demand: Vec::with_capacity(horizon),
        radii: Vec::with_capacity(horizon),
        check_outcomes: Vec::with_capacity(horizon),
        dual_radius: dual_cfg.c,
    };
    let mut warm: Option<DVector<f64>> = None;

    for t in 0..horizon {
        let outcome = est.solve_mt(row_bound, horizon);
        let mu = dual.mu();
        let mu_l1 = mu.lp_norm(1);
        let choice = primal_price_update(
            &est,
            &mu,
            a,
            inst.price_lo(),
            inst.price_hi(),
            coeff.at(mu_l1),
            warm.as_ref(),
        )?;
        let p = choice.p;
        let (s, _) = reg.conjugate_argmax(&mu, inst.gamma());

        let d = inst.sample_demand(&p, &mut rng);
        inventory = inventory.consume(a, &d);
        let used = a * &d;
        rec.consumption_total += &used;
        rec.revenue_per_step[t] = p.dot(&d);

        let d_check = est.checked_demand(&p);
        let g = estimated_subgradient(&d_check, a, &s);
        rec.radii.push(est.confidence_radii(&p, mu_l1, a_norm, p_bar));
        dual.update(&g)?;
        est.observe(&p, &d);

        rec.checked_demand.push(d_check);
        rec.check_outcomes.push(outcome);
        rec.mu_path.push(mu);
        rec.prices.push(p.clone());
        rec.demands.push(d);
        rec.inventory_path.push(inventory.levels.clone());
        rec.tau = t + 1;
        warm = Some(p);

        if inventory.is_depleted() {
            break;
        }
    }
    Ok(rec)
}
