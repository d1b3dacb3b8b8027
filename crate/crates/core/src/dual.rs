//! Dual variables on the ℓ₁ ball `{‖μ‖₁ ≤ C}`, updated by exponentiated
//! gradient with split positive and negative weights (EG±).

use nalgebra::{DMatrix, DVector};

use crate::env::Instance;
use crate::error::{Error, Result};
use crate::linalg::inf_norm_mat;
use crate::regularizers::Regularizer;

/// Radius, step size and gradient bound of the dual solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConfig {
    pub c: f64,
    pub eta: f64,
    pub g: f64,
}

/// `2·max(p̄, 1)·(N+1)·L_B·‖A‖∞ + max γ`.
pub fn gradient_bound(inst: &Instance) -> f64 {
    let n1 = (inst.n() + 1) as f64;
    let gamma_max = inst.gamma().max();
    2.0 * inst.price_hi().max(1.0) * n1 * inst.params().row_norm_bound() * inf_norm_mat(inst.a()) + gamma_max
}

/// `L + (r̄ + φ̄)/min γ` with `r̄ = N·p̄·d̄`.
pub fn theory_radius(inst: &Instance, reg: &Regularizer) -> f64 {
    let meta = reg.metadata(inst.gamma());
    let r_bar = inst.n() as f64 * inst.price_hi() * inst.d_bar();
    meta.lipschitz + (r_bar + meta.phi_bar) / inst.gamma().min()
}

/// `C₁/η + C₂·η·T` with `C₁ = ln(2M)` and `C₂ = C²G²/2`.
pub fn regret_bound(m: usize, c: f64, g: f64, eta: f64, horizon: usize) -> f64 {
    let c1 = (2.0 * m as f64).ln();
    let c2 = c * c * g * g / 2.0;
    c1 / eta + c2 * eta * horizon as f64
}

impl DualConfig {
    pub fn new(c: f64, eta: f64, g: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("C", "must be finite and positive"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", "must be finite and positive"));
        }
        Ok(Self { c, eta, g })
    }

    /// Radius from the regularizer constants and the step size that balances
    /// the two terms of [`regret_bound`].
    pub fn theory(inst: &Instance, reg: &Regularizer) -> Self {
        let c = theory_radius(inst, reg);
        let g = gradient_bound(inst);
        Self {
            c,
            eta: Self::balanced_eta(inst.m(), c, g, inst.horizon()),
            g,
        }
    }

    /// `C = 5` and `η = 0.01/√T`.
    pub fn experiment(inst: &Instance) -> Self {
        Self {
            c: 5.0,
            eta: 0.01 / (inst.horizon() as f64).sqrt(),
            g: gradient_bound(inst),
        }
    }

    pub fn balanced_eta(m: usize, c: f64, g: f64, horizon: usize) -> f64 {
        let c1 = (2.0 * m as f64).ln();
        let c2 = c * c * g * g / 2.0;
        (c1 / (c2 * horizon as f64)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    mu_plus: DVector<f64>,
    mu_minus: DVector<f64>,
    c: f64,
    eta: f64,
    t: usize,
}

impl DualState {
    /// `μ⁺ = μ⁻ = (C/M, …, C/M)`, so `μ = 0` with total mass `2C`.
    pub fn new(m: usize, c: f64, eta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "need at least one resource"));
        }
        DualConfig::new(c, eta, 0.0)?;
        let w = DVector::from_element(m, c / m as f64);
        Ok(Self {
            mu_plus: w.clone(),
            mu_minus: w,
            c,
            eta,
            t: 0,
        })
    }

    pub fn from_config(m: usize, cfg: &DualConfig) -> Result<Self> {
        Self::new(m, cfg.c, cfg.eta)
    }

    pub fn mu(&self) -> DVector<f64> {
        &self.mu_plus - &self.mu_minus
    }

    pub fn mu_plus(&self) -> &DVector<f64> {
        &self.mu_plus
    }

    pub fn mu_minus(&self) -> &DVector<f64> {
        &self.mu_minus
    }

    pub fn mass(&self) -> f64 {
        self.mu_plus.sum() + self.mu_minus.sum()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// One EG± step against the gradient `g`.
    pub fn update(&mut self, g: &DVector<f64>) -> Result<()> {
        let m = self.mu_plus.len();
        if g.len() != m {
            return Err(Error::Dimension(format!("gradient has length {}, expected {m}", g.len())));
        }
        let step = self.eta * self.c;
        let mut logs = Vec::with_capacity(2 * m);
        for i in 0..m {
            logs.push(self.mu_plus[i].ln() - step * g[i]);
        }
        for i in 0..m {
            logs.push(self.mu_minus[i].ln() + step * g[i]);
        }
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::Contract("EG± weights have no mass".into()));
        }
        for x in logs.iter_mut() {
            *x = (*x - shift).exp();
        }
        let total: f64 = logs.iter().sum();
        for i in 0..m {
            self.mu_plus[i] = self.c * logs[i] / total;
            self.mu_minus[i] = self.c * logs[m + i] / total;
        }
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`DualState::update`].
pub fn eg_pm_update(state: &DualState, g: &DVector<f64>) -> Result<DualState> {
    let mut next = state.clone();
    next.update(g)?;
    Ok(next)
}

/// `−A·Ď(p) + s`.
pub fn estimated_subgradient(d_check: &DVector<f64>, a: &DMatrix<f64>, s: &DVector<f64>) -> DVector<f64> {
    s - a * d_check
}

/// Integer lattice of the ℓ₁ ball scaled to radius `c`, with `k` steps per
/// half-axis. Contains every signed corner `±C·e_i`.
pub fn l1_ball_grid(m: usize, c: f64, k: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    let mut coords = vec![0i64; m];
    fn rec(i: usize, left: i64, coords: &mut Vec<i64>, c: f64, k: usize, out: &mut Vec<DVector<f64>>) {
        if i == coords.len() {
            out.push(DVector::from_iterator(coords.len(), coords.iter().map(|&z| c * z as f64 / k as f64)));
            return;
        }
        for z in -left..=left {
            coords[i] = z;
            rec(i + 1, left - z.abs(), coords, c, k, out);
        }
    }
    rec(0, k as i64, &mut coords, c, k, &mut out);
    out
}

/// Largest regret `Σ⟨μ_t − μ, g_t⟩` of EG± over the benchmark set.
pub fn online_regret_check(gs: &[DVector<f64>], benchmarks: &[DVector<f64>], c: f64, eta: f64) -> Result<f64> {
    let Some(first) = gs.first() else {
        return Ok(0.0);
    };
    let m = first.len();
    let mut state = DualState::new(m, c, eta)?;
    let mut learner = 0.0;
    let mut total = DVector::zeros(m);
    for g in gs {
        learner += state.mu().dot(g);
        total += g;
        state.update(g)?;
    }
    let best = benchmarks
        .iter()
        .map(|mu| mu.dot(&total))
        .fold(f64::INFINITY, f64::min);
    Ok(learner - best)
}
