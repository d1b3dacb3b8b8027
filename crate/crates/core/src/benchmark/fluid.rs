//! The deterministic fluid relaxation
//! `max_p r(p) + φ(A D(p))  s.t.  A D(p) ≤ γ` over the price box.

use nalgebra::{DMatrix, DVector};

use crate::env::{Instance, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::inf_norm_mat;
use crate::regularizers::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluidMethod {
    /// Exhaustive grid plus one local refinement; practical for `N ≤ 3`.
    #[default]
    Grid,
    /// Projected supergradient ascent on an exact-penalty objective.
    Subgradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub p_star: DVector<f64>,
    /// `r(p*) + φ(A D(p*))`.
    pub j_d_per_period: f64,
    /// Resources with `[A D(p*)]_i` within tolerance of `γ_i`.
    pub binding: Vec<usize>,
}

/// Objective and resource use of the fluid problem at one price.
#[derive(Debug, Clone)]
pub struct FluidProblem<'a> {
    pub params: &'a ModelParams,
    pub a: &'a DMatrix<f64>,
    pub gamma: &'a DVector<f64>,
    pub reg: &'a Regularizer,
    pub lo: f64,
    pub hi: f64,
}

impl<'a> FluidProblem<'a> {
    pub fn from_instance(inst: &'a Instance, reg: &'a Regularizer) -> Self {
        Self {
            params: inst.params(),
            a: inst.a(),
            gamma: inst.gamma(),
            reg,
            lo: inst.price_lo(),
            hi: inst.price_hi(),
        }
    }

    pub fn consumption(&self, p: &DVector<f64>) -> DVector<f64> {
        self.a * self.params.expected_demand(p)
    }

    pub fn objective(&self, p: &DVector<f64>) -> f64 {
        self.params.expected_revenue(p) + self.reg.eval(&self.consumption(p))
    }

    pub fn is_feasible(&self, p: &DVector<f64>, tol: f64) -> bool {
        self.consumption(p)
            .iter()
            .zip(self.gamma.iter())
            .all(|(s, g)| *s <= g + tol)
    }

    /// Worst-case change of `A D(p)` across one grid cell.
    fn binding_tol(&self, step: f64) -> f64 {
        2.0 * inf_norm_mat(&(self.a * self.params.b())) * step + 1e-9
    }

    fn solution(&self, p: DVector<f64>, step: f64) -> FluidSolution {
        let tol = self.binding_tol(step);
        let used = self.consumption(&p);
        let binding = (0..self.gamma.len())
            .filter(|&i| self.gamma[i] - used[i] <= tol)
            .collect();
        FluidSolution {
            j_d_per_period: self.objective(&p),
            p_star: p,
            binding,
        }
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let x = lo + k as f64 * step;
        if x >= hi - 1e-12 * step {
            break;
        }
        out.push(x);
        k += 1;
    }
    out.push(hi);
    out
}

/// Best feasible point of the tensor grid spanned by `axes`. Ties keep the
/// first point in lexicographic order.
fn grid_search(prob: &FluidProblem, axes: &[Vec<f64>]) -> Option<(DVector<f64>, f64)> {
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut p = DVector::from_fn(n, |i, _| axes[i][0]);
    let mut best: Option<(DVector<f64>, f64)> = None;
    loop {
        if prob.is_feasible(&p, 0.0) {
            let v = prob.objective(&p);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((p.clone(), v));
            }
        }
        let mut d = n;
        loop {
            if d == 0 {
                return best;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                p[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = axes[d][0];
        }
    }
}

/// Grid search at `resolution`, then one pass at `resolution/10` within
/// `±resolution` of the incumbent.
pub fn solve_grid(prob: &FluidProblem, resolution: f64) -> Result<FluidSolution> {
    if !(resolution > 0.0) {
        return Err(Error::param("fluid_resolution", "must be positive"));
    }
    if !(prob.lo <= prob.hi) {
        return Err(Error::param("price box", "lower bound exceeds upper bound"));
    }
    let n = prob.params.n();
    let coarse: Vec<Vec<f64>> = (0..n).map(|_| axis(prob.lo, prob.hi, resolution)).collect();
    let Some((p0, _)) = grid_search(prob, &coarse) else {
        return Err(Error::Infeasible(format!(
            "no price on the {resolution} grid satisfies A D(p) ≤ γ"
        )));
    };
    let fine_step = resolution / 10.0;
    let fine: Vec<Vec<f64>> = (0..n)
        .map(|i| axis((p0[i] - resolution).max(prob.lo), (p0[i] + resolution).min(prob.hi), fine_step))
        .collect();
    let (p, _) = grid_search(prob, &fine).expect("refinement window contains the incumbent");
    Ok(prob.solution(p, fine_step))
}

/// Projected supergradient ascent on `r(p) + φ(A D(p)) − ρ‖(A D(p) − γ)₊‖₁`
/// with normalized steps of length `(p̄ − p̲)/(2√k)`, keeping the best
/// feasible iterate.
pub fn solve_subgradient(prob: &FluidProblem, iterations: usize) -> Result<FluidSolution> {
    let n = prob.params.n();
    let b = prob.params.b();
    let alpha = prob.params.alpha();
    let ab = prob.a * b;
    let width = prob.hi - prob.lo;
    let rho = 10.0 * (prob.hi * (alpha.amax() + b.amax() * prob.hi * n as f64) + 1.0);
    let feas_tol = 1e-6;

    let mut p = DVector::from_element(n, 0.5 * (prob.lo + prob.hi));
    let mut best: Option<(DVector<f64>, f64)> = None;
    for k in 1..=iterations {
        let used = prob.consumption(&p);
        if prob.is_feasible(&p, feas_tol) {
            let v = prob.objective(&p);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((p.clone(), v));
            }
        }
        let mut g_s = prob.reg.supergradient(&used);
        for i in 0..used.len() {
            if used[i] > prob.gamma[i] {
                g_s[i] -= rho;
            }
        }
        let grad = alpha + (b + b.transpose()) * &p + ab.tr_mul(&g_s);
        let norm = grad.norm();
        if norm == 0.0 {
            break;
        }
        p += grad * (0.5 * width / (k as f64).sqrt() / norm);
        p.apply(|x| *x = x.clamp(prob.lo, prob.hi));
    }
    let Some((p, _)) = best else {
        return Err(Error::Infeasible("no feasible iterate found".into()));
    };
    Ok(prob.solution(p, 1e-6))
}

pub fn solve_fluid(inst: &Instance, reg: &Regularizer, resolution: f64) -> Result<FluidSolution> {
    solve_fluid_with(inst, reg, resolution, FluidMethod::Grid)
}

pub fn solve_fluid_with(
    inst: &Instance,
    reg: &Regularizer,
    resolution: f64,
    method: FluidMethod,
) -> Result<FluidSolution> {
    if reg.dim() != inst.m() {
        return Err(Error::Dimension("regularizer and instance disagree on M".into()));
    }
    let prob = FluidProblem::from_instance(inst, reg);
    match method {
        FluidMethod::Grid => {
            if inst.n() > 3 {
                return Err(Error::Contract(format!(
                    "grid fluid solver supports N ≤ 3, got N = {}",
                    inst.n()
                )));
            }
            solve_grid(&prob, resolution)
        }
        FluidMethod::Subgradient => solve_subgradient(&prob, 20_000),
    }
}
