//! Optimistic price selection.
//!
//! The ∞-norm exploration bonus `‖L⁻¹p̃‖∞ = max_{λ ∈ {±e_j}} λᵀL⁻¹p̃` turns
//! the optimistic objective into a maximum of `2(N+1)` concave quadratics
//! over the price box. Each piece is solved as a box-constrained QP and the
//! best candidate under the full objective wins.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::EstimatorState;
use crate::linalg::{augment, inf_norm_vec, max_eigen_of_symmetrized};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// `max_{lo ≤ p ≤ hi}  pᵀQp + c·p + a·(p, 1)` with `Q + Qᵀ ⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQp {
    pub q: DMatrix<f64>,
    pub c_lin: DVector<f64>,
    /// Applied to `(p, 1)`; the last entry is a constant offset.
    pub affine: DVector<f64>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub p: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

impl BoxQp {
    pub fn dim(&self) -> usize {
        self.c_lin.len()
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        let n = self.dim();
        p.dot(&(&self.q * p)) + self.c_lin.dot(p) + self.affine.rows(0, n).dot(p) + self.affine[n]
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        &self.q * p + self.q.tr_mul(p) + &self.c_lin + self.affine.rows(0, n)
    }

    fn project(&self, p: &mut DVector<f64>) {
        p.apply(|x| *x = x.clamp(self.lo, self.hi));
    }
}

/// Projected gradient ascent with backtracking and an active-set Newton
/// polish. Stops when the projected gradient `proj(p + ∇f) − p` has norm
/// below `tol`.
pub fn maximize_box_qp(
    qp: &BoxQp,
    start: Option<&DVector<f64>>,
    tol: f64,
    max_iters: usize,
) -> Result<QpSolution> {
    let n = qp.dim();
    if qp.q.shape() != (n, n) || qp.affine.len() != n + 1 {
        return Err(Error::Dimension("BoxQp shapes disagree".into()));
    }
    if !(qp.lo <= qp.hi) {
        return Err(Error::Contract("empty price box".into()));
    }
    let hess = &qp.q + qp.q.transpose();
    let (lmax, _) = max_eigen_of_symmetrized(&qp.q);
    if lmax > tol.max(1e-10) * (1.0 + qp.q.norm()) {
        return Err(Error::Contract(format!(
            "BoxQp objective is not concave (largest eigenvalue of Q+Qᵀ is {lmax})"
        )));
    }

    let mut p = match start {
        Some(s) if s.len() == n => s.clone(),
        _ => DVector::from_element(n, 0.5 * (qp.lo + qp.hi)),
    };
    qp.project(&mut p);
    let mut f = qp.value(&p);
    let mut step = 1.0 / (2.0 * qp.q.norm() + qp.affine.norm() + 1.0);

    for iter in 0..max_iters {
        let g = qp.gradient(&p);
        let mut trial = &p + &g;
        qp.project(&mut trial);
        if (&trial - &p).norm() < tol {
            return Ok(QpSolution { p, value: f, iterations: iter });
        }

        // Backtracking on the projected step.
        let mut next;
        let mut f_next;
        loop {
            next = &p + &g * step;
            qp.project(&mut next);
            let d = &next - &p;
            f_next = qp.value(&next);
            if f_next >= f + g.dot(&d) - d.norm_squared() / (2.0 * step) || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }

        // Newton step on the coordinates that are free at `next`.
        let gn = qp.gradient(&next);
        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let x = next[i];
                (x > qp.lo && x < qp.hi) || (x <= qp.lo && gn[i] > 0.0) || (x >= qp.hi && gn[i] < 0.0)
            })
            .collect();
        if !free.is_empty() {
            let k = free.len();
            let neg_h = DMatrix::from_fn(k, k, |a, b| -hess[(free[a], free[b])]);
            if let Some(ch) = neg_h.cholesky() {
                let rhs = DVector::from_fn(k, |a, _| gn[free[a]]);
                let d = ch.solve(&rhs);
                let mut newton = next.clone();
                for (a, &i) in free.iter().enumerate() {
                    newton[i] += d[a];
                }
                qp.project(&mut newton);
                let f_newton = qp.value(&newton);
                if f_newton > f_next {
                    next = newton;
                    f_next = f_newton;
                }
            }
        }

        p = next;
        f = f_next;
        step *= 2.0;
    }
    Ok(QpSolution { p, value: f, iterations: max_iters })
}

/// The chosen price and the diagnostics of the selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceChoice {
    pub p: DVector<f64>,
    /// Optimistic objective `⟨p − Aᵀμ, Ď(p)⟩ + coeff·‖L⁻¹p̃‖∞` at `p`.
    pub objective: f64,
    /// Index into the direction list `+e_0, −e_0, +e_1, …`.
    pub direction: usize,
    /// All candidate prices, one per direction.
    pub candidates: Vec<DVector<f64>>,
}

/// Inputs of the optimistic objective that do not depend on the estimator
/// internals: checked block `[B̌ | α̌]`, whitening map `L⁻¹`, and the dual
/// price of each product `Aᵀμ`.
#[derive(Debug, Clone)]
pub struct OptimisticObjective<'a> {
    pub bcheck: &'a DMatrix<f64>,
    pub whitening: &'a DMatrix<f64>,
    pub dual_price: DVector<f64>,
    pub coeff: f64,
    pub lo: f64,
    pub hi: f64,
}

impl OptimisticObjective<'_> {
    fn n(&self) -> usize {
        self.bcheck.nrows()
    }

    /// `⟨p − Aᵀμ, Ď(p)⟩`.
    pub fn adjusted_reward(&self, p: &DVector<f64>) -> f64 {
        let d = self.bcheck * augment(p);
        (p - &self.dual_price).dot(&d)
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        self.adjusted_reward(p) + self.coeff * inf_norm_vec(&(self.whitening * augment(p)))
    }

    /// The concave piece for direction `sign·e_j`.
    pub fn piece(&self, j: usize, sign: f64) -> BoxQp {
        let n = self.n();
        let b = self.bcheck.columns(0, n).into_owned();
        let alpha = self.bcheck.column(n).into_owned();
        // ⟨p − π, α + Bp⟩ = pᵀBp + (α − Bᵀπ)·p − π·α
        let c_lin = &alpha - b.tr_mul(&self.dual_price);
        let mut affine = self.whitening.row(j).transpose() * (sign * self.coeff);
        affine[n] -= self.dual_price.dot(&alpha);
        BoxQp {
            q: b,
            c_lin,
            affine,
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn choose(&self, warm: Option<&DVector<f64>>, tol: f64, max_iters: usize) -> Result<PriceChoice> {
        let n = self.n();
        let mut best: Option<(usize, f64)> = None;
        let mut candidates = Vec::with_capacity(2 * (n + 1));
        for j in 0..=n {
            for sign in [1.0, -1.0] {
                let sol = maximize_box_qp(&self.piece(j, sign), warm, tol, max_iters)?;
                let value = self.value(&sol.p);
                let idx = candidates.len();
                if best.is_none_or(|(_, b)| value > b) {
                    best = Some((idx, value));
                }
                candidates.push(sol.p);
            }
        }
        let (direction, objective) = best.expect("at least two directions");
        Ok(PriceChoice {
            p: candidates[direction].clone(),
            objective,
            direction,
            candidates,
        })
    }
}

/// Optimistic price for the current period.
pub fn primal_price_update(
    est: &EstimatorState,
    mu: &DVector<f64>,
    a: &DMatrix<f64>,
    lo: f64,
    hi: f64,
    coeff: f64,
    warm: Option<&DVector<f64>>,
) -> Result<PriceChoice> {
    if !(coeff >= 0.0) {
        return Err(Error::Contract("UCB coefficient must be nonnegative".into()));
    }
    let objective = OptimisticObjective {
        bcheck: est.bcheck(),
        whitening: est.whitening(),
        dual_price: a.tr_mul(mu),
        coeff,
        lo,
        hi,
    };
    objective.choose(warm, DEFAULT_TOL, DEFAULT_MAX_ITERS)
}
