//! Demand learning: ridge regression on `(p, 1) ↦ d`, ∞-norm confidence
//! radii, and the projection of the fit onto a bounded set of parameters
//! with negative-semidefinite price sensitivity.
//!
//! Parameters are kept as the `N×(N+1)` block `[B | α]` so that
//! `D(p) = [B | α]·(p, 1)`.

use nalgebra::{DMatrix, DVector};

use crate::ellipsoid::{find_feasible, Cut, EllipsoidOutcome, EllipsoidProblem};
use crate::error::{Error, Result};
use crate::linalg::{augment, forward_substitute, inf_norm_vec, max_eigen_of_symmetrized};

/// `2·sqrt(2 d̄² (N+1) ln(N T (1 + p̄² T)) + 2 (N+1) L_B²)`.
pub fn kappa_value(n: usize, horizon: usize, d_bar: f64, row_bound: f64, p_bar: f64) -> f64 {
    let n1 = (n + 1) as f64;
    let t = horizon as f64;
    let log_term = (n as f64 * t * (1.0 + p_bar * p_bar * t)).ln().max(0.0);
    2.0 * (2.0 * d_bar * d_bar * n1 * log_term + 2.0 * n1 * row_bound * row_bound).sqrt()
}

/// Ridge solution and information matrix from scratch.
///
/// Returns `([B̂ | α̂], Λ)` with `Λ = w·I + Σ p̃ p̃ᵀ`.
pub fn rls_fit(history: &[(DVector<f64>, DVector<f64>)], n: usize, reg_weight: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut lambda = DMatrix::identity(n + 1, n + 1) * reg_weight;
    let mut xty = DMatrix::zeros(n + 1, n);
    for (p, d) in history {
        let pt = augment(p);
        lambda.ger(1.0, &pt, &pt, 1.0);
        xty.ger(1.0, &pt, d, 1.0);
    }
    let chol = lambda.clone().cholesky().expect("ridge information matrix is positive definite");
    let bhat = chol.solve(&xty).transpose();
    (bhat, lambda)
}

/// Which constraint of the parameter set a query violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Row `i` is farther than `κ` from the ridge fit in the `Λ`-norm.
    Confidence { row: usize },
    /// Row `i` (including the intercept) exceeds `2 L_B` in Euclidean norm.
    RowNorm { row: usize },
    /// The symmetric part of the square block has a positive eigenvalue.
    NotNegativeSemidefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Inside,
    Violated { normal: DMatrix<f64>, which: Violation },
}

/// How the checked parameters of the current period were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Ellipsoid { iterations: usize },
    Fallback { iterations: usize },
}

/// `Δ^D`, `Δ^r` and `Δ^f` at one price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceRadii {
    pub delta_d: f64,
    pub delta_r: f64,
    pub delta_f: f64,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    n: usize,
    lambda: DMatrix<f64>,
    /// Lower Cholesky factor `L` of `Λ`.
    chol: DMatrix<f64>,
    /// `L⁻¹`; the whitening map used for the ∞-norm radii.
    chol_inv: DMatrix<f64>,
    xty: DMatrix<f64>,
    bhat: DMatrix<f64>,
    bcheck: DMatrix<f64>,
    kappa: f64,
    reg_weight: f64,
    history_count: usize,
}

impl EstimatorState {
    pub fn new(n: usize, reg_weight: f64, kappa: f64) -> Result<Self> {
        if !(reg_weight > 0.0) {
            return Err(Error::param("reg_weight", "must be positive"));
        }
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", "must be positive"));
        }
        let mut s = Self {
            n,
            lambda: DMatrix::identity(n + 1, n + 1) * reg_weight,
            chol: DMatrix::zeros(n + 1, n + 1),
            chol_inv: DMatrix::zeros(n + 1, n + 1),
            xty: DMatrix::zeros(n + 1, n),
            bhat: DMatrix::zeros(n, n + 1),
            bcheck: DMatrix::zeros(n, n + 1),
            kappa,
            reg_weight,
            history_count: 0,
        };
        s.refresh();
        Ok(s)
    }

    /// Adds one observation: rank-1 update of `Λ`, Cholesky refresh, refit.
    pub fn observe(&mut self, p: &DVector<f64>, d: &DVector<f64>) {
        assert_eq!(p.len(), self.n);
        assert_eq!(d.len(), self.n);
        let pt = augment(p);
        self.lambda.ger(1.0, &pt, &pt, 1.0);
        self.xty.ger(1.0, &pt, d, 1.0);
        self.history_count += 1;
        self.refresh();
    }

    fn refresh(&mut self) {
        let chol = self
            .lambda
            .clone()
            .cholesky()
            .expect("ridge information matrix is positive definite");
        self.bhat = chol.solve(&self.xty).transpose();
        self.chol = chol.unpack();
        let n1 = self.n + 1;
        self.chol_inv = DMatrix::zeros(n1, n1);
        for j in 0..n1 {
            let mut e = DVector::zeros(n1);
            e[j] = 1.0;
            self.chol_inv.set_column(j, &forward_substitute(&self.chol, &e));
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn bhat(&self) -> &DMatrix<f64> {
        &self.bhat
    }

    pub fn bcheck(&self) -> &DMatrix<f64> {
        &self.bcheck
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn reg_weight(&self) -> f64 {
        self.reg_weight
    }

    pub fn history_count(&self) -> usize {
        self.history_count
    }

    /// `L⁻¹` where `Λ = L Lᵀ`.
    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.chol_inv
    }

    /// `L⁻¹ p̃`; its ∞-norm drives every confidence radius.
    pub fn whiten(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.chol_inv * augment(p)
    }

    /// Demand predicted by the checked parameters.
    pub fn checked_demand(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.bcheck * augment(p)
    }

    pub fn fitted_demand(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.bhat * augment(p)
    }

    pub fn confidence_radii(&self, p: &DVector<f64>, mu_l1: f64, a_inf_norm: f64, p_bar: f64) -> ConfidenceRadii {
        let n = self.n as f64;
        let delta_d = (n + 1.0).sqrt() * self.kappa * inf_norm_vec(&self.whiten(p));
        let delta_r = n * p_bar * delta_d;
        ConfidenceRadii {
            delta_d,
            delta_r,
            delta_f: delta_r + mu_l1 * a_inf_norm * delta_d,
        }
    }

    /// Membership test for the checked-parameter set, returning a separating
    /// hyperplane (as an `N×(N+1)` normal) for the first violated constraint.
    pub fn separation_oracle(&self, query: &DMatrix<f64>, row_bound: f64) -> SeparationResult {
        let n = self.n;
        assert_eq!(query.shape(), (n, n + 1), "query must be N×(N+1)");

        for i in 0..n {
            let diff = (query.row(i) - self.bhat.row(i)).transpose();
            let lv = &self.lambda * &diff;
            let dist2 = diff.dot(&lv);
            if dist2 > self.kappa * self.kappa {
                let mut normal = DMatrix::zeros(n, n + 1);
                normal.set_row(i, &(lv / dist2.sqrt()).transpose());
                return SeparationResult::Violated {
                    normal,
                    which: Violation::Confidence { row: i },
                };
            }
        }

        for i in 0..n {
            let row = query.row(i);
            let norm = row.norm();
            if norm > 2.0 * row_bound {
                let mut normal = DMatrix::zeros(n, n + 1);
                normal.set_row(i, &(row / norm));
                return SeparationResult::Violated {
                    normal,
                    which: Violation::RowNorm { row: i },
                };
            }
        }

        let square = query.columns(0, n).into_owned();
        let (lmax, c) = max_eigen_of_symmetrized(&square);
        if lmax > 0.0 {
            let mut normal = DMatrix::zeros(n, n + 1);
            normal.view_mut((0, 0), (n, n)).copy_from(&(&c * c.transpose()));
            return SeparationResult::Violated {
                normal,
                which: Violation::NotNegativeSemidefinite,
            };
        }
        SeparationResult::Inside
    }

    /// Finds checked parameters near the ridge fit with the ellipsoid method
    /// (outer radius `κ√N`, inner radius `T⁻⁴`). When the search fails the
    /// state falls back to `B̌ = 0` and `α̌ = α̂` clamped to `[−2L_B, 2L_B]`.
    pub fn solve_mt(&mut self, row_bound: f64, horizon: usize) -> CheckOutcome {
        let n = self.n;
        let outer = self.kappa * (n as f64).sqrt();
        let inner = (horizon as f64).powi(-4);
        let center = flatten(&self.bhat);
        let problem = EllipsoidProblem::new(center, outer, inner, |x: &DVector<f64>| {
            match self.separation_oracle(&unflatten(x, n), row_bound) {
                SeparationResult::Inside => Cut::Inside,
                SeparationResult::Violated { normal, .. } => Cut::Violated(flatten(&normal)),
            }
        });
        match find_feasible(problem) {
            EllipsoidOutcome::Feasible { point, iterations } => {
                self.bcheck = unflatten(&point, n);
                CheckOutcome::Ellipsoid { iterations }
            }
            EllipsoidOutcome::Infeasible { iterations, .. } => {
                let mut fallback = DMatrix::zeros(n, n + 1);
                let cap = 2.0 * row_bound;
                for i in 0..n {
                    fallback[(i, n)] = self.bhat[(i, n)].clamp(-cap, cap);
                }
                self.bcheck = fallback;
                CheckOutcome::Fallback { iterations }
            }
        }
    }

    /// Overrides the checked parameters; used by tests and diagnostics.
    pub fn set_bcheck(&mut self, bcheck: DMatrix<f64>) {
        assert_eq!(bcheck.shape(), (self.n, self.n + 1));
        self.bcheck = bcheck;
    }
}

/// Row-major flattening of an `N×(N+1)` block.
pub fn flatten(block: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = block.shape();
    DVector::from_fn(r * c, |k, _| block[(k / c, k % c)])
}

pub fn unflatten(x: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n + 1, |i, j| x[i * (n + 1) + j])
}
