//! Fairness regularizers applied to the average resource-consumption vector.
//!
//! Every variant is concave, bounded on `[0, γ]` and Lipschitz in the
//! ∞-norm. Besides evaluation, the primal step needs the conjugate-type
//! maximization `max_{-γ ≤ s ≤ γ} φ(s) + μ·s`, which each variant solves in
//! closed form through its epigraph reformulation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A fairness regularizer `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// `λ · min_i w_i s_i`
    WeightedMaxMin { lambda: f64, w: DVector<f64> },
    /// `λ · min_k (U (w ∘ s))_k` with a 0-1 grouping matrix `U` (K×M).
    GroupMaxMin {
        lambda: f64,
        w: DVector<f64>,
        groups: DMatrix<f64>,
    },
    /// `λ · (min_i w_i s_i − max_i w_i s_i + max_i w_i γ_i)`
    RangeFairness {
        lambda: f64,
        w: DVector<f64>,
        gamma_ref: DVector<f64>,
    },
    /// `λ · min_i (γ_i − s_i) / γ_i`
    LoadBalancing { lambda: f64, gamma_ref: DVector<f64> },
}

/// Lipschitz constant (∞-norm) and upper bound of a regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerMeta {
    pub lipschitz: f64,
    pub phi_bar: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", "must be finite and ≥ 0"));
    }
    Ok(())
}

fn check_positive(field: &str, v: &DVector<f64>) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::param(field, "entries must be finite and positive"));
    }
    Ok(())
}

impl Regularizer {
    pub fn weighted_max_min(lambda: f64, w: DVector<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        check_positive("w", &w)?;
        Ok(Self::WeightedMaxMin { lambda, w })
    }

    /// Plain max-min fairness over `m` resources (`w = 1`).
    pub fn max_min(lambda: f64, m: usize) -> Result<Self> {
        Self::weighted_max_min(lambda, DVector::from_element(m, 1.0))
    }

    pub fn group_max_min(lambda: f64, w: DVector<f64>, groups: DMatrix<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        check_positive("w", &w)?;
        if groups.ncols() != w.len() {
            return Err(Error::Dimension(format!(
                "grouping matrix has {} columns, expected {}",
                groups.ncols(),
                w.len()
            )));
        }
        if groups.iter().any(|x| *x != 0.0 && *x != 1.0) {
            return Err(Error::param("U", "must be a 0-1 matrix"));
        }
        for (j, col) in groups.column_iter().enumerate() {
            if col.iter().filter(|x| **x != 0.0).count() != 1 {
                return Err(Error::param(
                    "U",
                    format!("column {j} must have exactly one nonzero entry"),
                ));
            }
        }
        for (k, row) in groups.row_iter().enumerate() {
            if row.iter().all(|x| *x == 0.0) {
                return Err(Error::param("U", format!("row {k} has no nonzero entry")));
            }
        }
        Ok(Self::GroupMaxMin { lambda, w, groups })
    }

    pub fn range_fairness(lambda: f64, w: DVector<f64>, gamma_ref: DVector<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        check_positive("w", &w)?;
        check_positive("gamma_ref", &gamma_ref)?;
        if w.len() != gamma_ref.len() {
            return Err(Error::Dimension("w and gamma_ref lengths differ".into()));
        }
        Ok(Self::RangeFairness { lambda, w, gamma_ref })
    }

    pub fn load_balancing(lambda: f64, gamma_ref: DVector<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        check_positive("gamma_ref", &gamma_ref)?;
        Ok(Self::LoadBalancing { lambda, gamma_ref })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WeightedMaxMin { .. } => "weighted_max_min",
            Self::GroupMaxMin { .. } => "group_max_min",
            Self::RangeFairness { .. } => "range_fairness",
            Self::LoadBalancing { .. } => "load_balancing",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Self::WeightedMaxMin { lambda, .. }
            | Self::GroupMaxMin { lambda, .. }
            | Self::RangeFairness { lambda, .. }
            | Self::LoadBalancing { lambda, .. } => *lambda,
        }
    }

    /// Same regularizer with a different `λ`.
    pub fn with_lambda(&self, new: f64) -> Result<Self> {
        check_lambda(new)?;
        let mut out = self.clone();
        match &mut out {
            Self::WeightedMaxMin { lambda, .. }
            | Self::GroupMaxMin { lambda, .. }
            | Self::RangeFairness { lambda, .. }
            | Self::LoadBalancing { lambda, .. } => *lambda = new,
        }
        Ok(out)
    }

    /// Number of resources the regularizer expects.
    pub fn dim(&self) -> usize {
        match self {
            Self::WeightedMaxMin { w, .. }
            | Self::GroupMaxMin { w, .. }
            | Self::RangeFairness { w, .. } => w.len(),
            Self::LoadBalancing { gamma_ref, .. } => gamma_ref.len(),
        }
    }

    /// `φ(s)`. Total on all of `ℝ^M`.
    pub fn eval(&self, s: &DVector<f64>) -> f64 {
        assert_eq!(s.len(), self.dim(), "regularizer argument has wrong length");
        match self {
            Self::WeightedMaxMin { lambda, w } => {
                lambda * s.iter().zip(w.iter()).map(|(s, w)| w * s).fold(f64::INFINITY, f64::min)
            }
            Self::GroupMaxMin { lambda, w, groups } => {
                let ws = s.component_mul(w);
                lambda * (groups * ws).iter().copied().fold(f64::INFINITY, f64::min)
            }
            Self::RangeFairness { lambda, w, gamma_ref } => {
                let ws = s.component_mul(w);
                let top = w.component_mul(gamma_ref).max();
                lambda * (ws.min() - ws.max() + top)
            }
            Self::LoadBalancing { lambda, gamma_ref } => {
                lambda
                    * s.iter()
                        .zip(gamma_ref.iter())
                        .map(|(s, g)| (g - s) / g)
                        .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// One supergradient of `φ` at `s` (the active piece with the lowest index).
    pub fn supergradient(&self, s: &DVector<f64>) -> DVector<f64> {
        let m = self.dim();
        assert_eq!(s.len(), m, "regularizer argument has wrong length");
        let argmin = |v: &DVector<f64>| v.iter().enumerate().fold(0, |k, (i, x)| if *x < v[k] { i } else { k });
        let argmax = |v: &DVector<f64>| v.iter().enumerate().fold(0, |k, (i, x)| if *x > v[k] { i } else { k });
        let mut g = DVector::zeros(m);
        match self {
            Self::WeightedMaxMin { lambda, w } => {
                let k = argmin(&s.component_mul(w));
                g[k] = lambda * w[k];
            }
            Self::GroupMaxMin { lambda, w, groups } => {
                let k = argmin(&(groups * s.component_mul(w)));
                g = groups.row(k).transpose().component_mul(w) * *lambda;
            }
            Self::RangeFairness { lambda, w, .. } => {
                let ws = s.component_mul(w);
                let (lo, hi) = (argmin(&ws), argmax(&ws));
                g[lo] += lambda * w[lo];
                g[hi] -= lambda * w[hi];
            }
            Self::LoadBalancing { lambda, gamma_ref } => {
                let slack = DVector::from_fn(m, |i, _| (gamma_ref[i] - s[i]) / gamma_ref[i]);
                let k = argmin(&slack);
                g[k] = -lambda / gamma_ref[k];
            }
        }
        g
    }

    /// Lipschitz constant and the bound `φ̄` over `0 ≤ s ≤ γ`.
    pub fn metadata(&self, gamma: &DVector<f64>) -> RegularizerMeta {
        match self {
            Self::WeightedMaxMin { lambda, w } => RegularizerMeta {
                lipschitz: lambda * w.max(),
                phi_bar: lambda * w.component_mul(gamma).max(),
            },
            Self::GroupMaxMin { lambda, w, groups } => {
                let row_sum = groups
                    .row_iter()
                    .map(|r| r.iter().sum::<f64>())
                    .fold(0.0_f64, f64::max);
                RegularizerMeta {
                    lipschitz: lambda * row_sum * w.max(),
                    phi_bar: lambda * (groups * w.component_mul(gamma)).max(),
                }
            }
            Self::RangeFairness { lambda, w, gamma_ref } => RegularizerMeta {
                lipschitz: 2.0 * lambda * w.max(),
                phi_bar: lambda * w.component_mul(gamma_ref).max(),
            },
            Self::LoadBalancing { lambda, gamma_ref } => RegularizerMeta {
                lipschitz: lambda / gamma_ref.min(),
                phi_bar: *lambda,
            },
        }
    }

    /// Maximizer and maximum of `φ(s) + μ·s` over `−γ ≤ s ≤ γ`.
    ///
    /// Each variant is an LP in `s` plus one or two epigraph scalars; the
    /// optimum sits at a breakpoint of the piecewise-linear value function of
    /// those scalars, so we enumerate breakpoints and keep the best.
    pub fn conjugate_argmax(&self, mu: &DVector<f64>, gamma: &DVector<f64>) -> (DVector<f64>, f64) {
        let m = self.dim();
        assert_eq!(mu.len(), m, "mu has wrong length");
        assert_eq!(gamma.len(), m, "gamma has wrong length");
        match self {
            Self::WeightedMaxMin { w, .. } => {
                let groups: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
                self.best_of(mu, group_candidates(&groups, w, mu, gamma))
            }
            Self::GroupMaxMin { w, groups, .. } => {
                let groups: Vec<Vec<usize>> = groups
                    .row_iter()
                    .map(|r| (0..m).filter(|&j| r[j] != 0.0).collect())
                    .collect();
                self.best_of(mu, group_candidates(&groups, w, mu, gamma))
            }
            Self::RangeFairness { w, .. } => self.best_of(mu, range_candidates(w, mu, gamma)),
            Self::LoadBalancing { gamma_ref, .. } => {
                self.best_of(mu, load_candidates(gamma_ref, mu, gamma))
            }
        }
    }

    fn best_of(&self, mu: &DVector<f64>, candidates: Vec<DVector<f64>>) -> (DVector<f64>, f64) {
        let mut best: Option<(DVector<f64>, f64)> = None;
        for s in candidates {
            let value = self.eval(&s) + mu.dot(&s);
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((s, value));
            }
        }
        best.expect("candidate set is never empty")
    }
}

/// Candidates for min-over-groups regularizers. For an epigraph level `t`,
/// each group must reach `Σ_{i∈G} w_i s_i ≥ t`; the cheapest way is a
/// fractional knapsack raising negative-price coordinates in order of
/// `|μ_i| / w_i`.
fn group_candidates(
    groups: &[Vec<usize>],
    w: &DVector<f64>,
    mu: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let m = w.len();
    let base = DVector::from_fn(m, |i, _| if mu[i] >= 0.0 { gamma[i] } else { -gamma[i] });

    let mut levels = Vec::new();
    let mut orders = Vec::with_capacity(groups.len());
    let mut t_hi = f64::INFINITY;
    for g in groups {
        let mut order: Vec<usize> = g.iter().copied().filter(|&i| mu[i] < 0.0).collect();
        order.sort_by(|&a, &b| (-mu[a] / w[a]).total_cmp(&(-mu[b] / w[b])));
        let mut level: f64 = g.iter().map(|&i| w[i] * base[i]).sum();
        levels.push(level);
        for &i in &order {
            level += 2.0 * w[i] * gamma[i];
            levels.push(level);
        }
        t_hi = t_hi.min(g.iter().map(|&i| w[i] * gamma[i]).sum());
        orders.push(order);
    }
    levels.push(t_hi);

    levels
        .into_iter()
        .filter(|t| *t <= t_hi)
        .map(|t| {
            let mut s = base.clone();
            for (g, order) in groups.iter().zip(&orders) {
                let mut need = t - g.iter().map(|&i| w[i] * s[i]).sum::<f64>();
                for &i in order {
                    if need <= 0.0 {
                        break;
                    }
                    let step = (need / w[i]).min(2.0 * gamma[i]);
                    s[i] += step;
                    need -= step * w[i];
                }
            }
            s
        })
        .collect()
}

/// Candidates for the range regularizer: lower/upper epigraph levels
/// `t ≤ w_i s_i ≤ u` drawn from the breakpoints `±w_i γ_i`.
fn range_candidates(w: &DVector<f64>, mu: &DVector<f64>, gamma: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = w.len();
    let wg = w.component_mul(gamma);
    let t_hi = wg.min();
    let u_lo = -wg.max();
    let mut points: Vec<f64> = wg.iter().flat_map(|x| [-*x, *x]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut out = Vec::new();
    for &t in &points {
        if t > t_hi {
            continue;
        }
        for &u in &points {
            if u < t || u < u_lo {
                continue;
            }
            out.push(DVector::from_fn(m, |i, _| {
                if mu[i] >= 0.0 {
                    (u / w[i]).clamp(-gamma[i], gamma[i])
                } else {
                    (-gamma[i]).max(t / w[i])
                }
            }));
        }
    }
    out
}

/// Candidates for load balancing: `t ≤ 1 − s_i/γref_i`, breakpoints where
/// `γref_i (1 − t)` crosses `γ_i`.
fn load_candidates(
    gamma_ref: &DVector<f64>,
    mu: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let m = gamma.len();
    let t_hi = (0..m)
        .map(|i| 1.0 + gamma[i] / gamma_ref[i])
        .fold(f64::INFINITY, f64::min);
    let mut levels: Vec<f64> = (0..m)
        .filter(|&i| mu[i] >= 0.0)
        .map(|i| 1.0 - gamma[i] / gamma_ref[i])
        .filter(|t| *t <= t_hi)
        .collect();
    levels.push(t_hi);
    levels
        .into_iter()
        .map(|t| {
            DVector::from_fn(m, |i, _| {
                if mu[i] >= 0.0 {
                    gamma[i].min(gamma_ref[i] * (1.0 - t))
                } else {
                    -gamma[i]
                }
            })
        })
        .collect()
}

/// Exhaustive grid maximum of `φ(s) + μ·s` over the box `[−γ, γ]`.
///
/// Each axis is sampled at `−γ_i + k·resolution` plus the endpoint `γ_i`.
/// Intended as a brute-force reference; refuses more than four resources.
pub fn grid_conjugate_oracle(
    reg: &Regularizer,
    mu: &DVector<f64>,
    gamma: &DVector<f64>,
    resolution: f64,
) -> Result<f64> {
    let m = gamma.len();
    if m > 4 {
        return Err(Error::Contract(format!(
            "grid oracle supports at most 4 resources, got {m}"
        )));
    }
    if !(resolution > 0.0) {
        return Err(Error::Contract("resolution must be positive".into()));
    }
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut axis = Vec::new();
            let mut k = 0usize;
            loop {
                let x = -gamma[i] + k as f64 * resolution;
                if x >= gamma[i] {
                    break;
                }
                axis.push(x);
                k += 1;
            }
            axis.push(gamma[i]);
            axis
        })
        .collect();

    let mut idx = vec![0usize; m];
    let mut s = DVector::from_fn(m, |i, _| axes[i][0]);
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(reg.eval(&s) + mu.dot(&s));
        let mut d = 0;
        loop {
            if d == m {
                return Ok(best);
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                s[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            s[d] = axes[d][0];
            d += 1;
        }
    }
}
