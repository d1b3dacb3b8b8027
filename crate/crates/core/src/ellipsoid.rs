//! Central-cut ellipsoid method for convex feasibility problems given by a
//! separation oracle.

use nalgebra::{DMatrix, DVector};

/// Answer of a separation oracle at a query point.
#[derive(Debug, Clone, PartialEq)]
pub enum Cut {
    Inside,
    /// Normal `c` with `c·x > c·y` for every feasible `y`.
    Violated(DVector<f64>),
}

/// The ellipsoid `{x : (x − center)ᵀ P⁻¹ (x − center) ≤ 1}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
}

/// The cut direction has no extent left in the current ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degenerate {
    pub c_p_c: f64,
}

impl Ellipsoid {
    /// The ball of radius `radius` around `center`.
    pub fn ball(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        Self {
            center,
            shape: DMatrix::identity(n, n) * (radius * radius),
        }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Log-determinant of the shape matrix (volume up to a constant).
    pub fn log_det(&self) -> f64 {
        match self.shape.clone().cholesky() {
            Some(ch) => 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        }
    }

    /// Keeps the half `{x : c·x ≤ c·center}` and replaces the ellipsoid by
    /// the minimum-volume ellipsoid containing it.
    pub fn cut(&mut self, normal: &DVector<f64>) -> Result<(), Degenerate> {
        let n = self.dim() as f64;
        let pc = &self.shape * normal;
        let c_p_c = normal.dot(&pc);
        if !(c_p_c > 0.0) || !c_p_c.is_finite() {
            return Err(Degenerate { c_p_c });
        }
        let b = pc / c_p_c.sqrt();
        if self.dim() == 1 {
            self.center -= &b * 0.5;
            self.shape *= 0.25;
            return Ok(());
        }
        self.center -= &b * (1.0 / (n + 1.0));
        let scale = n * n / (n * n - 1.0);
        let shrink = 2.0 / (n + 1.0);
        self.shape.ger(-shrink, &b, &b, 1.0);
        self.shape *= scale;
        // keep P exactly symmetric against rounding drift
        let sym = (&self.shape + self.shape.transpose()) * 0.5;
        self.shape = sym;
        Ok(())
    }
}

/// A feasibility problem: find `x` with `oracle(x) = Inside`.
pub struct EllipsoidProblem<F> {
    pub center0: DVector<f64>,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub max_iters: usize,
    pub oracle: F,
}

impl<F: FnMut(&DVector<f64>) -> Cut> EllipsoidProblem<F> {
    /// Problem with the default iteration budget `⌈2n(n+1) ln(R/r)⌉`.
    pub fn new(center0: DVector<f64>, outer_radius: f64, inner_radius: f64, oracle: F) -> Self {
        let max_iters = default_budget(center0.len(), outer_radius, inner_radius);
        Self {
            center0,
            outer_radius,
            inner_radius,
            max_iters,
            oracle,
        }
    }
}

/// `⌈2n(n+1)·ln(R/r)⌉`, the number of central cuts after which the volume
/// of the ellipsoid drops below that of a radius-`r` ball.
pub fn default_budget(n: usize, outer_radius: f64, inner_radius: f64) -> usize {
    let ratio = (outer_radius / inner_radius).max(1.0);
    let n = n as f64;
    (2.0 * n * (n + 1.0) * ratio.ln()).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    BudgetExhausted,
    NumericalCollapse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EllipsoidOutcome {
    Feasible {
        point: DVector<f64>,
        iterations: usize,
    },
    Infeasible {
        iterations: usize,
        reason: InfeasibleReason,
    },
}

impl EllipsoidOutcome {
    pub fn point(&self) -> Option<&DVector<f64>> {
        match self {
            Self::Feasible { point, .. } => Some(point),
            Self::Infeasible { .. } => None,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            Self::Feasible { iterations, .. } | Self::Infeasible { iterations, .. } => *iterations,
        }
    }
}

pub fn find_feasible<F: FnMut(&DVector<f64>) -> Cut>(
    problem: EllipsoidProblem<F>,
) -> EllipsoidOutcome {
    let EllipsoidProblem {
        center0,
        outer_radius,
        max_iters,
        mut oracle,
        ..
    } = problem;
    let mut ell = Ellipsoid::ball(center0, outer_radius);
    let mut iterations = 0;
    loop {
        match oracle(ell.center()) {
            Cut::Inside => {
                return EllipsoidOutcome::Feasible {
                    point: ell.center().clone(),
                    iterations,
                }
            }
            Cut::Violated(normal) => {
                if iterations >= max_iters {
                    return EllipsoidOutcome::Infeasible {
                        iterations,
                        reason: InfeasibleReason::BudgetExhausted,
                    };
                }
                if ell.cut(&normal).is_err() {
                    return EllipsoidOutcome::Infeasible {
                        iterations,
                        reason: InfeasibleReason::NumericalCollapse,
                    };
                }
                iterations += 1;
            }
        }
    }
}
