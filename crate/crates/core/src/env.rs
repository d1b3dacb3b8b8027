//! Market environment: linear demand, truncated-Gaussian noise and the
//! resource inventory.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::max_eigen_of_symmetrized;

/// True parameters of the linear demand model `D(p) = α + B p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    alpha: DVector<f64>,
    b: DMatrix<f64>,
}

impl ModelParams {
    /// Validates shapes and that `B` is negative definite.
    pub fn new(alpha: DVector<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::param("alpha", "must be non-empty"));
        }
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::Dimension(format!(
                "B is {}x{}, expected {n}x{n}",
                b.nrows(),
                b.ncols()
            )));
        }
        let (lmax, _) = max_eigen_of_symmetrized(&b);
        if lmax >= 0.0 {
            return Err(Error::param(
                "B",
                format!("must be negative definite (largest eigenvalue of B+Bᵀ is {lmax})"),
            ));
        }
        Ok(Self { alpha, b })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Smallest `L_B ≥ 1` with `sqrt(α_i² + ‖Bᵀe_i‖²) ≤ L_B` for every row.
    pub fn row_norm_bound(&self) -> f64 {
        (0..self.n())
            .map(|i| (self.alpha[i].powi(2) + self.b.row(i).norm_squared()).sqrt())
            .fold(1.0_f64, f64::max)
    }

    /// `α + B p`, unclipped.
    pub fn expected_demand(&self, p: &DVector<f64>) -> DVector<f64> {
        assert_eq!(p.len(), self.n(), "price vector has wrong dimension");
        &self.alpha + &self.b * p
    }

    /// Expected revenue `⟨p, D(p)⟩`.
    pub fn expected_revenue(&self, p: &DVector<f64>) -> f64 {
        p.dot(&self.expected_demand(p))
    }
}

/// Per-coordinate demand noise `clip(N(0, σ²), clip)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma: f64,
    clip: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma: 1.0, clip: 1.0 }
    }
}

impl NoiseSpec {
    pub fn new(sigma: f64, clip: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param("noise.sigma", "must be finite and ≥ 0"));
        }
        if !(clip > 0.0) || !clip.is_finite() {
            return Err(Error::param("noise.clip", "must be finite and > 0"));
        }
        Ok(Self { sigma, clip })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated on construction");
        normal.sample(rng).clamp(-self.clip, self.clip)
    }
}

/// A full problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    a: DMatrix<f64>,
    gamma: DVector<f64>,
    price_lo: f64,
    price_hi: f64,
    horizon: usize,
    params: ModelParams,
    noise: NoiseSpec,
    d_bar: f64,
}

impl Instance {
    /// Builds an instance; `d_bar` defaults to the largest corner demand plus
    /// the noise clip.
    pub fn new(
        a: DMatrix<f64>,
        gamma: DVector<f64>,
        price_lo: f64,
        price_hi: f64,
        horizon: usize,
        params: ModelParams,
        noise: NoiseSpec,
    ) -> Result<Self> {
        let n = params.n();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A has {} columns but the demand model has {n} products",
                a.ncols()
            )));
        }
        if a.nrows() != gamma.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but gamma has {} entries",
                a.nrows(),
                gamma.len()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::param("A", "needs at least one resource"));
        }
        if a.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::param("A", "entries must be nonnegative"));
        }
        if gamma.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::param("gamma", "entries must be positive"));
        }
        if !(price_lo > 0.0) || !(price_hi >= price_lo) || !price_hi.is_finite() {
            return Err(Error::param(
                "prices",
                format!("need 0 < price_lo ≤ price_hi, got [{price_lo}, {price_hi}]"),
            ));
        }
        if horizon == 0 {
            return Err(Error::param("T", "horizon must be positive"));
        }
        let d_bar = default_demand_bound(&params, price_lo, price_hi, noise.clip());
        Ok(Self {
            a,
            gamma,
            price_lo,
            price_hi,
            horizon,
            params,
            noise,
            d_bar,
        })
    }

    /// The two-product, three-resource network used throughout the
    /// experiments: `A = [[1,1],[3,1],[0,5]]`, `α = (8,9)`,
    /// `B = diag(-1.5,-3)`, prices in `[1,5]`, noise `clip(N(0,1),1)`.
    pub fn reference(gamma: DVector<f64>, horizon: usize) -> Self {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 3.0, 1.0, 0.0, 5.0]);
        let params = ModelParams::new(
            DVector::from_vec(vec![8.0, 9.0]),
            DMatrix::from_row_slice(2, 2, &[-1.5, 0.0, 0.0, -3.0]),
        )
        .expect("reference model is valid");
        Self::new(a, gamma, 1.0, 5.0, horizon, params, NoiseSpec::default())
            .expect("reference instance is valid")
    }

    pub fn with_d_bar(mut self, d_bar: f64) -> Result<Self> {
        if !(d_bar > 0.0) {
            return Err(Error::param("d_bar", "must be positive"));
        }
        self.d_bar = d_bar;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("T", "horizon must be positive"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: DVector<f64>) -> Result<Self> {
        if gamma.len() != self.m() {
            return Err(Error::Dimension("gamma length must equal the number of resources".into()));
        }
        if gamma.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::param("gamma", "entries must be positive"));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self.d_bar = default_demand_bound(&self.params, self.price_lo, self.price_hi, noise.clip());
        self
    }

    /// Number of products.
    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// Number of resources.
    pub fn m(&self) -> usize {
        self.gamma.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn price_lo(&self) -> f64 {
        self.price_lo
    }

    pub fn price_hi(&self) -> f64 {
        self.price_hi
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn d_bar(&self) -> f64 {
        self.d_bar
    }

    pub fn initial_inventory(&self) -> InventoryState {
        InventoryState {
            levels: &self.gamma * self.horizon as f64,
            t: 0,
        }
    }

    pub fn in_box(&self, p: &DVector<f64>) -> bool {
        p.len() == self.n() && p.iter().all(|x| *x >= self.price_lo && *x <= self.price_hi)
    }

    /// One realized demand vector: `max(0, D(p) + ε)` with iid clipped noise.
    pub fn sample_demand<R: Rng + ?Sized>(&self, p: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mean = self.params.expected_demand(p);
        DVector::from_iterator(
            mean.len(),
            mean.iter()
                .map(|m| (m + self.noise.sample(rng)).clamp(0.0, self.d_bar)),
        )
    }
}

fn default_demand_bound(params: &ModelParams, lo: f64, hi: f64, clip: f64) -> f64 {
    let n = params.n();
    let mut best = 0.0_f64;
    // D is affine, so its maximum over the box sits at a corner.
    for mask in 0..(1usize << n.min(20)) {
        let p = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi } else { lo });
        let d = params.expected_demand(&p);
        best = d.iter().fold(best, |m, x| m.max(*x));
    }
    best.max(0.0) + clip
}

/// Remaining resource levels after `t` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryState {
    pub levels: DVector<f64>,
    pub t: usize,
}

impl InventoryState {
    /// `levels − A d`; the result may go negative, see [`Self::is_depleted`].
    pub fn consume(&self, a: &DMatrix<f64>, d: &DVector<f64>) -> InventoryState {
        InventoryState {
            levels: &self.levels - a * d,
            t: self.t + 1,
        }
    }

    /// True when any resource is at or below zero.
    pub fn is_depleted(&self) -> bool {
        self.levels.iter().any(|x| *x <= 0.0)
    }
}
