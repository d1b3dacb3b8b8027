//! Experiment configuration files (TOML).
//!
//! ```toml
//! [instance]
//! preset = "reference"          # or give A, alpha, B, price_lo, price_hi
//!
//! [noise]
//! sigma = 1.0
//! clip = 1.0
//!
//! [[gamma]]
//! label = "high"
//! values = [15.0, 12.0, 30.0]
//!
//! [regularizer]
//! kind = "max_min"              # weighted_max_min | group_max_min | range_fairness | load_balancing
//! lambdas = [0.0, 0.5, 1.0, 1.5]
//!
//! [policy]
//! mode = "experiment"           # or "theory"
//!
//! [experiment]
//! horizons = [100, 500, 1000]
//! trials = 10
//! seed_base = 0
//! output = "results.csv"
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::benchmark::fluid::FluidMethod;
use crate::env::{Instance, ModelParams, NoiseSpec};
use crate::error::{Error, Result};
use crate::policy::{Mode, PolicyConfig};
use crate::regularizers::Regularizer;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    instance: RawInstance,
    noise: Option<RawNoise>,
    gamma: Vec<RawGamma>,
    regularizer: RawRegularizer,
    policy: Option<RawPolicy>,
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    preset: Option<String>,
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    alpha: Option<Vec<f64>>,
    #[serde(rename = "B")]
    b: Option<Vec<Vec<f64>>>,
    price_lo: Option<f64>,
    price_hi: Option<f64>,
    d_bar: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma: f64,
    clip: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    label: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegularizer {
    kind: String,
    lambdas: Vec<f64>,
    w: Option<Vec<f64>>,
    #[serde(rename = "U")]
    groups: Option<Vec<Vec<f64>>>,
    gamma_ref: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    mode: Option<String>,
    ucb_coefficient: Option<f64>,
    reg_weight: Option<f64>,
    #[serde(rename = "C")]
    c: Option<f64>,
    eta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    horizons: Vec<usize>,
    trials: Option<usize>,
    seed_base: Option<u64>,
    output: Option<PathBuf>,
    fluid_resolution: Option<f64>,
    fluid_method: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    WeightedMaxMin,
    GroupMaxMin,
    RangeFairness,
    LoadBalancing,
}

impl RegularizerKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "max_min" | "weighted_max_min" => Some(Self::WeightedMaxMin),
            "group_max_min" => Some(Self::GroupMaxMin),
            "range" | "range_fairness" => Some(Self::RangeFairness),
            "load_balancing" => Some(Self::LoadBalancing),
            _ => None,
        }
    }
}

/// Regularizer family with everything but `λ` fixed. Missing `w` means all
/// ones; missing `gamma_ref` means the γ of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub w: Option<DVector<f64>>,
    pub groups: Option<DMatrix<f64>>,
    pub gamma_ref: Option<DVector<f64>>,
}

impl RegularizerSpec {
    pub fn max_min() -> Self {
        Self {
            kind: RegularizerKind::WeightedMaxMin,
            w: None,
            groups: None,
            gamma_ref: None,
        }
    }

    pub fn build(&self, lambda: f64, gamma: &DVector<f64>) -> Result<Regularizer> {
        let m = gamma.len();
        let w = self.w.clone().unwrap_or_else(|| DVector::from_element(m, 1.0));
        let gamma_ref = self.gamma_ref.clone().unwrap_or_else(|| gamma.clone());
        if w.len() != m || gamma_ref.len() != m {
            return Err(Error::config("regularizer", format!("w and gamma_ref must have length {m}")));
        }
        match self.kind {
            RegularizerKind::WeightedMaxMin => Regularizer::weighted_max_min(lambda, w),
            RegularizerKind::GroupMaxMin => {
                let groups = self
                    .groups
                    .clone()
                    .ok_or_else(|| Error::config("regularizer.U", "group_max_min needs a grouping matrix"))?;
                Regularizer::group_max_min(lambda, w, groups)
            }
            RegularizerKind::RangeFairness => Regularizer::range_fairness(lambda, w, gamma_ref),
            RegularizerKind::LoadBalancing => Regularizer::load_balancing(lambda, gamma_ref),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a: DMatrix<f64>,
    pub params: ModelParams,
    pub price_lo: f64,
    pub price_hi: f64,
    pub d_bar: Option<f64>,
    pub noise: NoiseSpec,
    pub gammas: Vec<(String, DVector<f64>)>,
    pub regularizer: RegularizerSpec,
    pub lambdas: Vec<f64>,
    pub policy: PolicyConfig,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub seed_base: u64,
    pub output: Option<PathBuf>,
    pub fluid_resolution: f64,
    pub fluid_method: FluidMethod,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::config(field, "must be a non-empty rectangular array of rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Re-labels parameter errors as configuration errors on `field`.
fn in_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { field: f, reason } => Error::config(format!("{field}.{f}"), reason),
        Error::Dimension(reason) | Error::Contract(reason) => Error::config(field, reason),
        other => other,
    })
}

impl ExperimentConfig {
    /// The reference instance with both inventory levels, four `λ` values
    /// and the full horizon grid.
    pub fn reference_grid() -> Self {
        let inst = Instance::reference(DVector::from_row_slice(&[15.0, 12.0, 30.0]), 1);
        Self {
            a: inst.a().clone(),
            params: inst.params().clone(),
            price_lo: inst.price_lo(),
            price_hi: inst.price_hi(),
            d_bar: None,
            noise: *inst.noise(),
            gammas: vec![
                ("high".into(), DVector::from_row_slice(&[15.0, 12.0, 30.0])),
                ("low".into(), DVector::from_row_slice(&[10.0, 8.0, 20.0])),
            ],
            regularizer: RegularizerSpec::max_min(),
            lambdas: vec![0.0, 0.5, 1.0, 1.5],
            policy: PolicyConfig::experiment(0),
            horizons: vec![100, 500, 1000, 2000, 3000, 4000, 6000, 8000, 10000],
            trials: 10,
            seed_base: 0,
            output: None,
            fluid_resolution: 0.01,
            fluid_method: FluidMethod::Grid,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let reason = e.message().to_string();
            let field = e
                .span()
                .map(|s| format!("line {}", text[..s.start].lines().count().max(1)))
                .unwrap_or_else(|| "toml".into());
            Error::config(field, reason)
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let reference = Instance::reference(DVector::from_row_slice(&[15.0, 12.0, 30.0]), 1);
        let ri = raw.instance;
        let explicit = ri.a.is_some() || ri.alpha.is_some() || ri.b.is_some();
        let (a, params, lo, hi) = match ri.preset.as_deref() {
            Some("reference") if !explicit => (
                reference.a().clone(),
                reference.params().clone(),
                ri.price_lo.unwrap_or(reference.price_lo()),
                ri.price_hi.unwrap_or(reference.price_hi()),
            ),
            Some("reference") => {
                return Err(Error::config("instance", "give either `preset` or explicit A/alpha/B, not both"))
            }
            Some(other) => return Err(Error::config("instance.preset", format!("unknown preset `{other}`"))),
            None => {
                let a = matrix("instance.A", ri.a.as_deref().ok_or_else(|| Error::config("instance.A", "missing"))?)?;
                let alpha = DVector::from_vec(ri.alpha.ok_or_else(|| Error::config("instance.alpha", "missing"))?);
                let b = matrix("instance.B", ri.b.as_deref().ok_or_else(|| Error::config("instance.B", "missing"))?)?;
                let params = in_field("instance", ModelParams::new(alpha, b))?;
                let lo = ri.price_lo.ok_or_else(|| Error::config("instance.price_lo", "missing"))?;
                let hi = ri.price_hi.ok_or_else(|| Error::config("instance.price_hi", "missing"))?;
                (a, params, lo, hi)
            }
        };
        let noise = match raw.noise {
            Some(n) => in_field("noise", NoiseSpec::new(n.sigma, n.clip))?,
            None => NoiseSpec::default(),
        };

        if raw.gamma.is_empty() {
            return Err(Error::config("gamma", "need at least one [[gamma]] table"));
        }
        let gammas: Vec<(String, DVector<f64>)> = raw
            .gamma
            .into_iter()
            .map(|g| (g.label, DVector::from_vec(g.values)))
            .collect();
        for (i, (label, _)) in gammas.iter().enumerate() {
            if gammas[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::config("gamma.label", format!("duplicate label `{label}`")));
            }
        }

        let rr = raw.regularizer;
        let kind = RegularizerKind::parse(&rr.kind)
            .ok_or_else(|| Error::config("regularizer.kind", format!("unknown regularizer `{}`", rr.kind)))?;
        let groups = rr.groups.as_deref().map(|g| matrix("regularizer.U", g)).transpose()?;
        let regularizer = RegularizerSpec {
            kind,
            w: rr.w.map(DVector::from_vec),
            groups,
            gamma_ref: rr.gamma_ref.map(DVector::from_vec),
        };
        if rr.lambdas.is_empty() {
            return Err(Error::config("regularizer.lambdas", "must list at least one value"));
        }

        let mut policy = PolicyConfig::default();
        if let Some(rp) = raw.policy {
            if let Some(mode) = rp.mode {
                policy.mode = Mode::parse(&mode)
                    .ok_or_else(|| Error::config("policy.mode", format!("expected `theory` or `experiment`, got `{mode}`")))?;
            }
            policy.ucb_coefficient = rp.ucb_coefficient;
            policy.reg_weight = rp.reg_weight;
            policy.c = rp.c;
            policy.eta = rp.eta;
        }
        in_field("policy", policy.validate())?;

        let re = raw.experiment;
        let fluid_method = match re.fluid_method.as_deref() {
            None | Some("grid") => FluidMethod::Grid,
            Some("subgradient") => FluidMethod::Subgradient,
            Some(other) => {
                return Err(Error::config("experiment.fluid_method", format!("unknown method `{other}`")))
            }
        };

        let cfg = Self {
            a,
            params,
            price_lo: lo,
            price_hi: hi,
            d_bar: ri.d_bar,
            noise,
            gammas,
            regularizer,
            lambdas: rr.lambdas,
            policy,
            horizons: re.horizons,
            trials: re.trials.unwrap_or(10),
            seed_base: re.seed_base.unwrap_or(0),
            output: re.output,
            fluid_resolution: re.fluid_resolution.unwrap_or(0.01),
            fluid_method,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds every instance and regularizer the experiment will use.
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::config("experiment.horizons", "must be a non-empty list of positive integers"));
        }
        if self.trials == 0 {
            return Err(Error::config("experiment.trials", "must be positive"));
        }
        if !(self.fluid_resolution > 0.0) {
            return Err(Error::config("experiment.fluid_resolution", "must be positive"));
        }
        for gi in 0..self.gammas.len() {
            self.instance(gi, self.horizons[0])?;
            for &lambda in &self.lambdas {
                self.regularizer(lambda, gi)?;
            }
        }
        Ok(())
    }

    pub fn instance(&self, gamma_idx: usize, horizon: usize) -> Result<Instance> {
        let (label, gamma) = &self.gammas[gamma_idx];
        let field = format!("gamma[{label}]");
        let inst = in_field(
            &field,
            Instance::new(
                self.a.clone(),
                gamma.clone(),
                self.price_lo,
                self.price_hi,
                horizon,
                self.params.clone(),
                self.noise,
            ),
        )?;
        match self.d_bar {
            Some(d) => in_field("instance", inst.with_d_bar(d)),
            None => Ok(inst),
        }
    }

    pub fn regularizer(&self, lambda: f64, gamma_idx: usize) -> Result<Regularizer> {
        in_field("regularizer", self.regularizer.build(lambda, &self.gammas[gamma_idx].1))
    }

    pub fn cell_count(&self) -> usize {
        self.gammas.len() * self.lambdas.len() * self.horizons.len() * self.trials
    }
}
