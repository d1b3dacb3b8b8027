//! Fixtures shared by the criterion benches.

use fair_nrm::{EstimatorState, Instance, Regularizer};
use nalgebra::{DMatrix, DVector};

pub fn high_gamma() -> DVector<f64> {
    DVector::from_row_slice(&[15.0, 12.0, 30.0])
}

pub fn reference(horizon: usize) -> Instance {
    Instance::reference(high_gamma(), horizon)
}

/// Estimator after `steps` noiseless observations on a deterministic price
/// sweep of the reference model, with the experiment-mode ridge weight.
pub fn warm_estimator(steps: usize) -> EstimatorState {
    let inst = reference(1000);
    let params = inst.params();
    let kappa = fair_nrm::estimator::kappa_value(2, 1000, inst.d_bar(), params.row_norm_bound(), inst.price_hi());
    let mut est = EstimatorState::new(2, 0.001, kappa).unwrap();
    for k in 0..steps {
        let x = k as f64;
        let p = DVector::from_row_slice(&[3.0 + 2.0 * (0.7 * x).sin(), 3.0 + 2.0 * (1.3 * x).cos()]);
        est.observe(&p, &params.expected_demand(&p));
    }
    est.solve_mt(params.row_norm_bound(), 1000);
    est
}

/// One instance of each regularizer family on three resources, with the
/// matching inventory vector.
pub fn regularizers() -> Vec<(Regularizer, DVector<f64>)> {
    let g = high_gamma();
    let w = DVector::from_element(3, 1.0);
    vec![
        (Regularizer::weighted_max_min(1.0, w.clone()).unwrap(), g.clone()),
        (
            Regularizer::group_max_min(1.0, w.clone(), DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap(),
            g.clone(),
        ),
        (Regularizer::range_fairness(1.0, w, g.clone()).unwrap(), g.clone()),
        (Regularizer::load_balancing(1.0, g.clone()).unwrap(), g),
    ]
}

pub fn dual_prices() -> DVector<f64> {
    DVector::from_row_slice(&[-0.4, 1.1, 0.3])
}
