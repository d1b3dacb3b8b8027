//! Small dense linear-algebra helpers shared by the estimator, the ellipsoid
//! solver and the primal step.

use nalgebra::{DMatrix, DVector};

/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 50;
/// Off-diagonal Frobenius norm below which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, unsorted.
    pub values: DVector<f64>,
    /// Eigenvectors stored column-wise, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// Index and value of the largest eigenvalue.
    pub fn max(&self) -> (usize, f64) {
        let mut best = 0;
        for i in 1..self.values.len() {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        (best, self.values[best])
    }
}

/// Cyclic Jacobi eigen-solver. Only the lower triangle is assumed meaningful
/// after symmetrization, so callers should pass a symmetric matrix.
pub fn jacobi_eigen(sym: &DMatrix<f64>) -> SymmetricEigen {
    let n = sym.nrows();
    assert_eq!(n, sym.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = sym.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen {
        values: a.diagonal(),
        vectors: v,
    }
}

/// Largest eigenvalue of `m + mᵀ` together with a unit eigenvector.
pub fn max_eigen_of_symmetrized(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let sym = m + m.transpose();
    let eig = jacobi_eigen(&sym);
    let (idx, val) = eig.max();
    (val, eig.vectors.column(idx).into_owned())
}

pub fn inf_norm_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Induced ∞-norm: maximum absolute row sum.
pub fn inf_norm_mat(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * x[j];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// `(p, 1)`: the price vector augmented with the intercept coordinate.
pub fn augment(p: &DVector<f64>) -> DVector<f64> {
    let n = p.len();
    DVector::from_fn(n + 1, |i, _| if i < n { p[i] } else { 1.0 })
}
