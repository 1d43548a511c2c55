//! Incremental ridge regression with an elliptical confidence radius.
//!
//! The estimator keeps the regularized Gram matrix `V = I + Σ z zᵀ`, the
//! response `b = Σ r z`, and the solution `θ = V⁻¹ b`. `V⁻¹` is maintained
//! with Sherman–Morrison rank-one updates so scoring an arm costs one
//! quadratic form; when an update looks numerically unsound the inverse is
//! rebuilt from a Cholesky factorization of `V`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeEstimator {
    dim: usize,
    alpha: f64,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    response: DVector<f64>,
    theta: DVector<f64>,
    updates: u64,
}

impl RidgeEstimator {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("estimator dimension must be positive"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(RidgeEstimator {
            dim,
            alpha,
            gram: DMatrix::identity(dim, dim),
            gram_inv: DMatrix::identity(dim, dim),
            response: DVector::zeros(dim),
            theta: DVector::zeros(dim),
            updates: 0,
        })
    }

    /// Adds one observation: `V += z zᵀ`, `b += r z`, then re-solves `θ`.
    pub fn update(&mut self, z: &[f64], reward: f64) -> Result<()> {
        self.check_dim(z)?;
        if z.iter().any(|v| !v.is_finite()) || !reward.is_finite() {
            return Err(invalid("update with non-finite feature or reward"));
        }
        let n = self.dim;
        for j in 0..n {
            for i in 0..n {
                self.gram[(i, j)] += z[i] * z[j];
            }
            self.response[j] += reward * z[j];
        }

        let u = mat_vec(&self.gram_inv, z);
        let denom = 1.0 + dot(z, &u);
        if denom.is_finite() && denom >= 1.0 - 1e-12 {
            for j in 0..n {
                for i in 0..n {
                    self.gram_inv[(i, j)] -= u[i] * u[j] / denom;
                }
            }
        } else {
            self.refactor();
        }
        self.theta = &self.gram_inv * &self.response;
        self.updates += 1;
        Ok(())
    }

    /// Rebuilds `V⁻¹` from scratch. `V` is SPD by construction so Cholesky succeeds.
    fn refactor(&mut self) {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .expect("gram matrix is symmetric positive definite");
        self.gram_inv = chol.inverse();
    }

    /// `θᵀ z`.
    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.predict_unchecked(z))
    }

    /// `alpha * sqrt(zᵀ V⁻¹ z)`.
    pub fn radius(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.radius_unchecked(z))
    }

    /// Prediction plus radius.
    pub fn ucb(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.predict_unchecked(z) + self.radius_unchecked(z))
    }

    pub(crate) fn predict_unchecked(&self, z: &[f64]) -> f64 {
        dot(self.theta.as_slice(), z)
    }

    pub(crate) fn radius_unchecked(&self, z: &[f64]) -> f64 {
        self.alpha * quad_form(&self.gram_inv, z).max(0.0).sqrt()
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(invalid(format!(
                "feature has dimension {}, estimator expects {}",
                z.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let data = m.as_slice();
    let mut out = vec![0.0; n];
    for (j, &zj) in z.iter().enumerate() {
        if zj == 0.0 {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * zj;
        }
    }
    out
}

/// `zᵀ M z` for a column-major square matrix.
pub(crate) fn quad_form(m: &DMatrix<f64>, z: &[f64]) -> f64 {
    let n = z.len();
    let data = m.as_slice();
    let mut acc = 0.0;
    for (j, &zj) in z.iter().enumerate() {
        if zj == 0.0 {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        acc += zj * dot(col, z);
    }
    acc
}
