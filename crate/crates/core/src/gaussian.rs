//! Gaussian distributions: closed-form Wasserstein-2 distance, displacement
//! interpolation and density evaluation.
//!
//! For means `m0, m1` and covariances `S0, S1` the squared distance is
//!
//! ```text
//! W2^2 = ||m0 - m1||^2 + trace(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2})
//! ```
//!
//! and the geodesic point at time `t` is the Gaussian with
//!
//! ```text
//! m_t = (1-t) m0 + t m1
//! S_t = S0^{-1/2} ((1-t) S0 + t (S0^{1/2} S1 S0^{1/2})^{1/2})^2 S0^{-1/2}
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{psd_inv_sqrt, psd_sqrt, sym_eig, SymmetricMatrix};

/// Entrywise tolerance for the "zero distance iff equal" contract.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Gaussian distribution with strictly positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    covariance: SymmetricMatrix,
}

impl Gaussian {
    /// Validates that the covariance is SPD and matches the mean length.
    pub fn new(mean: Vec<f64>, covariance: SymmetricMatrix) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                context: "Gaussian mean vs covariance",
                left: mean.len(),
                right: covariance.dim(),
            });
        }
        let eig = sym_eig(&covariance)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min <= 0.0 {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
        }
        Ok(Self { mean, covariance })
    }

    /// 1D convenience constructor from mean and variance.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], SymmetricMatrix::diagonal(&[variance]))
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let dim = mean.len();
        let cov = SymmetricMatrix::diagonal(&vec![variance; dim]);
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.covariance
    }

    /// Shift the mean, keeping the covariance.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "translation vector",
                left: self.dim(),
                right: shift.len(),
            });
        }
        let mean = self.mean.iter().zip(shift).map(|(m, s)| m + s).collect();
        Ok(Self {
            mean,
            covariance: self.covariance.clone(),
        })
    }

    pub fn approx_eq(&self, other: &Gaussian, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .mean
                .iter()
                .zip(&other.mean)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self.covariance.approx_eq(&other.covariance, tol)
    }
}

fn check_same_dim(g0: &Gaussian, g1: &Gaussian) -> Result<usize> {
    if g0.dim() != g1.dim() {
        return Err(Error::DimensionMismatch {
            context: "Gaussian dimensions",
            left: g0.dim(),
            right: g1.dim(),
        });
    }
    Ok(g0.dim())
}

/// Closed-form Wasserstein-2 distance between two Gaussians.
pub fn w2_gaussian(g0: &Gaussian, g1: &Gaussian) -> Result<f64> {
    check_same_dim(g0, g1)?;
    if g0.approx_eq(g1, EQUALITY_TOL) {
        return Ok(0.0);
    }
    let mean_sq: f64 = g0
        .mean
        .iter()
        .zip(&g1.mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let root0 = psd_sqrt(&g0.covariance)?;
    let cross = psd_sqrt(&root0.sandwich(&g1.covariance)?)?;
    let trace_term =
        g0.covariance.trace() + g1.covariance.trace() - 2.0 * cross.trace();
    // The trace term is nonnegative in exact arithmetic; clamp round-off.
    Ok((mean_sq + trace_term.max(0.0)).sqrt())
}

/// Point at time `t` on the Wasserstein-2 geodesic between two Gaussians.
pub fn gaussian_interpolate(g0: &Gaussian, g1: &Gaussian, t: f64) -> Result<Gaussian> {
    check_same_dim(g0, g1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let mean = g0
        .mean
        .iter()
        .zip(&g1.mean)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();

    let root0 = psd_sqrt(&g0.covariance)?;
    let inv_root0 = psd_inv_sqrt(&g0.covariance)?;
    let cross = psd_sqrt(&root0.sandwich(&g1.covariance)?)?;
    let blend = g0.covariance.scale(1.0 - t).add(&cross.scale(t))?;
    // S_t = (blend * inv_root0)^T (blend * inv_root0): PSD by construction.
    let covariance = inv_root0.gram_of_product(&blend)?;
    Gaussian::new(mean, covariance)
}

/// Density evaluator with the precision matrix and normalization factored out,
/// for repeated evaluation over grids.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    mean: Vec<f64>,
    precision: SymmetricMatrix,
    log_norm: f64,
}

impl DensityEvaluator {
    pub fn new(g: &Gaussian) -> Result<Self> {
        let eig = sym_eig(&g.covariance)?;
        let mut log_det = 0.0;
        let mut inv = Vec::with_capacity(eig.values.len());
        for &lambda in &eig.values {
            if lambda <= 0.0 {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: lambda });
            }
            log_det += lambda.ln();
            inv.push(1.0 / lambda);
        }
        let dim = g.dim() as f64;
        let log_norm = -0.5 * (dim * (2.0 * PI).ln() + log_det);
        Ok(Self {
            mean: g.mean.clone(),
            precision: SymmetricMatrix::from_eigenpairs(&inv, &eig.vectors),
            log_norm,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_eval(x)?.exp())
    }

    pub fn log_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "density point",
                left: self.mean.len(),
                right: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let q = self.precision.quadratic_form(&centered)?;
        Ok(self.log_norm - 0.5 * q)
    }
}

/// Gaussian density at a point.
pub fn density(g: &Gaussian, x: &[f64]) -> Result<f64> {
    DensityEvaluator::new(g)?.eval(x)
}
