//! Dense symmetric-matrix primitives: eigendecomposition, PSD square root and
//! inverse square root.
//!
//! The matrices here are covariance-sized (a few rows, up to ~16), so the
//! eigensolver is a cyclic Jacobi sweep: deterministic, dependency-free and
//! essentially at machine precision for this size range.

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on construction.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in `[-PSD_CLAMP_TOL * lambda_max, 0)` are clamped to zero by
/// [`psd_sqrt`]; anything lower is rejected.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

/// Smallest eigenvalue accepted by [`psd_inv_sqrt`].
pub const SINGULARITY_FLOOR: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Square symmetric matrix with full row-major storage.
///
/// Construction symmetrizes the entries after checking that the input is
/// symmetric within [`SYMMETRY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Build from row-major entries, checking the symmetry invariant.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix storage",
                left: dim * dim,
                right: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = data[i * dim + j];
                let b = data[j * dim + i];
                let delta = (a - b).abs();
                if delta > SYMMETRY_TOL * f64::max(1.0, a.abs()) {
                    return Err(Error::NotSymmetric { i, j, delta });
                }
            }
        }
        // Store the exactly symmetric average so downstream products cannot
        // reintroduce asymmetry.
        Ok(symmetrized(dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in values.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Build `V diag(values) V^T` from eigenpairs without re-validation.
    pub fn from_eigenpairs(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        let dim = values.len();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let mut s = 0.0;
                for k in 0..dim {
                    s += values[k] * vectors[k][i] * vectors[k][j];
                }
                data[i * dim + j] = s;
                data[j * dim + i] = s;
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Symmetric product `A * B * A` (the sandwich appearing in the Gaussian
    /// transport formulas). The result is symmetrized to kill round-off.
    pub fn sandwich(&self, inner: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        let n = self.check_same_dim(inner)?;
        let ba = mat_mul(&inner.data, &self.data, n);
        let aba = mat_mul(&self.data, &ba, n);
        Ok(symmetrized(n, aba))
    }

    /// `X^T X` for `X = B * A` with `A = self`; positive semidefinite by
    /// construction, exactly symmetric by filling both triangles at once.
    pub fn gram_of_product(&self, left: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        let n = self.check_same_dim(left)?;
        let x = mat_mul(&left.data, &self.data, n);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += x[k * n + i] * x[k * n + j];
                }
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Ok(SymmetricMatrix { dim: n, data })
    }

    pub fn scale(&self, factor: f64) -> SymmetricMatrix {
        SymmetricMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| factor * x).collect(),
        }
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        let n = self.check_same_dim(other)?;
        Ok(SymmetricMatrix {
            dim: n,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "quadratic form vector",
                left: self.dim,
                right: x.len(),
            });
        }
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += x[i] * self.get(i, j) * x[j];
            }
        }
        Ok(s)
    }

    pub fn approx_eq(&self, other: &SymmetricMatrix, tol: f64) -> bool {
        self.dim == other.dim
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    fn check_same_dim(&self, other: &SymmetricMatrix) -> Result<usize> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "matrix dimensions",
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(self.dim)
    }
}

fn symmetrized(n: usize, mut data: Vec<f64>) -> SymmetricMatrix {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
            data[i * n + j] = avg;
            data[j * n + i] = avg;
        }
    }
    SymmetricMatrix { dim: n, data }
}

/// Row-major `a * b` for square matrices of order `n`.
fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values` are sorted descending; `vectors[k]` is the unit eigenvector for
/// `values[k]`, so `S = sum_k values[k] * vectors[k] * vectors[k]^T`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymEig {
    /// Reconstruct `V diag(values) V^T`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_eigenpairs(&self.values, &self.vectors)
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps all off-diagonal pairs (p, q) with plane rotations until the
/// off-diagonal Frobenius mass falls below `1e-14` relative to the matrix
/// norm. Quadratic convergence makes a handful of sweeps enough for the
/// dimensions used here; hitting the sweep cap is reported as a numerical
/// failure.
pub fn sym_eig(s: &SymmetricMatrix) -> Result<SymEig> {
    let n = s.dim();
    let mut a = s.data.clone();
    // v is accumulated row-major; column k holds eigenvector k.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    if n > 1 {
        let norm = s.frobenius_norm().max(f64::MIN_POSITIVE);
        let mut converged = false;
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = {
                let mut acc = 0.0;
                for p in 0..n {
                    for q in (p + 1)..n {
                        acc += a[p * n + q] * a[p * n + q];
                    }
                }
                (2.0 * acc).sqrt()
            };
            if off <= 1e-14 * norm {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = if theta.abs() > 1e154 {
                        // Avoid overflow in theta^2; rotation is essentially
                        // infinitesimal.
                        0.5 / theta
                    } else {
                        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                        sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let sn = t * c;

                    // Update rows/columns p and q of a.
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - sn * akq;
                        a[k * n + q] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - sn * aqk;
                        a[q * n + k] = sn * apk + c * aqk;
                    }
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;

                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - sn * vkq;
                        v[k * n + q] = sn * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged {
            let mut acc = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    acc += a[p * n + q] * a[p * n + q];
                }
            }
            if (2.0 * acc).sqrt() > 1e-10 * norm {
                return Err(Error::NumericalFailure(
                    "Jacobi eigensolver did not converge within the sweep cap",
                ));
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let vec_k: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
            (a[k * n + k], vec_k)
        })
        .collect();
    // Descending by value; ties keep input order for determinism.
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SymEig { values, vectors })
}

/// Positive-semidefinite square root `S^{1/2}`.
///
/// Eigenvalues within `PSD_CLAMP_TOL * lambda_max` below zero are treated as
/// round-off and clamped; anything lower is an error naming the eigenvalue.
pub fn psd_sqrt(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = sym_eig(s)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let tol = PSD_CLAMP_TOL * lambda_max;
    let mut roots = Vec::with_capacity(eig.values.len());
    for &lambda in &eig.values {
        if lambda < -tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: lambda });
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    Ok(SymmetricMatrix::from_eigenpairs(&roots, &eig.vectors))
}

/// Inverse square root `S^{-1/2}` of a strictly positive definite matrix.
pub fn psd_inv_sqrt(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = sym_eig(s)?;
    let mut inv_roots = Vec::with_capacity(eig.values.len());
    for &lambda in &eig.values {
        if lambda < SINGULARITY_FLOOR {
            return Err(Error::SingularCovariance {
                eigenvalue: lambda,
                floor: SINGULARITY_FLOOR,
            });
        }
        inv_roots.push(1.0 / lambda.sqrt());
    }
    Ok(SymmetricMatrix::from_eigenpairs(&inv_roots, &eig.vectors))
}
