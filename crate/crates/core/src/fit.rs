//! Weighted EM fitting of Gaussian mixtures.
//!
//! Samples carry nonnegative weights (image intensities, typically), so the
//! E-step responsibilities and M-step moments are weight-scaled throughout.
//! Initialization is k-means++ seeding on the weighted samples with a fixed
//! RNG seed; every run is reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::{DensityEvaluator, Gaussian};
use crate::linalg::SymmetricMatrix;
use crate::mixture::MixtureModel;

/// Weighted point cloud.
#[derive(Debug, Clone)]
pub struct WeightedSamples {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("weighted samples"));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "points vs weights",
                left: points.len(),
                right: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "sample dimensions",
                left: dim,
                right: 0,
            });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NegativeWeight {
                index,
                value: weights[index],
            });
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Number of distinct points (bitwise equality).
    pub fn distinct_points(&self) -> usize {
        let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
        for p in &self.points {
            seen.insert(p.iter().map(|x| x.to_bits()).collect());
        }
        seen.len()
    }

    /// Largest coordinate extent across dimensions.
    pub fn range(&self) -> f64 {
        let mut best = 0.0f64;
        for d in 0..self.dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &self.points {
                lo = lo.min(p[d]);
                hi = hi.max(p[d]);
            }
            best = best.max(hi - lo);
        }
        best
    }

    fn weighted_mean(&self, resp: impl Fn(usize) -> f64) -> (Vec<f64>, f64) {
        let mut mean = vec![0.0; self.dim];
        let mut mass = 0.0;
        for (s, p) in self.points.iter().enumerate() {
            let w = self.weights[s] * resp(s);
            mass += w;
            for d in 0..self.dim {
                mean[d] += w * p[d];
            }
        }
        if mass > 0.0 {
            for m in mean.iter_mut() {
                *m /= mass;
            }
        }
        (mean, mass)
    }

    fn weighted_cov(
        &self,
        mean: &[f64],
        mass: f64,
        jitter: f64,
        resp: impl Fn(usize) -> f64,
    ) -> Result<SymmetricMatrix> {
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for (s, p) in self.points.iter().enumerate() {
            let w = self.weights[s] * resp(s);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let di = p[i] - mean[i];
                for j in i..n {
                    data[i * n + j] += w * di * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let v = if mass > 0.0 { data[i * n + j] / mass } else { 0.0 };
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        let cov = SymmetricMatrix::new(n, data).expect("covariance built symmetric");
        floor_covariance(cov, jitter)
    }
}

/// Clamp eigenvalues below `jitter` up to it. Healthy covariances pass
/// through untouched, which keeps plain EM exactly monotone; only degenerate
/// components get regularized.
fn floor_covariance(cov: SymmetricMatrix, jitter: f64) -> Result<SymmetricMatrix> {
    let eig = crate::linalg::sym_eig(&cov)?;
    if eig.values.iter().all(|&l| l >= jitter) {
        return Ok(cov);
    }
    let floored: Vec<f64> = eig.values.iter().map(|&l| l.max(jitter)).collect();
    Ok(SymmetricMatrix::from_eigenpairs(&floored, &eig.vectors))
}

/// EM options; `jitter` of `None` derives the covariance floor from the data
/// range as `1e-6 * range^2`.
#[derive(Debug, Clone)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub jitter: Option<f64>,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-9,
            seed: 0,
            jitter: None,
        }
    }
}

/// Fit output: the mixture (scaled to the input's total mass) and the
/// weighted log-likelihood trace, one entry per EM iteration.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub mixture: MixtureModel,
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

const JITTER_FLOOR: f64 = 1e-9;

/// Weighted EM fit with k-means++ seeding.
///
/// The returned mixture's total mass equals the input's total weight, so
/// unbalanced pipelines can feed intensities directly; normalize afterwards
/// for balanced use.
pub fn fit_gmm_em(data: &WeightedSamples, k: usize, opts: &EmOptions) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let distinct = data.distinct_points();
    if k > distinct {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {distinct} distinct sample points"
        )));
    }
    let jitter = opts
        .jitter
        .unwrap_or_else(|| 1e-6 * data.range() * data.range())
        .max(JITTER_FLOOR);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let centers = kmeanspp_centers(data, k, &mut rng);

    // Hard assignment to seed the mixture parameters.
    let assign: Vec<usize> = data
        .points()
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect();
    let total = data.total_weight();
    let mut weights = Vec::with_capacity(k);
    let mut params: Vec<(Vec<f64>, SymmetricMatrix)> = Vec::with_capacity(k);
    for c in 0..k {
        let member = |s: usize| if assign[s] == c { 1.0 } else { 0.0 };
        let (mean, mass) = data.weighted_mean(member);
        let cov = data.weighted_cov(&mean, mass, jitter, member)?;
        weights.push((mass / total).max(1e-12));
        params.push((mean, cov));
    }
    normalize(&mut weights);

    let n = data.len();
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let ll = e_step(data, &weights, &params, &mut resp)?;
        let done = trace
            .last()
            .map_or(false, |prev: &f64| (ll - prev).abs() <= opts.tol * (1.0 + ll.abs()));
        trace.push(ll);
        if done {
            break;
        }

        // M-step.
        for c in 0..k {
            let member = |s: usize| resp[s * k + c];
            let (mean, mass) = data.weighted_mean(member);
            if mass <= 1e-300 {
                // Starved component: keep its parameters, give it a floor
                // weight so densities stay defined.
                weights[c] = 1e-12;
                continue;
            }
            let cov = data.weighted_cov(&mean, mass, jitter, member)?;
            weights[c] = mass / total;
            params[c] = (mean, cov);
        }
        normalize(&mut weights);
    }

    let components = weights
        .iter()
        .zip(&params)
        .map(|(w, (mean, cov))| {
            Gaussian::new(mean.clone(), cov.clone()).map(|g| (w * total, g))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        mixture: MixtureModel::with_dim(data.dim(), components)?,
        log_likelihood: trace,
        iterations,
    })
}

fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// E-step: fills normalized responsibilities, returns the weighted
/// log-likelihood under the current parameters.
fn e_step(
    data: &WeightedSamples,
    weights: &[f64],
    params: &[(Vec<f64>, SymmetricMatrix)],
    resp: &mut [f64],
) -> Result<f64> {
    let k = weights.len();
    let evaluators = params
        .iter()
        .map(|(mean, cov)| {
            let g = Gaussian::new(mean.clone(), cov.clone())?;
            DensityEvaluator::new(&g)
        })
        .collect::<Result<Vec<_>>>()?;
    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    let mut logs = vec![0.0; k];
    for (s, p) in data.points().iter().enumerate() {
        for c in 0..k {
            logs[c] = log_weights[c] + evaluators[c].log_eval(p)?;
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum_exp.ln();
        ll += data.weights()[s] * lse;
        for c in 0..k {
            resp[s * k + c] = (logs[c] - lse).exp();
        }
    }
    Ok(ll)
}

/// k-means++ seeding on weighted samples: the first center is drawn by
/// weight, later ones by weight times squared distance to the closest
/// chosen center.
fn kmeanspp_centers(data: &WeightedSamples, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = weighted_choice(data.weights(), rng).unwrap_or(0);
    centers.push(data.points()[first].clone());

    let mut nearest: Vec<f64> = data
        .points()
        .iter()
        .map(|p| sq_dist(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let scores: Vec<f64> = (0..n).map(|s| data.weights()[s] * nearest[s]).collect();
        let next = match weighted_choice(&scores, rng) {
            Some(idx) => idx,
            None => {
                // Every remaining point coincides with a center; take the
                // first distinct one deterministically.
                match (0..n).find(|&s| centers.iter().all(|c| sq_dist(&data.points()[s], c) > 0.0))
                {
                    Some(idx) => idx,
                    None => break,
                }
            }
        };
        centers.push(data.points()[next].clone());
        for s in 0..n {
            nearest[s] = nearest[s].min(sq_dist(&data.points()[s], centers.last().unwrap()));
        }
    }
    centers
}

fn weighted_choice(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let draw = rng.gen_range(0.0..total);
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            return Some(i);
        }
    }
    Some(weights.len() - 1)
}
