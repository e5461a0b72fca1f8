//! Independent brute-force verifiers used by the test suites.
//!
//! Nothing here shares code with the solvers it checks: the 1D transport
//! value comes from the monotone quantile coupling, transportation optima
//! from exhaustive enumeration of spanning-forest supports, and masked
//! feasibility from the Gale/Hoffman subset condition instead of a max-flow.

use crate::error::{Error, Result};
use crate::transport::{CostMatrix, Mask};

/// Largest side length accepted by the vertex enumerator; the basis count
/// grows factorially beyond this.
pub const ENUMERATION_CAP: usize = 4;

/// Discrete distribution on the line with strictly ascending support points.
#[derive(Debug, Clone)]
pub struct Grid1D {
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl Grid1D {
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::DimensionMismatch {
                context: "grid points vs masses",
                left: points.len(),
                right: masses.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::EmptyInput("1D grid"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "grid points must be strictly ascending".into(),
            ));
        }
        if let Some(idx) = masses.iter().position(|&m| m < 0.0) {
            return Err(Error::NegativeWeight {
                index: idx,
                value: masses[idx],
            });
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { total });
        }
        Ok(Self { points, masses })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Discretize a 1D Gaussian on `n` points spanning eight standard deviations
/// either side of the mean, masses proportional to the density.
pub fn discretize_gaussian_1d(mean: f64, variance: f64, n: usize) -> Grid1D {
    let sigma = variance.sqrt();
    let lo = mean - 8.0 * sigma;
    let hi = mean + 8.0 * sigma;
    let step = (hi - lo) / (n - 1) as f64;
    let mut points = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    for i in 0..n {
        let x = lo + i as f64 * step;
        let z = (x - mean) / sigma;
        points.push(x);
        masses.push((-0.5 * z * z).exp());
    }
    let total: f64 = masses.iter().sum();
    for m in masses.iter_mut() {
        *m /= total;
    }
    Grid1D { points, masses }
}

/// Exact 1D optimal transport value via the monotone CDF coupling.
///
/// In one dimension the optimal coupling for the squared cost pairs quantiles
/// in order, so a two-pointer sweep over the sorted supports is exact.
pub fn w2_1d_quantile(f0: &Grid1D, f1: &Grid1D) -> Result<f64> {
    let mut i = 0;
    let mut j = 0;
    let mut rem0 = f0.masses[0];
    let mut rem1 = f1.masses[0];
    let mut acc = 0.0;
    loop {
        let m = rem0.min(rem1);
        if m > 0.0 {
            let d = f0.points[i] - f1.points[j];
            acc += m * d * d;
            // x - min(x, y) is exact, so the smaller side lands on 0.0.
            rem0 -= m;
            rem1 -= m;
        }
        if rem0 <= 0.0 {
            i += 1;
            if i == f0.points.len() {
                break;
            }
            rem0 = f0.masses[i];
        } else {
            j += 1;
            if j == f1.points.len() {
                break;
            }
            rem1 = f1.masses[j];
        }
    }
    Ok(acc.sqrt())
}

/// Outcome of the exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub enum EnumeratedOptimum {
    Value(f64),
    EmptyPolytope,
}

/// Exact transportation optimum by enumerating every acyclic support.
///
/// Vertices of the (masked) transportation polytope have acyclic support with
/// at most `n0 + n1 - 1` cells, and the flows on an acyclic support are the
/// unique solution of the marginal equations, recovered by leaf elimination.
/// All cell subsets up to that size are tried; the minimum over feasible ones
/// is the LP optimum.
pub fn enumerate_transport_vertices(
    cost: &CostMatrix,
    p0: &[f64],
    p1: &[f64],
    mask: Option<&Mask>,
) -> Result<EnumeratedOptimum> {
    let n0 = p0.len();
    let n1 = p1.len();
    if n0 > ENUMERATION_CAP || n1 > ENUMERATION_CAP {
        return Err(Error::InvalidParameter(format!(
            "enumeration capped at {ENUMERATION_CAP}x{ENUMERATION_CAP}, got {n0}x{n1}"
        )));
    }
    if cost.rows() != n0 || cost.cols() != n1 {
        return Err(Error::DimensionMismatch {
            context: "cost matrix vs marginals",
            left: cost.rows() * cost.cols(),
            right: n0 * n1,
        });
    }

    let cells: Vec<(usize, usize)> = (0..n0)
        .flat_map(|i| (0..n1).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            mask.map_or(true, |m| m.allowed(i, j)) && cost.get(i, j).is_finite()
        })
        .collect();
    let max_support = (n0 + n1 - 1) as u32;
    let tol = 1e-9 * f64::max(1.0, p0.iter().sum::<f64>());

    let mut best: Option<f64> = None;
    for bits in 0u32..(1u32 << cells.len()) {
        if bits.count_ones() > max_support {
            continue;
        }
        if let Some(value) = solve_support(&cells, bits, cost, p0, p1, tol) {
            best = Some(match best {
                Some(b) => b.min(value),
                None => value,
            });
        }
    }
    Ok(match best {
        Some(v) => EnumeratedOptimum::Value(v),
        None => EnumeratedOptimum::EmptyPolytope,
    })
}

/// Leaf elimination on one candidate support; `None` if the support is
/// cyclic, does not balance the marginals, or needs negative flow.
fn solve_support(
    cells: &[(usize, usize)],
    bits: u32,
    cost: &CostMatrix,
    p0: &[f64],
    p1: &[f64],
    tol: f64,
) -> Option<f64> {
    let n0 = p0.len();
    let n1 = p1.len();
    let mut active: Vec<(usize, usize)> = Vec::with_capacity(bits.count_ones() as usize);
    for (idx, &cell) in cells.iter().enumerate() {
        if bits & (1 << idx) != 0 {
            active.push(cell);
        }
    }

    let mut rem: Vec<f64> = p0.iter().chain(p1.iter()).copied().collect();
    let mut deg = vec![0usize; n0 + n1];
    let mut alive: Vec<bool> = vec![true; active.len()];
    for &(i, j) in &active {
        deg[i] += 1;
        deg[n0 + j] += 1;
    }

    let mut value = 0.0;
    let mut removed = 0;
    while removed < active.len() {
        // Find a leaf node and resolve its unique cell.
        let mut progressed = false;
        for (e, &(i, j)) in active.iter().enumerate() {
            if !alive[e] {
                continue;
            }
            let (leaf, other) = if deg[i] == 1 {
                (i, n0 + j)
            } else if deg[n0 + j] == 1 {
                (n0 + j, i)
            } else {
                continue;
            };
            let flow = rem[leaf];
            if flow < -tol {
                return None;
            }
            value += cost.get(i, j) * flow.max(0.0);
            rem[leaf] = 0.0;
            rem[other] -= flow;
            deg[leaf] -= 1;
            deg[other] -= 1;
            alive[e] = false;
            removed += 1;
            progressed = true;
        }
        if !progressed {
            return None; // remaining support is cyclic
        }
    }
    if rem.iter().any(|r| r.abs() > tol) {
        return None;
    }
    Some(value)
}

/// Masked-transportation feasibility via the Gale/Hoffman condition.
///
/// The masked polytope is nonempty iff the totals match and every row subset
/// S satisfies `p0(S) <= p1(N(S))`. Subsets are enumerated over the smaller
/// side, which is exact and shares nothing with the solver's max-flow check.
pub fn mask_feasible(p0: &[f64], p1: &[f64], mask: &Mask) -> bool {
    let total0: f64 = p0.iter().sum();
    let total1: f64 = p1.iter().sum();
    let tol = 1e-12 * f64::max(1.0, total0.max(total1));
    if (total0 - total1).abs() > tol {
        return false;
    }
    // Work on the smaller side.
    let transpose = p0.len() > p1.len();
    let (rows, cols): (&[f64], &[f64]) = if transpose { (p1, p0) } else { (p0, p1) };
    let allowed = |i: usize, j: usize| {
        if transpose {
            mask.allowed(j, i)
        } else {
            mask.allowed(i, j)
        }
    };
    let n = rows.len();
    for subset in 1u64..(1u64 << n) {
        let mut supply = 0.0;
        for (i, &r) in rows.iter().enumerate() {
            if subset & (1 << i) != 0 {
                supply += r;
            }
        }
        let mut reachable = 0.0;
        for (j, &c) in cols.iter().enumerate() {
            let touches = (0..n).any(|i| subset & (1 << i) != 0 && allowed(i, j));
            if touches {
                reachable += c;
            }
        }
        if supply > reachable + tol {
            return false;
        }
    }
    true
}
