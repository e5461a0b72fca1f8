//! Optimal transport between scalar Gaussian mixtures, and the unbalanced
//! extension that prices created or destroyed mass through an implicit
//! source node.
//!
//! The balanced distance solves the component-level transportation problem
//! with squared Gaussian W2 costs and takes the square root of the optimum.
//! Unbalanced inputs append one source node to the lighter side carrying the
//! mass deficit, priced at `gamma` per unit mass in squared-distance units.

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_interpolate, w2_gaussian, Gaussian};
use crate::transport::{solve_transport, CostMatrix, Coupling};

/// Balance tolerance on total mass.
pub const BALANCE_TOL: f64 = 1e-9;

/// Entrywise tolerance for canonical component merging.
pub const MERGE_TOL: f64 = 1e-9;

/// Weighted list of Gaussians, all of one dimension.
///
/// Balanced operations require total mass 1; unbalanced pipelines accept any
/// positive total. The component list may be empty only for bookkeeping
/// outputs such as an unused source layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    dim: usize,
    components: Vec<(f64, Gaussian)>,
}

impl MixtureModel {
    pub fn new(components: Vec<(f64, Gaussian)>) -> Result<Self> {
        let dim = components
            .first()
            .map(|(_, g)| g.dim())
            .ok_or(Error::EmptyModel)?;
        Self::with_dim(dim, components)
    }

    pub fn with_dim(dim: usize, components: Vec<(f64, Gaussian)>) -> Result<Self> {
        for (index, (w, g)) in components.iter().enumerate() {
            if !(*w > 0.0) {
                return Err(Error::NegativeWeight {
                    index,
                    value: *w,
                });
            }
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "mixture component dimension",
                    left: dim,
                    right: g.dim(),
                });
            }
        }
        Ok(Self { dim, components })
    }

    /// Mixture with no components (zero mass), used for empty source layers.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            components: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[(f64, Gaussian)] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|(w, _)| *w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }

    pub fn is_balanced(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= BALANCE_TOL
    }

    /// Rescale weights so the total mass is one.
    pub fn normalized(&self) -> Result<MixtureModel> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|(w, g)| (w / total, g.clone()))
                .collect(),
        })
    }

    /// Density of the mixture at a point.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (w, g) in &self.components {
            total += w * crate::gaussian::density(g, x)?;
        }
        Ok(total)
    }

    /// Sort components lexicographically by (mean, covariance) and merge
    /// duplicates within [`MERGE_TOL`]; weights of merged components add.
    pub fn canonicalize(&self) -> MixtureModel {
        let mut items: Vec<(f64, Gaussian, Vec<f64>)> = self
            .components
            .iter()
            .map(|(w, g)| (*w, g.clone(), component_key(g)))
            .collect();
        items.sort_by(|a, b| lex_cmp(&a.2, &b.2));
        let mut merged: Vec<(f64, Gaussian, Vec<f64>)> = Vec::new();
        for (w, g, key) in items {
            match merged.last_mut() {
                Some((mw, _, mkey)) if keys_close(mkey, &key) => *mw += w,
                _ => merged.push((w, g, key)),
            }
        }
        MixtureModel {
            dim: self.dim,
            components: merged.into_iter().map(|(w, g, _)| (w, g)).collect(),
        }
    }

    /// Distribution-level equality: canonical forms match within `tol`.
    pub fn same_distribution(&self, other: &MixtureModel, tol: f64) -> bool {
        let a = self.canonicalize();
        let b = other.canonicalize();
        a.dim == b.dim
            && a.components.len() == b.components.len()
            && a.components
                .iter()
                .zip(&b.components)
                .all(|((wa, ga), (wb, gb))| (wa - wb).abs() <= tol && ga.approx_eq(gb, tol))
    }
}

fn component_key(g: &Gaussian) -> Vec<f64> {
    let mut key = g.mean().to_vec();
    key.extend_from_slice(g.covariance().entries());
    key
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

fn keys_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MERGE_TOL)
}

/// Distance, optimal plan and the cost matrix that produced it.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub distance: f64,
    pub plan: Coupling,
    pub cost: CostMatrix,
}

fn check_dims(mu0: &MixtureModel, mu1: &MixtureModel) -> Result<()> {
    if mu0.dim() != mu1.dim() {
        return Err(Error::DimensionMismatch {
            context: "mixture dimensions",
            left: mu0.dim(),
            right: mu1.dim(),
        });
    }
    if mu0.is_empty() || mu1.is_empty() {
        return Err(Error::EmptyModel);
    }
    Ok(())
}

fn check_balanced(mu0: &MixtureModel, mu1: &MixtureModel) -> Result<()> {
    let (m0, m1) = (mu0.total_mass(), mu1.total_mass());
    if (m0 - m1).abs() > BALANCE_TOL {
        return Err(Error::UnbalancedInput { mass0: m0, mass1: m1 });
    }
    if (m0 - 1.0).abs() > BALANCE_TOL {
        return Err(Error::NotNormalized { total: m0 });
    }
    Ok(())
}

/// Squared pairwise Gaussian W2 costs between component lists.
pub(crate) fn squared_w2_cost(
    c0: &[(f64, Gaussian)],
    c1: &[(f64, Gaussian)],
) -> Result<CostMatrix> {
    let mut entries = Vec::with_capacity(c0.len() * c1.len());
    for (_, g0) in c0 {
        for (_, g1) in c1 {
            let d = w2_gaussian(g0, g1)?;
            entries.push(d * d);
        }
    }
    CostMatrix::new(c0.len(), c1.len(), entries)
}

/// Mixture transport distance with squared Gaussian W2 ground cost.
pub fn gmm_distance(mu0: &MixtureModel, mu1: &MixtureModel) -> Result<TransportResult> {
    check_dims(mu0, mu1)?;
    check_balanced(mu0, mu1)?;
    let cost = squared_w2_cost(mu0.components(), mu1.components())?;
    let sol = solve_transport(&cost, &mu0.weights(), &mu1.weights())?;
    Ok(TransportResult {
        distance: sol.value.max(0.0).sqrt(),
        plan: sol.plan,
        cost,
    })
}

/// Displacement interpolation driven by a precomputed optimal plan.
pub fn gmm_interpolate_plan(
    mu0: &MixtureModel,
    mu1: &MixtureModel,
    plan: &Coupling,
    t: f64,
) -> Result<MixtureModel> {
    let mut components = Vec::new();
    for (i, (_, g0)) in mu0.components().iter().enumerate() {
        for (j, (_, g1)) in mu1.components().iter().enumerate() {
            let mass = plan.get(i, j);
            if mass > 0.0 {
                components.push((mass, gaussian_interpolate(g0, g1, t)?));
            }
        }
    }
    MixtureModel::with_dim(mu0.dim(), components)
}

/// Displacement interpolation between balanced mixtures.
pub fn gmm_interpolate(mu0: &MixtureModel, mu1: &MixtureModel, t: f64) -> Result<MixtureModel> {
    let result = gmm_distance(mu0, mu1)?;
    gmm_interpolate_plan(mu0, mu1, &result.plan, t)
}

/// Which side of an unbalanced problem received the implicit source node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSide {
    /// Totals matched; no source node was added.
    None,
    /// The first mixture was lighter: plan has an extra row.
    First,
    /// The second mixture was lighter: plan has an extra column.
    Second,
}

/// Unbalanced solve keeping the extended plan and the side bookkeeping.
#[derive(Debug, Clone)]
pub struct UnbalancedResult {
    pub result: TransportResult,
    pub side: SourceSide,
    /// Mass routed through the source node.
    pub deficit: f64,
}

/// Transport between mixtures of unequal mass: the lighter side is extended
/// with one source node carrying the deficit, priced `gamma` per unit mass.
pub fn unbalanced_gmm_distance(
    mu0: &MixtureModel,
    mu1: &MixtureModel,
    gamma: f64,
) -> Result<TransportResult> {
    Ok(unbalanced_gmm_solve(mu0, mu1, gamma)?.result)
}

pub fn unbalanced_gmm_solve(
    mu0: &MixtureModel,
    mu1: &MixtureModel,
    gamma: f64,
) -> Result<UnbalancedResult> {
    check_dims(mu0, mu1)?;
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "source price gamma must be nonnegative, got {gamma}"
        )));
    }
    let (m0, m1) = (mu0.total_mass(), mu1.total_mass());
    if m0 <= 0.0 || m1 <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let base = squared_w2_cost(mu0.components(), mu1.components())?;
    let (n0, n1) = (mu0.len(), mu1.len());
    let deficit = (m0 - m1).abs();

    let side = if deficit <= BALANCE_TOL * f64::max(1.0, m0.max(m1)) {
        SourceSide::None
    } else if m0 < m1 {
        SourceSide::First
    } else {
        SourceSide::Second
    };

    let (cost, p0, p1) = match side {
        SourceSide::None => (base, mu0.weights(), mu1.weights()),
        SourceSide::First => {
            // Extra row: source supplies the deficit to the heavier side.
            let mut entries = base.entries().to_vec();
            entries.extend(std::iter::repeat(gamma).take(n1));
            let cost = CostMatrix::new(n0 + 1, n1, entries)?;
            let mut p0 = mu0.weights();
            p0.push(deficit);
            (cost, p0, mu1.weights())
        }
        SourceSide::Second => {
            // Extra column: surplus of the first mixture drains to source.
            let mut entries = Vec::with_capacity((n0) * (n1 + 1));
            for i in 0..n0 {
                entries.extend_from_slice(
                    &base.entries()[i * n1..(i + 1) * n1],
                );
                entries.push(gamma);
            }
            let cost = CostMatrix::new(n0, n1 + 1, entries)?;
            let mut p1 = mu1.weights();
            p1.push(deficit);
            (cost, mu0.weights(), p1)
        }
    };

    let sol = solve_transport(&cost, &p0, &p1)?;
    Ok(UnbalancedResult {
        result: TransportResult {
            distance: sol.value.max(0.0).sqrt(),
            plan: sol.plan,
            cost,
        },
        side,
        deficit,
    })
}

/// Interpolation of an unbalanced pair at time `t`.
///
/// The plan's source cells pair a concrete component with the implicit
/// source node; each such pairing becomes a same-shaped Gaussian whose mass
/// fades linearly between the original layer and the source layer. Returns
/// the original-layer and source-layer mixtures at time `t`.
pub fn unbalanced_gmm_interpolate(
    mu0: &MixtureModel,
    mu1: &MixtureModel,
    gamma: f64,
    t: f64,
) -> Result<(MixtureModel, MixtureModel)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let solved = unbalanced_gmm_solve(mu0, mu1, gamma)?;
    let plan = &solved.result.plan;
    let dim = mu0.dim();

    let mut original: Vec<(f64, Gaussian)> = Vec::new();
    let mut source: Vec<(f64, Gaussian)> = Vec::new();
    for (i, (_, g0)) in mu0.components().iter().enumerate() {
        for (j, (_, g1)) in mu1.components().iter().enumerate() {
            let mass = plan.get(i, j);
            if mass > 0.0 {
                original.push((mass, gaussian_interpolate(g0, g1, t)?));
            }
        }
    }
    match solved.side {
        SourceSide::None => {}
        SourceSide::First => {
            // Source row feeds target components: mass appears over time.
            let src_row = mu0.len();
            for (j, (_, g1)) in mu1.components().iter().enumerate() {
                let mass = plan.get(src_row, j);
                if mass > 0.0 {
                    if t > 0.0 {
                        original.push((mass * t, g1.clone()));
                    }
                    if t < 1.0 {
                        source.push((mass * (1.0 - t), g1.clone()));
                    }
                }
            }
        }
        SourceSide::Second => {
            // Source column absorbs surplus components: mass fades out.
            let src_col = mu1.len();
            for (i, (_, g0)) in mu0.components().iter().enumerate() {
                let mass = plan.get(i, src_col);
                if mass > 0.0 {
                    if t < 1.0 {
                        original.push((mass * (1.0 - t), g0.clone()));
                    }
                    if t > 0.0 {
                        source.push((mass * t, g0.clone()));
                    }
                }
            }
        }
    }

    let original = MixtureModel::with_dim(dim, original)?;
    let source = if source.is_empty() {
        MixtureModel::empty(dim)
    } else {
        MixtureModel::with_dim(dim, source)?
    };
    Ok((original, source))
}
