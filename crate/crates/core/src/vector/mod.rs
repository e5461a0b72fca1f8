//! Vector-valued Gaussian mixtures: distances and displacement
//! interpolations under the three coupling strategies, plus the unbalanced
//! extension through a source channel.

mod strategy;
mod unbalanced;

pub use strategy::{
    strategy, strategy_by_index, ApproachId, CouplingStrategy, LinearGraphCost,
    QuadraticGraphCost, RestrictedCoupling, STRATEGIES,
};
pub use unbalanced::{
    unbalanced_vgmm_distance, unbalanced_vgmm_interpolate, unbalanced_vgmm_solve,
    UnbalancedVectorInterpolation, UnbalancedVectorResult,
};

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_interpolate, Gaussian};
use crate::graph::{ChannelGraph, GraphPosition};
use crate::mixture::{TransportResult, BALANCE_TOL, MERGE_TOL};
use crate::transport::{
    solve_transport, solve_transport_masked, CostMatrix, Coupling, LpOutcome, Mask,
};

/// Weighted Gaussian pinned to a channel of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorComponent {
    pub weight: f64,
    pub gaussian: Gaussian,
    pub channel: usize,
}

/// Gaussian mixture whose components live on the channels of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMixtureModel {
    graph: ChannelGraph,
    dim: usize,
    components: Vec<VectorComponent>,
}

impl VectorMixtureModel {
    pub fn new(graph: ChannelGraph, components: Vec<(f64, Gaussian, usize)>) -> Result<Self> {
        let dim = components
            .first()
            .map(|(_, g, _)| g.dim())
            .ok_or(Error::EmptyModel)?;
        let mut list = Vec::with_capacity(components.len());
        for (index, (weight, gaussian, channel)) in components.into_iter().enumerate() {
            if !(weight > 0.0) {
                return Err(Error::NegativeWeight {
                    index,
                    value: weight,
                });
            }
            if gaussian.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "vector component dimension",
                    left: dim,
                    right: gaussian.dim(),
                });
            }
            if channel >= graph.node_count() {
                return Err(Error::InvalidNode {
                    index: channel,
                    nodes: graph.node_count(),
                });
            }
            list.push(VectorComponent {
                weight,
                gaussian,
                channel,
            });
        }
        Ok(Self {
            graph,
            dim,
            components: list,
        })
    }

    pub fn graph(&self) -> &ChannelGraph {
        &self.graph
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

    pub fn components(&self) -> &[VectorComponent] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn is_balanced(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= BALANCE_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            graph: self.graph.clone(),
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| VectorComponent {
                    weight: c.weight / total,
                    ..c.clone()
                })
                .collect(),
        })
    }

    /// Mass per channel.
    pub fn channel_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.graph.node_count()];
        for c in &self.components {
            masses[c.channel] += c.weight;
        }
        masses
    }

    /// Sort components by (channel, mean, covariance) and merge duplicates.
    pub fn canonicalize(&self) -> VectorMixtureModel {
        let mut items: Vec<(VectorComponent, Vec<f64>)> = self
            .components
            .iter()
            .map(|c| {
                let mut key = vec![c.channel as f64];
                key.extend_from_slice(c.gaussian.mean());
                key.extend_from_slice(c.gaussian.covariance().entries());
                (c.clone(), key)
            })
            .collect();
        items.sort_by(|a, b| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != std::cmp::Ordering::Equal)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<(VectorComponent, Vec<f64>)> = Vec::new();
        for (c, key) in items {
            match merged.last_mut() {
                Some((mc, mkey))
                    if mkey
                        .iter()
                        .zip(&key)
                        .all(|(x, y)| (x - y).abs() <= MERGE_TOL) =>
                {
                    mc.weight += c.weight;
                }
                _ => merged.push((c, key)),
            }
        }
        VectorMixtureModel {
            graph: self.graph.clone(),
            dim: self.dim,
            components: merged.into_iter().map(|(c, _)| c).collect(),
        }
    }

    pub fn same_distribution(&self, other: &VectorMixtureModel, tol: f64) -> bool {
        let a = self.canonicalize();
        let b = other.canonicalize();
        a.graph == b.graph
            && a.components.len() == b.components.len()
            && a.components.iter().zip(&b.components).all(|(x, y)| {
                x.channel == y.channel
                    && (x.weight - y.weight).abs() <= tol
                    && x.gaussian.approx_eq(&y.gaussian, tol)
            })
    }

    /// View the model as a (trivial) interpolant with pure-node positions.
    pub fn as_interpolant(&self) -> VectorInterpolant {
        VectorInterpolant {
            graph: self.graph.clone(),
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| InterpolantComponent {
                    weight: c.weight,
                    gaussian: c.gaussian.clone(),
                    position: GraphPosition::node(c.channel),
                })
                .collect(),
        }
    }
}

/// Component of a displacement interpolation: a weighted Gaussian at a
/// (possibly fractional) channel position.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantComponent {
    pub weight: f64,
    pub gaussian: Gaussian,
    pub position: GraphPosition,
}

/// Displacement interpolation of a vector mixture pair at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorInterpolant {
    graph: ChannelGraph,
    dim: usize,
    components: Vec<InterpolantComponent>,
}

impl VectorInterpolant {
    pub fn new(graph: ChannelGraph, dim: usize, components: Vec<InterpolantComponent>) -> Self {
        Self {
            graph,
            dim,
            components,
        }
    }

    pub fn graph(&self) -> &ChannelGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[InterpolantComponent] {
        &self.components
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Mass per channel after splitting blended positions.
    pub fn channel_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.graph.node_count()];
        for c in &self.components {
            for ch in c.position.support() {
                masses[ch] += c.weight * c.position.channel_weight(ch);
            }
        }
        masses
    }

    /// Convert back to a vector mixture. Requires every position to be a
    /// pure channel, which holds at the interpolation endpoints.
    pub fn to_mixture(&self) -> Result<VectorMixtureModel> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                let channel = c.position.as_node().ok_or_else(|| {
                    Error::InvalidParameter(
                        "interpolant has fractional positions; not a pure mixture".into(),
                    )
                })?;
                Ok((c.weight, c.gaussian.clone(), channel))
            })
            .collect::<Result<Vec<_>>>()?;
        VectorMixtureModel::new(self.graph.clone(), comps)
    }
}

fn check_pair(rho0: &VectorMixtureModel, rho1: &VectorMixtureModel) -> Result<()> {
    if rho0.graph != rho1.graph {
        return Err(Error::GraphMismatch);
    }
    if rho0.dim != rho1.dim {
        return Err(Error::DimensionMismatch {
            context: "vector mixture dimensions",
            left: rho0.dim,
            right: rho1.dim,
        });
    }
    if !rho0.is_balanced() || !rho1.is_balanced() {
        return Err(Error::NotNormalized {
            total: if rho0.is_balanced() {
                rho1.total_mass()
            } else {
                rho0.total_mass()
            },
        });
    }
    Ok(())
}

/// Component-level cost matrix under a strategy.
pub fn vgmm_cost_matrix(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    id: ApproachId,
) -> Result<CostMatrix> {
    if rho0.graph != rho1.graph {
        return Err(Error::GraphMismatch);
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let s = strategy(id);
    let graph = &rho0.graph;
    let mut entries = Vec::with_capacity(rho0.len() * rho1.len());
    for c0 in &rho0.components {
        for c1 in &rho1.components {
            entries.push(s.component_cost(
                graph,
                gamma,
                &c0.gaussian,
                c0.channel,
                &c1.gaussian,
                c1.channel,
            )?);
        }
    }
    CostMatrix::new(rho0.len(), rho1.len(), entries)
}

/// Additive cost `W2 + gamma * d_G`.
pub fn cost_matrix_v1(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
) -> Result<CostMatrix> {
    vgmm_cost_matrix(rho0, rho1, gamma, ApproachId::Linear)
}

/// Squared cost `W2^2 + gamma * d_G^2`.
pub fn cost_matrix_v2(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
) -> Result<CostMatrix> {
    vgmm_cost_matrix(rho0, rho1, gamma, ApproachId::Quadratic)
}

fn coupling_mask(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    s: &dyn CouplingStrategy,
) -> Mask {
    Mask::from_fn(rho0.len(), rho1.len(), |i, j| {
        s.channel_allowed(
            &rho0.graph,
            rho0.components[i].channel,
            rho1.components[j].channel,
        )
    })
}

/// Vector mixture distance under the selected strategy. Only the restricted
/// strategy can report `Infeasible`.
pub fn vgmm_distance(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    id: ApproachId,
) -> Result<LpOutcome<TransportResult>> {
    check_pair(rho0, rho1)?;
    let s = strategy(id);
    let cost = vgmm_cost_matrix(rho0, rho1, gamma, id)?;
    let outcome = if s.can_be_infeasible() {
        let mask = coupling_mask(rho0, rho1, s);
        solve_transport_masked(&cost, &rho0.weights(), &rho1.weights(), &mask)?
    } else {
        LpOutcome::Solved(solve_transport(&cost, &rho0.weights(), &rho1.weights())?)
    };
    Ok(match outcome {
        LpOutcome::Solved(sol) => LpOutcome::Solved(TransportResult {
            distance: s.distance_from_objective(sol.value),
            plan: sol.plan,
            cost,
        }),
        LpOutcome::Infeasible => LpOutcome::Infeasible,
    })
}

/// Interpolant at time `t` built from a precomputed optimal plan.
pub fn vgmm_interpolate_plan(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    plan: &Coupling,
    t: f64,
    id: ApproachId,
) -> Result<VectorInterpolant> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let s = strategy(id);
    let graph = &rho0.graph;
    let mut components = Vec::new();
    for (i, c0) in rho0.components.iter().enumerate() {
        for (j, c1) in rho1.components.iter().enumerate() {
            let mass = plan.get(i, j);
            if mass > 0.0 {
                components.push(InterpolantComponent {
                    weight: mass,
                    gaussian: gaussian_interpolate(&c0.gaussian, &c1.gaussian, t)?,
                    position: s.position(graph, c0.channel, c1.channel, t)?,
                });
            }
        }
    }
    Ok(VectorInterpolant {
        graph: graph.clone(),
        dim: rho0.dim,
        components,
    })
}

/// Displacement interpolation under the selected strategy; solves the LP
/// first and may therefore report `Infeasible` for the restricted strategy.
pub fn vgmm_interpolate(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    t: f64,
    gamma: f64,
    id: ApproachId,
) -> Result<LpOutcome<VectorInterpolant>> {
    Ok(match vgmm_distance(rho0, rho1, gamma, id)? {
        LpOutcome::Solved(result) => {
            LpOutcome::Solved(vgmm_interpolate_plan(rho0, rho1, &result.plan, t, id)?)
        }
        LpOutcome::Infeasible => LpOutcome::Infeasible,
    })
}

/// Distance between two interpolants of the same pair, using the strategy's
/// fractional-position cost extension.
pub fn vgmm_interpolant_distance(
    a: &VectorInterpolant,
    b: &VectorInterpolant,
    gamma: f64,
    id: ApproachId,
) -> Result<LpOutcome<TransportResult>> {
    if a.graph != b.graph {
        return Err(Error::GraphMismatch);
    }
    let s = strategy(id);
    let graph = &a.graph;
    let mut entries = Vec::with_capacity(a.components.len() * b.components.len());
    for c0 in &a.components {
        for c1 in &b.components {
            entries.push(s.interpolant_cost(graph, gamma, c0, c1)?);
        }
    }
    let cost = CostMatrix::new(a.components.len(), b.components.len(), entries)?;
    let wa: Vec<f64> = a.components.iter().map(|c| c.weight).collect();
    let wb: Vec<f64> = b.components.iter().map(|c| c.weight).collect();
    let outcome = if s.can_be_infeasible() {
        let mask = Mask::from_fn(wa.len(), wb.len(), |i, j| {
            s.interpolant_allowed(graph, &a.components[i].position, &b.components[j].position)
        });
        solve_transport_masked(&cost, &wa, &wb, &mask)?
    } else {
        LpOutcome::Solved(solve_transport(&cost, &wa, &wb)?)
    };
    Ok(match outcome {
        LpOutcome::Solved(sol) => LpOutcome::Solved(TransportResult {
            distance: s.distance_from_objective(sol.value),
            plan: sol.plan,
            cost,
        }),
        LpOutcome::Infeasible => LpOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests;
