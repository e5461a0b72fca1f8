//! Unbalanced vector mixtures through an auxiliary source channel.
//!
//! The graph gains one extra channel connected to every original channel.
//! The lighter side carries the mass deficit as a single implicit node whose
//! coupling cells are priced flat at `gamma_source` per unit mass; the
//! original block keeps the quadratic-strategy costs on the original graph,
//! so the source channel never shortcuts geometry between real channels.

use crate::error::{Error, Result};
use crate::graph::{ChannelGraph, GraphPosition};
use crate::mixture::{SourceSide, TransportResult, BALANCE_TOL};
use crate::transport::{solve_transport, CostMatrix};

use super::{
    vgmm_cost_matrix, ApproachId, InterpolantComponent, VectorInterpolant, VectorMixtureModel,
};

/// Unbalanced solve with plan bookkeeping.
#[derive(Debug, Clone)]
pub struct UnbalancedVectorResult {
    pub result: TransportResult,
    pub side: SourceSide,
    pub deficit: f64,
}

/// Interpolation of an unbalanced vector pair: components live on the
/// extended graph whose last channel is the source layer.
#[derive(Debug, Clone)]
pub struct UnbalancedVectorInterpolation {
    pub interpolant: VectorInterpolant,
    pub source_channel: usize,
}

impl UnbalancedVectorInterpolation {
    /// Total mass on the original channels.
    pub fn original_mass(&self) -> f64 {
        self.interpolant
            .channel_masses()
            .iter()
            .take(self.source_channel)
            .sum()
    }

    /// Mass currently sitting in the source layer.
    pub fn source_mass(&self) -> f64 {
        self.interpolant.channel_masses()[self.source_channel]
    }
}

/// Original graph plus one source channel adjacent to every channel.
pub fn extend_with_source(graph: &ChannelGraph) -> Result<ChannelGraph> {
    let m = graph.node_count();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut lengths: Vec<f64> = Vec::new();
    for ((u, w), len) in graph.edges() {
        edges.push((u, w));
        lengths.push(len);
    }
    for q in 0..m {
        edges.push((q, m));
        lengths.push(1.0);
    }
    ChannelGraph::with_lengths(m + 1, &edges, &lengths)
}

pub fn unbalanced_vgmm_distance(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    gamma_source: f64,
) -> Result<TransportResult> {
    Ok(unbalanced_vgmm_solve(rho0, rho1, gamma, gamma_source)?.result)
}

pub fn unbalanced_vgmm_solve(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    gamma_source: f64,
) -> Result<UnbalancedVectorResult> {
    if rho0.graph() != rho1.graph() {
        return Err(Error::GraphMismatch);
    }
    if gamma_source < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "source price must be nonnegative, got {gamma_source}"
        )));
    }
    let (m0, m1) = (rho0.total_mass(), rho1.total_mass());
    if m0 <= 0.0 || m1 <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let base = vgmm_cost_matrix(rho0, rho1, gamma, ApproachId::Quadratic)?;
    let (n0, n1) = (rho0.len(), rho1.len());
    let deficit = (m0 - m1).abs();
    let side = if deficit <= BALANCE_TOL * f64::max(1.0, m0.max(m1)) {
        SourceSide::None
    } else if m0 < m1 {
        SourceSide::First
    } else {
        SourceSide::Second
    };

    let (cost, p0, p1) = match side {
        SourceSide::None => (base, rho0.weights(), rho1.weights()),
        SourceSide::First => {
            let mut entries = base.entries().to_vec();
            entries.extend(std::iter::repeat(gamma_source).take(n1));
            let mut p0 = rho0.weights();
            p0.push(deficit);
            (CostMatrix::new(n0 + 1, n1, entries)?, p0, rho1.weights())
        }
        SourceSide::Second => {
            let mut entries = Vec::with_capacity(n0 * (n1 + 1));
            for i in 0..n0 {
                entries.extend_from_slice(&base.entries()[i * n1..(i + 1) * n1]);
                entries.push(gamma_source);
            }
            let mut p1 = rho1.weights();
            p1.push(deficit);
            (CostMatrix::new(n0, n1 + 1, entries)?, rho0.weights(), p1)
        }
    };

    let sol = solve_transport(&cost, &p0, &p1)?;
    Ok(UnbalancedVectorResult {
        result: TransportResult {
            distance: sol.value.max(0.0).sqrt(),
            plan: sol.plan,
            cost,
        },
        side,
        deficit,
    })
}

/// Interpolation at time `t` of the extended balanced problem.
///
/// Balanced cells follow the quadratic-strategy geodesics on the original
/// graph; source cells keep their partner's Gaussian shape and slide along
/// the extended edge between the partner's channel and the source channel.
pub fn unbalanced_vgmm_interpolate(
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    gamma_source: f64,
    t: f64,
) -> Result<UnbalancedVectorInterpolation> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let solved = unbalanced_vgmm_solve(rho0, rho1, gamma, gamma_source)?;
    let plan = &solved.result.plan;
    let graph = rho0.graph();
    let extended = extend_with_source(graph)?;
    let source_channel = graph.node_count();
    let quadratic = super::strategy(ApproachId::Quadratic);

    let mut components = Vec::new();
    for (i, c0) in rho0.components().iter().enumerate() {
        for (j, c1) in rho1.components().iter().enumerate() {
            let mass = plan.get(i, j);
            if mass > 0.0 {
                components.push(InterpolantComponent {
                    weight: mass,
                    gaussian: crate::gaussian::gaussian_interpolate(
                        &c0.gaussian,
                        &c1.gaussian,
                        t,
                    )?,
                    position: quadratic.position(graph, c0.channel, c1.channel, t)?,
                });
            }
        }
    }
    match solved.side {
        SourceSide::None => {}
        SourceSide::First => {
            // Source feeds the second mixture: mass leaves the source layer.
            let src_row = rho0.len();
            for (j, c1) in rho1.components().iter().enumerate() {
                let mass = plan.get(src_row, j);
                if mass > 0.0 {
                    components.push(InterpolantComponent {
                        weight: mass,
                        gaussian: c1.gaussian.clone(),
                        position: GraphPosition::blend(source_channel, c1.channel, t),
                    });
                }
            }
        }
        SourceSide::Second => {
            // Surplus of the first mixture drains into the source layer.
            let src_col = rho1.len();
            for (i, c0) in rho0.components().iter().enumerate() {
                let mass = plan.get(i, src_col);
                if mass > 0.0 {
                    components.push(InterpolantComponent {
                        weight: mass,
                        gaussian: c0.gaussian.clone(),
                        position: GraphPosition::blend(c0.channel, source_channel, t),
                    });
                }
            }
        }
    }

    Ok(UnbalancedVectorInterpolation {
        interpolant: VectorInterpolant::new(extended, rho0.dim(), components),
        source_channel,
    })
}
