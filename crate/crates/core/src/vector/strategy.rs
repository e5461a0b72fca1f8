//! The three interchangeable coupling strategies for vector mixtures.
//!
//! Every strategy answers the same questions — what does moving one Gaussian
//! between two channels cost, which channel pairs may be coupled at all, how
//! does the LP objective translate into a distance, and where does a moving
//! component sit at time `t` — so they share one trait and are selected at
//! runtime through the registry.

use crate::error::{Error, Result};
use crate::gaussian::{w2_gaussian, Gaussian};
use crate::graph::{ChannelGraph, GraphPosition};

use super::InterpolantComponent;

/// Runtime identifier for a coupling strategy; the numeric values are the
/// CLI-facing `--approach` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproachId {
    /// Couplings restricted to identical or adjacent channels; squared W2
    /// cost; a pseudo-distance that can be infeasible.
    Restricted,
    /// Additive cost `W2 + gamma * d_G`; linear objective.
    Linear,
    /// Squared cost `W2^2 + gamma * d_G^2`; square-rooted objective.
    Quadratic,
}

impl ApproachId {
    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            0 => Some(Self::Restricted),
            1 => Some(Self::Linear),
            2 => Some(Self::Quadratic),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Restricted => 0,
            Self::Linear => 1,
            Self::Quadratic => 2,
        }
    }
}

impl std::fmt::Display for ApproachId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Common interface of the coupling strategies.
pub trait CouplingStrategy: Send + Sync {
    fn id(&self) -> ApproachId;

    fn name(&self) -> &'static str;

    /// Cost entry between two channel-located Gaussians.
    fn component_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        g0: &Gaussian,
        q0: usize,
        g1: &Gaussian,
        q1: usize,
    ) -> Result<f64>;

    /// Whether mass may move between the two channels at all.
    fn channel_allowed(&self, _graph: &ChannelGraph, _q0: usize, _q1: usize) -> bool {
        true
    }

    /// Strategies that restrict couplings can render the LP infeasible.
    fn can_be_infeasible(&self) -> bool {
        false
    }

    /// Distance reported for a given LP objective value.
    fn distance_from_objective(&self, objective: f64) -> f64;

    /// Channel position of a coupled pair at time `t`.
    fn position(
        &self,
        graph: &ChannelGraph,
        q0: usize,
        q1: usize,
        t: f64,
    ) -> Result<GraphPosition>;

    /// Extended cost between interpolant components sitting at fractional
    /// positions; used to evaluate distances between geodesic points.
    fn interpolant_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        c0: &InterpolantComponent,
        c1: &InterpolantComponent,
    ) -> Result<f64>;

    /// Coupling restriction extended to fractional positions.
    fn interpolant_allowed(
        &self,
        _graph: &ChannelGraph,
        _p0: &GraphPosition,
        _p1: &GraphPosition,
    ) -> bool {
        true
    }
}

/// Approach 0: keep the plain squared-W2 cost but forbid couplings between
/// channels that are neither identical nor adjacent.
pub struct RestrictedCoupling;

/// Approach 1: price channel movement linearly into the cost.
pub struct LinearGraphCost;

/// Approach 2: price squared channel movement, matching the squared W2 term.
pub struct QuadraticGraphCost;

impl CouplingStrategy for RestrictedCoupling {
    fn id(&self) -> ApproachId {
        ApproachId::Restricted
    }

    fn name(&self) -> &'static str {
        "restricted-coupling"
    }

    fn component_cost(
        &self,
        _graph: &ChannelGraph,
        _gamma: f64,
        g0: &Gaussian,
        _q0: usize,
        g1: &Gaussian,
        _q1: usize,
    ) -> Result<f64> {
        let d = w2_gaussian(g0, g1)?;
        Ok(d * d)
    }

    fn channel_allowed(&self, graph: &ChannelGraph, q0: usize, q1: usize) -> bool {
        q0 == q1 || graph.has_edge(q0, q1)
    }

    fn can_be_infeasible(&self) -> bool {
        true
    }

    fn distance_from_objective(&self, objective: f64) -> f64 {
        objective.max(0.0).sqrt()
    }

    fn position(
        &self,
        _graph: &ChannelGraph,
        q0: usize,
        q1: usize,
        t: f64,
    ) -> Result<GraphPosition> {
        // Direct blend of the two channel indicators.
        Ok(GraphPosition::blend(q0, q1, t))
    }

    fn interpolant_cost(
        &self,
        _graph: &ChannelGraph,
        _gamma: f64,
        c0: &InterpolantComponent,
        c1: &InterpolantComponent,
    ) -> Result<f64> {
        let d = w2_gaussian(&c0.gaussian, &c1.gaussian)?;
        Ok(d * d)
    }

    fn interpolant_allowed(
        &self,
        graph: &ChannelGraph,
        p0: &GraphPosition,
        p1: &GraphPosition,
    ) -> bool {
        // Every channel in one support must be identical or adjacent to
        // every channel in the other; for pure nodes this is the original
        // restriction.
        p0.support().iter().all(|&x| {
            p1.support()
                .iter()
                .all(|&y| x == y || graph.has_edge(x, y))
        })
    }
}

impl CouplingStrategy for LinearGraphCost {
    fn id(&self) -> ApproachId {
        ApproachId::Linear
    }

    fn name(&self) -> &'static str {
        "linear-graph-cost"
    }

    fn component_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        g0: &Gaussian,
        q0: usize,
        g1: &Gaussian,
        q1: usize,
    ) -> Result<f64> {
        Ok(w2_gaussian(g0, g1)? + gamma * graph.distance(q0, q1)?)
    }

    // The objective is already a length; no square root.
    fn distance_from_objective(&self, objective: f64) -> f64 {
        objective.max(0.0)
    }

    fn position(
        &self,
        graph: &ChannelGraph,
        q0: usize,
        q1: usize,
        t: f64,
    ) -> Result<GraphPosition> {
        let (_, path) = graph.shortest_path(q0, q1)?;
        graph.path_interpolate(&path, t)
    }

    fn interpolant_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        c0: &InterpolantComponent,
        c1: &InterpolantComponent,
    ) -> Result<f64> {
        let w2 = w2_gaussian(&c0.gaussian, &c1.gaussian)?;
        let dg = graph.fractional_distance(&c0.position, &c1.position)?;
        Ok(w2 + gamma * dg)
    }
}

impl CouplingStrategy for QuadraticGraphCost {
    fn id(&self) -> ApproachId {
        ApproachId::Quadratic
    }

    fn name(&self) -> &'static str {
        "quadratic-graph-cost"
    }

    fn component_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        g0: &Gaussian,
        q0: usize,
        g1: &Gaussian,
        q1: usize,
    ) -> Result<f64> {
        let w2 = w2_gaussian(g0, g1)?;
        let dg = graph.distance(q0, q1)?;
        Ok(w2 * w2 + gamma * dg * dg)
    }

    fn distance_from_objective(&self, objective: f64) -> f64 {
        objective.max(0.0).sqrt()
    }

    fn position(
        &self,
        graph: &ChannelGraph,
        q0: usize,
        q1: usize,
        t: f64,
    ) -> Result<GraphPosition> {
        let (_, path) = graph.shortest_path(q0, q1)?;
        graph.path_interpolate(&path, t)
    }

    fn interpolant_cost(
        &self,
        graph: &ChannelGraph,
        gamma: f64,
        c0: &InterpolantComponent,
        c1: &InterpolantComponent,
    ) -> Result<f64> {
        let w2 = w2_gaussian(&c0.gaussian, &c1.gaussian)?;
        let dg = graph.fractional_distance(&c0.position, &c1.position)?;
        Ok(w2 * w2 + gamma * dg * dg)
    }
}

/// Registry of the available strategies, indexed by [`ApproachId`].
pub static STRATEGIES: [&dyn CouplingStrategy; 3] =
    [&RestrictedCoupling, &LinearGraphCost, &QuadraticGraphCost];

/// Look up a strategy by id.
pub fn strategy(id: ApproachId) -> &'static dyn CouplingStrategy {
    STRATEGIES[id.index() as usize]
}

/// Parse a CLI-style approach index.
pub fn strategy_by_index(index: u8) -> Result<&'static dyn CouplingStrategy> {
    ApproachId::from_index(index)
        .map(strategy)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown approach {index}, expected 0|1|2")))
}
