//! Model persistence.
//!
//! Schema:
//!
//! ```json
//! {
//!   "type": "gmm" | "vgmm",
//!   "dim": 2,
//!   "graph": {"nodes": 3, "edges": [[0,1],[1,2]], "lengths": [1.0, 1.0]} | null,
//!   "components": [
//!     {"weight": 0.5, "mean": [0.0, 1.0], "cov": [[1.0, 0.0], [0.0, 1.0]], "channel": 0}
//!   ]
//! }
//! ```
//!
//! `graph` and `channel` are present exactly for `"vgmm"`. Floats are
//! written in shortest round-trip decimal form, so `load(save(m)) == m`
//! holds bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::graph::ChannelGraph;
use crate::linalg::SymmetricMatrix;
use crate::mixture::MixtureModel;
use crate::vector::{VectorInterpolant, VectorMixtureModel};

/// A persisted model: scalar or vector mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gmm(MixtureModel),
    Vgmm(VectorMixtureModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Gmm(m) => m.dim(),
            Model::Vgmm(m) => m.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Model::Gmm(m) => m.total_mass(),
            Model::Vgmm(m) => m.total_mass(),
        }
    }

    /// Error unless the total mass is 1 within the balance tolerance.
    pub fn validate_balanced(&self) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() > crate::mixture::BALANCE_TOL {
            return Err(Error::NotNormalized { total });
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<Model> {
        Ok(match self {
            Model::Gmm(m) => Model::Gmm(m.normalized()?),
            Model::Vgmm(m) => Model::Vgmm(m.normalized()?),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    #[serde(rename = "type")]
    kind: String,
    dim: usize,
    graph: Option<ChannelGraph>,
    components: Vec<ComponentJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentJson {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<usize>,
}

fn schema_err(path: String, message: impl Into<String>) -> Error {
    Error::Schema {
        path,
        message: message.into(),
    }
}

fn component_gaussian(idx: usize, c: &ComponentJson, dim: usize) -> Result<(f64, Gaussian)> {
    let at = |field: &str| format!("components[{idx}].{field}");
    if c.mean.len() != dim {
        return Err(schema_err(
            at("mean"),
            format!("expected length {dim}, got {}", c.mean.len()),
        ));
    }
    if c.cov.len() != dim || c.cov.iter().any(|row| row.len() != dim) {
        return Err(schema_err(at("cov"), format!("expected {dim}x{dim} matrix")));
    }
    let flat: Vec<f64> = c.cov.iter().flatten().copied().collect();
    let cov = SymmetricMatrix::new(dim, flat)
        .map_err(|e| schema_err(at("cov"), e.to_string()))?;
    let gaussian = Gaussian::new(c.mean.clone(), cov)
        .map_err(|e| schema_err(at("cov"), e.to_string()))?;
    if !(c.weight > 0.0) {
        return Err(schema_err(at("weight"), "must be positive"));
    }
    Ok((c.weight, gaussian))
}

/// Deserialize and validate a model from JSON text.
pub fn model_from_json(text: &str) -> Result<Model> {
    let raw: ModelJson = serde_json::from_str(text)?;
    match raw.kind.as_str() {
        "gmm" => {
            if raw.graph.is_some() {
                return Err(schema_err("graph".into(), "must be null for type \"gmm\""));
            }
            let mut comps = Vec::with_capacity(raw.components.len());
            for (idx, c) in raw.components.iter().enumerate() {
                if c.channel.is_some() {
                    return Err(schema_err(
                        format!("components[{idx}].channel"),
                        "not allowed for type \"gmm\"",
                    ));
                }
                comps.push(component_gaussian(idx, c, raw.dim)?);
            }
            Ok(Model::Gmm(MixtureModel::with_dim(raw.dim, comps)?))
        }
        "vgmm" => {
            let graph = raw
                .graph
                .ok_or_else(|| schema_err("graph".into(), "required for type \"vgmm\""))?;
            let mut comps = Vec::with_capacity(raw.components.len());
            for (idx, c) in raw.components.iter().enumerate() {
                let channel = c.channel.ok_or_else(|| {
                    schema_err(format!("components[{idx}].channel"), "required for \"vgmm\"")
                })?;
                let (w, g) = component_gaussian(idx, c, raw.dim)?;
                comps.push((w, g, channel));
            }
            Ok(Model::Vgmm(VectorMixtureModel::new(graph, comps)?))
        }
        other => Err(schema_err(
            "type".into(),
            format!("expected \"gmm\" or \"vgmm\", got {other:?}"),
        )),
    }
}

/// Serialize a model to pretty JSON.
pub fn model_to_json(model: &Model) -> Result<String> {
    let raw = match model {
        Model::Gmm(m) => ModelJson {
            kind: "gmm".into(),
            dim: m.dim(),
            graph: None,
            components: m
                .components()
                .iter()
                .map(|(w, g)| ComponentJson {
                    weight: *w,
                    mean: g.mean().to_vec(),
                    cov: g.covariance().rows(),
                    channel: None,
                })
                .collect(),
        },
        Model::Vgmm(m) => ModelJson {
            kind: "vgmm".into(),
            dim: m.dim(),
            graph: Some(m.graph().clone()),
            components: m
                .components()
                .iter()
                .map(|c| ComponentJson {
                    weight: c.weight,
                    mean: c.gaussian.mean().to_vec(),
                    cov: c.gaussian.covariance().rows(),
                    channel: Some(c.channel),
                })
                .collect(),
        },
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    model_from_json(&text)
}

/// Interpolant snapshot: like a model but with fractional channel positions.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolantJson {
    #[serde(rename = "type")]
    kind: String,
    t: f64,
    dim: usize,
    graph: ChannelGraph,
    components: Vec<InterpolantComponentJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolantComponentJson {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    position: crate::graph::GraphPosition,
}

/// Serialize an interpolation snapshot at time `t`.
pub fn interpolant_to_json(interp: &VectorInterpolant, t: f64) -> Result<String> {
    let raw = InterpolantJson {
        kind: "vgmm-interpolant".into(),
        t,
        dim: interp.dim(),
        graph: interp.graph().clone(),
        components: interp
            .components()
            .iter()
            .map(|c| InterpolantComponentJson {
                weight: c.weight,
                mean: c.gaussian.mean().to_vec(),
                cov: c.gaussian.covariance().rows(),
                position: c.position,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}
