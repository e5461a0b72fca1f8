//! The distance / interpolate / fit commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use gmmot::fit::{fit_gmm_em, EmOptions};
use gmmot::graph::ChannelGraph;
use gmmot::io::{interpolant_to_json, load_model, model_to_json, save_model, Model};
use gmmot::mixture::{
    gmm_distance, gmm_interpolate_plan, unbalanced_gmm_interpolate, unbalanced_gmm_solve,
    MixtureModel, TransportResult,
};
use gmmot::raster::{
    image_to_channels, rasterize, render_mixture, render_model, render_unbalanced_interpolant,
    write_frames, write_strip, DensityGrid, GridAxis, GridSpec,
};
use gmmot::transport::LpOutcome;
use gmmot::vector::{
    strategy_by_index, unbalanced_vgmm_interpolate, unbalanced_vgmm_solve, vgmm_distance,
    vgmm_interpolate_plan, VectorMixtureModel,
};

use crate::{CliError, CliResult, TransportArgs};

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

/// Load both inputs, fitting from images when requested; balanced commands
/// normalize fitted masses.
fn load_pair(args: &TransportArgs) -> CliResult<(Model, Model)> {
    let load = |path: &Path, seed: u64| -> CliResult<Model> {
        if args.fit {
            let model = fit_image(path, args.k, seed)?;
            if args.unbalanced {
                Ok(model)
            } else {
                Ok(model.normalized()?)
            }
        } else {
            Ok(load_model(path)?)
        }
    };
    let m0 = load(&args.input0, args.seed)?;
    let m1 = load(&args.input1, args.seed.wrapping_add(1))?;
    if !args.unbalanced {
        m0.validate_balanced()?;
        m1.validate_balanced()?;
    }
    Ok((m0, m1))
}

/// Fit one vector mixture per image channel. Grayscale images get a single
/// channel; RGB images get the three-channel chain red - green - blue.
pub fn fit_image(path: &Path, k: usize, seed: u64) -> CliResult<Model> {
    let image = image_to_channels(path)?;
    let channel_count = image.channels.len();
    let graph = match channel_count {
        1 => ChannelGraph::unit(1, &[])?,
        3 => ChannelGraph::unit(3, &[(0, 1), (1, 2)])?,
        n => {
            return Err(CliError::Input(format!(
                "expected a 1- or 3-channel image, got {n} channels"
            )))
        }
    };
    let mut components = Vec::new();
    for (m, samples) in image.channels.iter().enumerate() {
        let Some(samples) = samples else {
            continue; // channel carries no mass
        };
        let opts = EmOptions {
            seed: seed.wrapping_add(m as u64),
            ..Default::default()
        };
        let fitted = fit_gmm_em(samples, k, &opts)?;
        for (w, g) in fitted.mixture.components() {
            components.push((*w, g.clone(), m));
        }
    }
    Ok(Model::Vgmm(VectorMixtureModel::new(graph, components)?))
}

// ---------------------------------------------------------------------------
// distance
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DistanceJson {
    distance: f64,
    plan: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
}

fn result_json(result: &TransportResult) -> DistanceJson {
    let plan = (0..result.plan.rows())
        .map(|i| (0..result.plan.cols()).map(|j| result.plan.get(i, j)).collect())
        .collect();
    let cost = (0..result.cost.rows())
        .map(|i| (0..result.cost.cols()).map(|j| result.cost.get(i, j)).collect())
        .collect();
    DistanceJson {
        distance: result.distance,
        plan,
        cost,
    }
}

fn write_result(out: &Path, result: &TransportResult) -> CliResult<()> {
    fs::create_dir_all(out).map_err(gmmot::Error::from)?;
    let text = serde_json::to_string_pretty(&result_json(result))
        .map_err(gmmot::Error::from)?;
    fs::write(out.join("result.json"), text + "\n").map_err(gmmot::Error::from)?;
    Ok(())
}

/// Solve the transport problem selected by the inputs and flags.
fn solve(args: &TransportArgs, m0: &Model, m1: &Model) -> CliResult<TransportResult> {
    let gamma_source = args.gamma_source.unwrap_or(args.gamma);
    match (m0, m1) {
        (Model::Gmm(a), Model::Gmm(b)) => {
            if args.unbalanced {
                Ok(unbalanced_gmm_solve(a, b, gamma_source)?.result)
            } else {
                Ok(gmm_distance(a, b)?)
            }
        }
        (Model::Vgmm(a), Model::Vgmm(b)) => {
            if args.unbalanced {
                Ok(unbalanced_vgmm_solve(a, b, args.gamma, gamma_source)?.result)
            } else {
                let strategy = strategy_by_index(args.approach)?;
                match vgmm_distance(a, b, args.gamma, strategy.id())? {
                    LpOutcome::Solved(result) => Ok(result),
                    LpOutcome::Infeasible => Err(CliError::Infeasible),
                }
            }
        }
        _ => Err(CliError::Input(
            "inputs mix scalar and vector models; fit or convert them to one kind".into(),
        )),
    }
}

pub fn distance(args: &TransportArgs) -> CliResult<()> {
    let (m0, m1) = load_pair(args)?;
    let result = solve(args, &m0, &m1)?;
    println!("distance = {}", result.distance);
    println!("squared  = {}", result.distance * result.distance);
    write_result(&args.out, &result)?;
    println!("wrote {}", args.out.join("result.json").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// interpolate
// ---------------------------------------------------------------------------

/// Axis ranges covering every component out to four standard deviations.
fn auto_grid(models: &[&Model]) -> CliResult<GridSpec> {
    let dim = models[0].dim();
    if dim == 0 || dim > 2 {
        return Err(CliError::Input(format!(
            "interpolation frames need 1D or 2D models, got dimension {dim}"
        )));
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut visit = |g: &gmmot::gaussian::Gaussian| {
        // trace bounds the largest eigenvalue, so this radius is safe.
        let radius = 4.0 * g.covariance().trace().sqrt();
        for d in 0..dim {
            lo[d] = lo[d].min(g.mean()[d] - radius);
            hi[d] = hi[d].max(g.mean()[d] + radius);
        }
    };
    for model in models {
        match model {
            Model::Gmm(m) => m.components().iter().for_each(|(_, g)| visit(g)),
            Model::Vgmm(m) => m.components().iter().for_each(|c| visit(&c.gaussian)),
        }
    }
    let cells = if dim == 1 { 256 } else { 64 };
    Ok(GridSpec::new(
        (0..dim)
            .map(|d| GridAxis {
                lo: lo[d],
                hi: hi[d],
                cells,
            })
            .collect(),
    )?)
}

pub fn interpolate(args: &TransportArgs, steps: usize, grid: Option<&str>) -> CliResult<()> {
    if steps == 0 {
        return Err(CliError::Input("--steps must be at least 1".into()));
    }
    let (m0, m1) = load_pair(args)?;
    let spec = match grid {
        Some(text) => GridSpec::parse(text)?,
        None => auto_grid(&[&m0, &m1])?,
    };
    fs::create_dir_all(&args.out).map_err(gmmot::Error::from)?;

    let gamma_source = args.gamma_source.unwrap_or(args.gamma);
    let mut grids = Vec::with_capacity(steps + 1);
    // Unbalanced runs render the source layer as a second strip.
    let mut source_grids: Option<Vec<DensityGrid>> = None;
    let mut step_jsons: Vec<String> = Vec::with_capacity(steps + 1);

    match (&m0, &m1) {
        (Model::Gmm(a), Model::Gmm(b)) if !args.unbalanced => {
            let result = gmm_distance(a, b)?;
            write_result(&args.out, &result)?;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let mixture = gmm_interpolate_plan(a, b, &result.plan, t)?;
                step_jsons.push(model_to_json(&Model::Gmm(mixture.clone()))?);
                // Endpoint frames rasterize the inputs themselves so they
                // match byte for byte.
                let comps = match i {
                    0 => render_model(&m0),
                    _ if i == steps => render_model(&m1),
                    _ => render_mixture(&mixture),
                };
                grids.push(rasterize(&comps, 1, &spec)?);
            }
        }
        (Model::Gmm(a), Model::Gmm(b)) => {
            let solved = unbalanced_gmm_solve(a, b, gamma_source)?;
            write_result(&args.out, &solved.result)?;
            let mut sources = Vec::with_capacity(steps + 1);
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let (original, source) = unbalanced_gmm_interpolate(a, b, gamma_source, t)?;
                step_jsons.push(unbalanced_step_json(t, &original, &source)?);
                let comps = match i {
                    0 => render_mixture(a),
                    _ if i == steps => render_mixture(b),
                    _ => render_mixture(&original),
                };
                grids.push(rasterize(&comps, 1, &spec)?);
                sources.push(rasterize(&render_mixture(&source), 1, &spec)?);
            }
            source_grids = Some(sources);
        }
        (Model::Vgmm(a), Model::Vgmm(b)) if !args.unbalanced => {
            let strategy = strategy_by_index(args.approach)?;
            let result = match vgmm_distance(a, b, args.gamma, strategy.id())? {
                LpOutcome::Solved(result) => result,
                LpOutcome::Infeasible => return Err(CliError::Infeasible),
            };
            write_result(&args.out, &result)?;
            let channels = a.graph().node_count();
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let interp = vgmm_interpolate_plan(a, b, &result.plan, t, strategy.id())?;
                step_jsons.push(interpolant_to_json(&interp, t)?);
                let comps = match i {
                    0 => render_model(&m0),
                    _ if i == steps => render_model(&m1),
                    _ => gmmot::raster::render_interpolant(&interp)?,
                };
                grids.push(rasterize(&comps, channels, &spec)?);
            }
        }
        (Model::Vgmm(a), Model::Vgmm(b)) => {
            let solved = unbalanced_vgmm_solve(a, b, args.gamma, gamma_source)?;
            write_result(&args.out, &solved.result)?;
            let channels = a.graph().node_count();
            let mut sources = Vec::with_capacity(steps + 1);
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let interp =
                    unbalanced_vgmm_interpolate(a, b, args.gamma, gamma_source, t)?;
                step_jsons.push(interpolant_to_json(&interp.interpolant, t)?);
                let (orig_comps, src_comps) = render_unbalanced_interpolant(&interp)?;
                let comps = match i {
                    0 => render_model(&m0),
                    _ if i == steps => render_model(&m1),
                    _ => orig_comps,
                };
                grids.push(rasterize(&comps, channels, &spec)?);
                sources.push(rasterize(&src_comps, 1, &spec)?);
            }
            source_grids = Some(sources);
        }
        _ => {
            return Err(CliError::Input(
                "inputs mix scalar and vector models; fit or convert them to one kind".into(),
            ))
        }
    }

    for (i, text) in step_jsons.iter().enumerate() {
        let path = args.out.join(format!("model_{i:03}.json"));
        fs::write(path, format!("{text}\n")).map_err(gmmot::Error::from)?;
    }
    let frame_count = match source_grids {
        Some(sources) => {
            // One normalization across both strips keeps layers comparable.
            let gmax = grids
                .iter()
                .chain(sources.iter())
                .map(|g| g.max_value())
                .fold(0.0f64, f64::max);
            let frames = write_strip(&grids, gmax, &args.out, "frame")?;
            write_strip(&sources, gmax, &args.out, "source")?;
            frames.len()
        }
        None => write_frames(&grids, &args.out)?.len(),
    };
    println!(
        "wrote {frame_count} frames and step models to {}",
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct UnbalancedStepJson {
    #[serde(rename = "type")]
    kind: &'static str,
    t: f64,
    original: serde_json::Value,
    source: Option<serde_json::Value>,
}

fn unbalanced_step_json(
    t: f64,
    original: &MixtureModel,
    source: &MixtureModel,
) -> CliResult<String> {
    let to_value = |m: &MixtureModel| -> CliResult<serde_json::Value> {
        let text = model_to_json(&Model::Gmm(m.clone()))?;
        Ok(serde_json::from_str(&text).map_err(gmmot::Error::from)?)
    };
    let raw = UnbalancedStepJson {
        kind: "unbalanced-step",
        t,
        original: to_value(original)?,
        source: if source.is_empty() {
            None
        } else {
            Some(to_value(source)?)
        },
    };
    Ok(serde_json::to_string_pretty(&raw).map_err(gmmot::Error::from)?)
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn fit(image: &Path, k: usize, seed: u64, out: &Path) -> CliResult<()> {
    let model = fit_image(image, k, seed)?;
    fs::create_dir_all(out).map_err(gmmot::Error::from)?;
    let path: PathBuf = out.join("model.json");
    save_model(&path, &model)?;
    if let Model::Vgmm(m) = &model {
        println!(
            "fitted {} components over {} channel(s); total mass {}",
            m.len(),
            m.graph().node_count(),
            m.total_mass()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
