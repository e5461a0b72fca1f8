//! Named demonstration recipes: fixture models, interpolation frame strips
//! and qualitative checks on plan structure and channel occupancy.
//!
//! Each recipe is a trait object in a registry, selected by name at runtime.

use std::fs;
use std::path::Path;

use gmmot::gaussian::Gaussian;
use gmmot::graph::ChannelGraph;
use gmmot::io::{model_to_json, Model};
use gmmot::mixture::{unbalanced_gmm_interpolate, unbalanced_gmm_solve, MixtureModel};
use gmmot::raster::{
    rasterize, render_mixture, render_vector_mixture, write_frames, write_strip, GridSpec,
};
use gmmot::transport::LpOutcome;
use gmmot::vector::{
    vgmm_distance, vgmm_interpolate_plan, ApproachId, VectorMixtureModel,
};

use crate::{CliError, CliResult};

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            pass,
            detail: detail.into(),
        }
    }
}

struct Ctx<'a> {
    steps: usize,
    out: &'a Path,
}

trait Recipe: Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>>;
}

static RECIPES: [&dyn Recipe; 8] = [
    &OneDimTwoChannels { linear: true },
    &OneDimTwoChannels { linear: false },
    &OneDimThreeChannels { full: false },
    &OneDimThreeChannels { full: true },
    &TwoDimGammaRouting { large: true },
    &TwoDimGammaRouting { large: false },
    &UnbalancedMerge,
    &RestrictedSwap,
];

pub fn run(name: &str, steps: usize, out: &Path) -> CliResult<()> {
    if name == "list" {
        for r in RECIPES {
            println!("{:22} {}", r.name(), r.description());
        }
        return Ok(());
    }
    let recipe = RECIPES
        .iter()
        .find(|r| r.name() == name)
        .ok_or_else(|| {
            let names: Vec<&str> = RECIPES.iter().map(|r| r.name()).collect();
            CliError::Input(format!(
                "unknown recipe {name:?}; available: {}",
                names.join(", ")
            ))
        })?;
    fs::create_dir_all(out).map_err(gmmot::Error::from)?;
    let checks = recipe.run(&Ctx { steps, out })?;

    let mut report = String::new();
    let mut failed = 0;
    for c in &checks {
        let line = format!(
            "[{}] {}: {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        print!("{line}");
        report.push_str(&line);
        if !c.pass {
            failed += 1;
        }
    }
    fs::write(out.join("report.txt"), report).map_err(gmmot::Error::from)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn g1(mean: f64, var: f64) -> Gaussian {
    Gaussian::scalar(mean, var).expect("fixture variance positive")
}

fn g2(x: f64, y: f64, var: f64) -> Gaussian {
    Gaussian::isotropic(vec![x, y], var).expect("fixture variance positive")
}

fn save_fixture(out: &Path, name: &str, model: &Model) -> CliResult<()> {
    let text = model_to_json(model)?;
    fs::write(out.join(name), text + "\n").map_err(gmmot::Error::from)?;
    Ok(())
}

/// Solve, render the frame strip and return the per-step interpolants'
/// channel masses along with the transport result.
fn render_vector_run(
    ctx: &Ctx,
    rho0: &VectorMixtureModel,
    rho1: &VectorMixtureModel,
    gamma: f64,
    id: ApproachId,
    spec: &GridSpec,
) -> CliResult<(gmmot::mixture::TransportResult, Vec<Vec<f64>>)> {
    save_fixture(ctx.out, "rho0.json", &Model::Vgmm(rho0.clone()))?;
    save_fixture(ctx.out, "rho1.json", &Model::Vgmm(rho1.clone()))?;
    let result = match vgmm_distance(rho0, rho1, gamma, id)? {
        LpOutcome::Solved(r) => r,
        LpOutcome::Infeasible => return Err(CliError::Infeasible),
    };
    let channels = rho0.graph().node_count();
    let mut grids = Vec::new();
    let mut masses = Vec::new();
    for i in 0..=ctx.steps {
        let t = i as f64 / ctx.steps as f64;
        let interp = vgmm_interpolate_plan(rho0, rho1, &result.plan, t, id)?;
        masses.push(interp.channel_masses());
        let comps = match i {
            0 => render_vector_mixture(rho0),
            _ if i == ctx.steps => render_vector_mixture(rho1),
            _ => gmmot::raster::render_interpolant(&interp)?,
        };
        grids.push(rasterize(&comps, channels, spec)?);
    }
    write_frames(&grids, ctx.out)?;
    Ok((result, masses))
}

// ---------------------------------------------------------------------------
// 1D, two channels: the linear and quadratic strategies side by side
// ---------------------------------------------------------------------------

struct OneDimTwoChannels {
    linear: bool,
}

impl OneDimTwoChannels {
    fn models(&self) -> (VectorMixtureModel, VectorMixtureModel) {
        let graph = ChannelGraph::unit(2, &[(0, 1)]).unwrap();
        let rho0 = VectorMixtureModel::new(
            graph.clone(),
            vec![(0.7, g1(-2.0, 0.09), 0), (0.3, g1(-1.0, 0.09), 1)],
        )
        .unwrap();
        let rho1 = VectorMixtureModel::new(
            graph,
            vec![(0.3, g1(2.0, 0.09), 0), (0.7, g1(1.0, 0.09), 1)],
        )
        .unwrap();
        (rho0, rho1)
    }
}

impl Recipe for OneDimTwoChannels {
    fn name(&self) -> &'static str {
        if self.linear {
            "fig-1d-2ch-a1"
        } else {
            "fig-1d-2ch-a2"
        }
    }

    fn description(&self) -> &'static str {
        if self.linear {
            "1D two-channel pair under the linear cost (approach 1)"
        } else {
            "1D two-channel pair under the quadratic cost (approach 2)"
        }
    }

    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>> {
        let (rho0, rho1) = self.models();
        let id = if self.linear {
            ApproachId::Linear
        } else {
            ApproachId::Quadratic
        };
        let spec = GridSpec::parse("-4:4:256")?;
        let (result, masses) = render_vector_run(ctx, &rho0, &rho1, 1.0, id, &spec)?;
        let mut checks = vec![Check::new(
            "finite-distance",
            result.distance.is_finite() && result.distance > 0.0,
            format!("distance = {}", result.distance),
        )];
        let conserved = masses
            .iter()
            .all(|m| (m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        checks.push(Check::new(
            "mass-conserved",
            conserved,
            "every frame keeps total mass 1",
        ));
        let endpoints_ok = (masses[0][0] - 0.7).abs() <= 1e-9
            && (masses[ctx.steps][0] - 0.3).abs() <= 1e-9;
        checks.push(Check::new(
            "endpoint-channel-masses",
            endpoints_ok,
            format!(
                "channel 0 mass {} -> {}",
                masses[0][0],
                masses[ctx.steps][0]
            ),
        ));
        Ok(checks)
    }
}

// ---------------------------------------------------------------------------
// 1D, three channels: chain versus fully connected graph
// ---------------------------------------------------------------------------

struct OneDimThreeChannels {
    full: bool,
}

impl Recipe for OneDimThreeChannels {
    fn name(&self) -> &'static str {
        if self.full {
            "fig-1d-3ch-full"
        } else {
            "fig-1d-3ch-chain"
        }
    }

    fn description(&self) -> &'static str {
        if self.full {
            "mass moves channel 0 -> 2 directly on a fully connected graph"
        } else {
            "mass moves channel 0 -> 2 through the middle of a chain"
        }
    }

    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>> {
        let edges: &[(usize, usize)] = if self.full {
            &[(0, 1), (1, 2), (0, 2)]
        } else {
            &[(0, 1), (1, 2)]
        };
        let graph = ChannelGraph::unit(3, edges).unwrap();
        let rho0 =
            VectorMixtureModel::new(graph.clone(), vec![(1.0, g1(-1.0, 0.04), 0)]).unwrap();
        let rho1 = VectorMixtureModel::new(
            graph,
            vec![(0.5, g1(0.5, 0.04), 2), (0.5, g1(1.5, 0.04), 2)],
        )
        .unwrap();
        let spec = GridSpec::parse("-2.5:3:256")?;
        let (_, masses) =
            render_vector_run(ctx, &rho0, &rho1, 1.0, ApproachId::Quadratic, &spec)?;

        // Middle channel occupancy over the interior steps.
        let interior_max = masses[1..ctx.steps]
            .iter()
            .map(|m| m[1])
            .fold(0.0f64, f64::max);
        let check = if self.full {
            Check::new(
                "middle-channel-untouched",
                interior_max <= 1e-12,
                format!("max channel-1 mass {interior_max}"),
            )
        } else {
            Check::new(
                "routes-through-middle-channel",
                interior_max > 0.1,
                format!("max channel-1 mass {interior_max}"),
            )
        };
        Ok(vec![check])
    }
}

// ---------------------------------------------------------------------------
// 2D, red/green/blue chain: gamma steers within- vs cross-channel routing
// ---------------------------------------------------------------------------

fn swap_fixture(graph: ChannelGraph) -> (VectorMixtureModel, VectorMixtureModel) {
    let rho0 = VectorMixtureModel::new(
        graph.clone(),
        vec![(0.5, g2(-2.0, 0.0, 0.25), 0), (0.5, g2(2.0, 0.0, 0.25), 2)],
    )
    .unwrap();
    let rho1 = VectorMixtureModel::new(
        graph,
        vec![(0.5, g2(2.0, 0.0, 0.25), 0), (0.5, g2(-2.0, 0.0, 0.25), 2)],
    )
    .unwrap();
    (rho0, rho1)
}

struct TwoDimGammaRouting {
    large: bool,
}

impl Recipe for TwoDimGammaRouting {
    fn name(&self) -> &'static str {
        if self.large {
            "fig-2d-gamma-large"
        } else {
            "fig-2d-gamma-small"
        }
    }

    fn description(&self) -> &'static str {
        if self.large {
            "large gamma keeps the swapped blobs inside their channels"
        } else {
            "small gamma routes the blobs across the middle channel"
        }
    }

    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>> {
        let graph = ChannelGraph::unit(3, &[(0, 1), (1, 2)]).unwrap();
        let (rho0, rho1) = swap_fixture(graph);
        let gamma = if self.large { 1e6 } else { 1e-3 };
        let spec = GridSpec::parse("-4:4:64,-2:2:32")?;
        let (result, masses) =
            render_vector_run(ctx, &rho0, &rho1, gamma, ApproachId::Quadratic, &spec)?;

        let support = result.plan.support();
        let same_channel = support
            .iter()
            .all(|&(i, j)| rho0.components()[i].channel == rho1.components()[j].channel);
        let cross_channel = support
            .iter()
            .all(|&(i, j)| rho0.components()[i].channel != rho1.components()[j].channel);

        let mut checks = Vec::new();
        if self.large {
            checks.push(Check::new(
                "plan-within-channels",
                same_channel,
                format!("support {support:?}"),
            ));
        } else {
            checks.push(Check::new(
                "plan-across-channels",
                cross_channel,
                format!("support {support:?}"),
            ));
            let interior_max = masses[1..ctx.steps]
                .iter()
                .map(|m| m[1])
                .fold(0.0f64, f64::max);
            checks.push(Check::new(
                "passes-through-middle-channel",
                interior_max > 0.1,
                format!("max channel-1 mass {interior_max}"),
            ));
        }
        Ok(checks)
    }
}

// ---------------------------------------------------------------------------
// Unbalanced scalar pair: two blobs merge, extra target mass is sourced
// ---------------------------------------------------------------------------

struct UnbalancedMerge;

impl Recipe for UnbalancedMerge {
    fn name(&self) -> &'static str {
        "fig-unbalanced"
    }

    fn description(&self) -> &'static str {
        "unbalanced pair: blobs merge to the center, deficit fed from source"
    }

    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>> {
        let mu0 = MixtureModel::new(vec![
            (0.5, g2(2.0, 0.8, 0.05)),
            (0.5, g2(2.0, -0.8, 0.05)),
        ])
        .unwrap();
        let mu1 = MixtureModel::new(vec![
            (1.0, g2(0.0, 0.0, 0.1)),
            (0.15, g2(-2.0, 0.5, 0.03)),
            (0.15, g2(-2.0, -0.5, 0.03)),
        ])
        .unwrap();
        save_fixture(ctx.out, "rho0.json", &Model::Gmm(mu0.clone()))?;
        save_fixture(ctx.out, "rho1.json", &Model::Gmm(mu1.clone()))?;

        let gamma = 2.0;
        let solved = unbalanced_gmm_solve(&mu0, &mu1, gamma)?;
        let spec = GridSpec::parse("-3.5:3.5:64,-2:2:48")?;
        let mut grids = Vec::new();
        let mut source_grids = Vec::new();
        let mut original_masses = Vec::new();
        for i in 0..=ctx.steps {
            let t = i as f64 / ctx.steps as f64;
            let (original, source) = unbalanced_gmm_interpolate(&mu0, &mu1, gamma, t)?;
            original_masses.push(original.total_mass());
            grids.push(rasterize(&render_mixture(&original), 1, &spec)?);
            source_grids.push(rasterize(&render_mixture(&source), 1, &spec)?);
        }
        let gmax = grids
            .iter()
            .chain(source_grids.iter())
            .map(|g| g.max_value())
            .fold(0.0f64, f64::max);
        write_strip(&grids, gmax, ctx.out, "frame")?;
        write_strip(&source_grids, gmax, ctx.out, "source")?;

        // The source row is the extra plan row on the lighter first side.
        let plan = &solved.result.plan;
        let src_row = mu0.len();
        let mut checks = Vec::new();
        checks.push(Check::new(
            "source-on-lighter-side",
            plan.rows() == mu0.len() + 1,
            format!("plan is {}x{}", plan.rows(), plan.cols()),
        ));
        let blobs_merge = plan.get(0, 0) > 0.49 && plan.get(1, 0) > 0.49;
        checks.push(Check::new(
            "blobs-merge-to-center",
            blobs_merge,
            format!("plan[0][0] = {}, plan[1][0] = {}", plan.get(0, 0), plan.get(1, 0)),
        ));
        let sourced = plan.get(src_row, 1) > 0.149 && plan.get(src_row, 2) > 0.149;
        checks.push(Check::new(
            "targets-fed-from-source",
            sourced,
            format!(
                "source row sends {} and {}",
                plan.get(src_row, 1),
                plan.get(src_row, 2)
            ),
        ));
        let monotone = original_masses.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        checks.push(Check::new(
            "original-mass-grows",
            monotone
                && (original_masses[0] - 1.0).abs() <= 1e-9
                && (original_masses[ctx.steps] - 1.3).abs() <= 1e-9,
            format!(
                "original mass {} -> {}",
                original_masses[0],
                original_masses[ctx.steps]
            ),
        ));
        Ok(checks)
    }
}

// ---------------------------------------------------------------------------
// Restricted coupling on the fully connected RGB graph: channels swap freely
// ---------------------------------------------------------------------------

struct RestrictedSwap;

impl Recipe for RestrictedSwap {
    fn name(&self) -> &'static str {
        "fig-approach0-full"
    }

    fn description(&self) -> &'static str {
        "restricted coupling on a full graph lets blobs swap channels at zero cost"
    }

    fn run(&self, ctx: &Ctx) -> CliResult<Vec<Check>> {
        let graph = ChannelGraph::unit(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let (rho0, rho1) = swap_fixture(graph);
        let spec = GridSpec::parse("-4:4:64,-2:2:32")?;
        let (result, _) =
            render_vector_run(ctx, &rho0, &rho1, 1.0, ApproachId::Restricted, &spec)?;

        let support = result.plan.support();
        let cross = support
            .iter()
            .all(|&(i, j)| rho0.components()[i].channel != rho1.components()[j].channel);
        Ok(vec![
            Check::new(
                "channels-swap-directly",
                cross,
                format!("support {support:?}"),
            ),
            Check::new(
                "zero-distance-despite-distinct-models",
                result.distance <= 1e-9 && !rho0.same_distribution(&rho1, 1e-9),
                format!("distance = {}", result.distance),
            ),
        ])
    }
}
