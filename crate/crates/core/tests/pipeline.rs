//! End-to-end runs through the public API: intensities -> EM fit ->
//! transport -> interpolation -> rasterized frames.

use gmmot::fit::{fit_gmm_em, EmOptions, WeightedSamples};
use gmmot::graph::ChannelGraph;
use gmmot::io::{load_model, model_from_json, model_to_json, save_model, Model};
use gmmot::mixture::MixtureModel;
use gmmot::raster::{rasterize, render_interpolant, render_vector_mixture, GridSpec};
use gmmot::vector::{vgmm_distance, vgmm_interpolate_plan, ApproachId, VectorMixtureModel};

/// Weighted samples drawn on a lattice around two centers, mimicking a
/// rasterized pair of blobs.
fn blob_samples(center: (f64, f64), spread: f64) -> WeightedSamples {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let n = 9;
    for ix in 0..n {
        for iy in 0..n {
            let x = center.0 + (ix as f64 - (n - 1) as f64 / 2.0) * 0.25;
            let y = center.1 + (iy as f64 - (n - 1) as f64 / 2.0) * 0.25;
            let d2 = ((x - center.0).powi(2) + (y - center.1).powi(2)) / (spread * spread);
            let w = (-0.5 * d2).exp();
            points.push(vec![x, y]);
            weights.push(w);
        }
    }
    WeightedSamples::new(points, weights).unwrap()
}

#[test]
fn fit_transport_interpolate_rasterize() {
    let graph = ChannelGraph::unit(2, &[(0, 1)]).unwrap();

    // Fit one component per blob, one blob per channel, both sides.
    let fit = |center: (f64, f64), seed: u64| {
        fit_gmm_em(
            &blob_samples(center, 0.6),
            1,
            &EmOptions {
                seed,
                ..Default::default()
            },
        )
        .unwrap()
        .mixture
    };
    let build = |a: MixtureModel, b: MixtureModel| {
        let mut comps = Vec::new();
        for (w, g) in a.normalized().unwrap().components() {
            comps.push((0.5 * w, g.clone(), 0));
        }
        for (w, g) in b.normalized().unwrap().components() {
            comps.push((0.5 * w, g.clone(), 1));
        }
        VectorMixtureModel::new(graph.clone(), comps).unwrap()
    };
    let rho0 = build(fit((-1.5, 0.0), 1), fit((-1.5, 1.0), 2));
    let rho1 = build(fit((1.5, 0.5), 3), fit((1.5, -0.5), 4));

    // Fitted means should sit near the sample centers.
    let first = &rho0.components()[0].gaussian;
    assert!((first.mean()[0] + 1.5).abs() < 0.1);

    // JSON round trip through a file.
    let dir = std::env::temp_dir().join(format!("gmmot-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rho0.json");
    save_model(&path, &Model::Vgmm(rho0.clone())).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, Model::Vgmm(rho0.clone()));

    // Transport and interpolation.
    let result = vgmm_distance(&rho0, &rho1, 1.0, ApproachId::Quadratic)
        .unwrap()
        .expect_solved("feasible");
    assert!(result.distance > 0.0);
    let spec = GridSpec::parse("-4:4:48,-3:3:36").unwrap();
    let mut previous_mass = None;
    for &t in &[0.0, 0.5, 1.0] {
        let interp =
            vgmm_interpolate_plan(&rho0, &rho1, &result.plan, t, ApproachId::Quadratic).unwrap();
        let grid = rasterize(&render_interpolant(&interp).unwrap(), 2, &spec).unwrap();
        let mass = grid.integral();
        // Total rendered mass stays (approximately) one along the path.
        assert!((mass - 1.0).abs() < 2e-2, "mass {mass} at t={t}");
        if let Some(prev) = previous_mass {
            let delta: f64 = mass - prev;
            assert!(delta.abs() < 2e-2);
        }
        previous_mass = Some(mass);
    }

    // Endpoint grid equals the rasterized input exactly.
    let at0 = vgmm_interpolate_plan(&rho0, &rho1, &result.plan, 0.0, ApproachId::Quadratic)
        .unwrap();
    let direct = rasterize(&render_vector_mixture(&rho0), 2, &spec).unwrap();
    let via_interp = rasterize(&render_interpolant(&at0).unwrap(), 2, &spec).unwrap();
    for (a, b) in direct.channels[0].iter().zip(&via_interp.channels[0]) {
        assert!((a - b).abs() <= 1e-9);
    }

    // Serialized text survives a parse cycle byte for byte.
    let text = model_to_json(&Model::Vgmm(rho1.clone())).unwrap();
    let reparsed = model_from_json(&text).unwrap();
    assert_eq!(model_to_json(&reparsed).unwrap(), text);

    std::fs::remove_dir_all(&dir).ok();
}
