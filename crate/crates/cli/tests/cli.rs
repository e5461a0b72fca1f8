//! Behavioral tests of the CLI surface: exit codes, file outputs, endpoint
//! frames and determinism.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use gmmot::gaussian::Gaussian;
use gmmot::graph::ChannelGraph;
use gmmot::io::{model_to_json, Model};
use gmmot::raster::{rasterize, render_model, write_frames, GridSpec};
use gmmot::vector::VectorMixtureModel;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmmot"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gmmot-cli-{tag}-{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn chain_models(dir: &PathBuf) -> (PathBuf, PathBuf, Model, Model) {
    let graph = ChannelGraph::unit(3, &[(0, 1), (1, 2)]).unwrap();
    let m0 = Model::Vgmm(
        VectorMixtureModel::new(
            graph.clone(),
            vec![(1.0, Gaussian::scalar(-1.0, 0.2).unwrap(), 0)],
        )
        .unwrap(),
    );
    let m1 = Model::Vgmm(
        VectorMixtureModel::new(
            graph,
            vec![
                (0.5, Gaussian::scalar(0.5, 0.2).unwrap(), 2),
                (0.5, Gaussian::scalar(1.5, 0.2).unwrap(), 2),
            ],
        )
        .unwrap(),
    );
    let p0 = dir.join("m0.json");
    let p1 = dir.join("m1.json");
    fs::write(&p0, model_to_json(&m0).unwrap()).unwrap();
    fs::write(&p1, model_to_json(&m1).unwrap()).unwrap();
    (p0, p1, m0, m1)
}

fn tiny_rgb_image(dir: &PathBuf) -> PathBuf {
    let (w, h) = (16usize, 12usize);
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    for row in 0..h {
        for col in 0..w {
            let d0 = ((col as f64 - 4.0).powi(2) + (row as f64 - 6.0).powi(2)) / 9.0;
            let d1 = ((col as f64 - 11.0).powi(2) + (row as f64 - 6.0).powi(2)) / 9.0;
            let r = (255.0 * (1.0 - d0).max(0.0)) as u8;
            let b = (255.0 * (1.0 - d1).max(0.0)) as u8;
            bytes.extend_from_slice(&[r, 0, b]);
        }
    }
    let path = dir.join("blobs.ppm");
    fs::write(&path, bytes).unwrap();
    path
}

#[test]
fn identical_models_give_zero_distance() {
    let dir = scratch("zero");
    let (p0, _, _, _) = chain_models(&dir);
    let out = binary()
        .arg("distance")
        .arg(&p0)
        .arg(&p0)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.join("out/result.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["distance"].as_f64().unwrap(), 0.0);
}

#[test]
fn blocked_chain_exit_codes() {
    let dir = scratch("exit");
    let (p0, p1, _, _) = chain_models(&dir);
    let restricted = binary()
        .arg("distance")
        .arg(&p0)
        .arg(&p1)
        .args(["--approach", "0", "--out"])
        .arg(dir.join("r0"))
        .output()
        .unwrap();
    assert_eq!(restricted.status.code(), Some(3));
    let unrestricted = binary()
        .arg("distance")
        .arg(&p0)
        .arg(&p1)
        .args(["--approach", "2", "--out"])
        .arg(dir.join("r2"))
        .output()
        .unwrap();
    assert_eq!(unrestricted.status.code(), Some(0));
}

#[test]
fn schema_violations_exit_2() {
    let dir = scratch("schema");
    let bad = dir.join("bad.json");
    fs::write(
        &bad,
        r#"{"type": "gmm", "dim": 1, "graph": null,
            "components": [{"mean": [0.0], "cov": [[1.0]]}]}"#,
    )
    .unwrap();
    let (p0, _, _, _) = chain_models(&dir);
    let out = binary()
        .arg("distance")
        .arg(&bad)
        .arg(&p0)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("weight"), "stderr: {stderr}");
}

#[test]
fn unbalanced_models_need_the_flag() {
    let dir = scratch("unbal");
    let heavy = Model::Gmm(
        gmmot::mixture::MixtureModel::new(vec![(1.0, Gaussian::scalar(0.0, 1.0).unwrap())])
            .unwrap(),
    );
    let light = Model::Gmm(
        gmmot::mixture::MixtureModel::new(vec![(0.6, Gaussian::scalar(0.0, 1.0).unwrap())])
            .unwrap(),
    );
    let ph = dir.join("heavy.json");
    let pl = dir.join("light.json");
    fs::write(&ph, model_to_json(&heavy).unwrap()).unwrap();
    fs::write(&pl, model_to_json(&light).unwrap()).unwrap();

    let without = binary()
        .arg("distance")
        .arg(&ph)
        .arg(&pl)
        .arg("--out")
        .arg(dir.join("o1"))
        .output()
        .unwrap();
    assert_eq!(without.status.code(), Some(2));

    let with = binary()
        .arg("distance")
        .arg(&ph)
        .arg(&pl)
        .args(["--unbalanced", "--gamma", "2", "--out"])
        .arg(dir.join("o2"))
        .output()
        .unwrap();
    assert_eq!(with.status.code(), Some(0));
    let text = fs::read_to_string(dir.join("o2/result.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let d = json["distance"].as_f64().unwrap();
    assert!((d * d - 0.8).abs() <= 1e-12);
}

#[test]
fn interpolate_writes_expected_outputs() {
    let dir = scratch("frames");
    let (p0, p1, _, _) = chain_models(&dir);
    let out_dir = dir.join("out");
    let status = binary()
        .arg("interpolate")
        .arg(&p0)
        .arg(&p1)
        .args(["--steps", "10", "--grid=-3:3:64", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    for i in 0..=10 {
        assert!(out_dir.join(format!("frame_{i:03}.ppm")).exists(), "frame {i}");
        assert!(out_dir.join(format!("model_{i:03}.json")).exists(), "model {i}");
    }
    assert!(!out_dir.join("frame_011.ppm").exists());
    assert!(out_dir.join("result.json").exists());
}

#[test]
fn endpoint_frames_match_rasterized_inputs_exactly() {
    let dir = scratch("endpoints");
    let (p0, p1, m0, m1) = chain_models(&dir);
    let cli_dir = dir.join("cli");
    let status = binary()
        .arg("interpolate")
        .arg(&p0)
        .arg(&p1)
        .args(["--steps", "1", "--grid=-3:3:64", "--out"])
        .arg(&cli_dir)
        .status()
        .unwrap();
    assert!(status.success());

    // Rebuild the two-frame strip straight from the inputs.
    let spec = GridSpec::parse("-3:3:64").unwrap();
    let g0 = rasterize(&render_model(&m0), 3, &spec).unwrap();
    let g1 = rasterize(&render_model(&m1), 3, &spec).unwrap();
    let expect_dir = dir.join("expected");
    write_frames(&[g0, g1], &expect_dir).unwrap();

    for name in ["frame_000.ppm", "frame_001.ppm"] {
        let got = fs::read(cli_dir.join(name)).unwrap();
        let want = fs::read(expect_dir.join(name)).unwrap();
        assert_eq!(got, want, "{name} differs from the direct rasterization");
    }
}

#[test]
fn fit_produces_a_vector_model_per_channel() {
    let dir = scratch("fit");
    let image = tiny_rgb_image(&dir);
    let out_dir = dir.join("out");
    let status = binary()
        .arg("fit")
        .arg(&image)
        .args(["--k", "1", "--seed", "3", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let model = gmmot::io::load_model(out_dir.join("model.json")).unwrap();
    let Model::Vgmm(m) = model else {
        panic!("fit must produce a vector model")
    };
    assert_eq!(m.graph().node_count(), 3);
    // Green carries no mass in the fixture: components sit on red and blue.
    let masses = m.channel_masses();
    assert!(masses[0] > 0.0 && masses[2] > 0.0);
    assert_eq!(masses[1], 0.0);
    // k = 1 per lit channel: the red blob centers near x = 4.5.
    let red = m.components().iter().find(|c| c.channel == 0).unwrap();
    assert!((red.gaussian.mean()[0] - 4.5).abs() < 1.0);
}

#[test]
fn fit_rejects_oversized_k() {
    let dir = scratch("bigk");
    let image = tiny_rgb_image(&dir);
    let out = binary()
        .arg("fit")
        .arg(&image)
        .args(["--k", "10000", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("distinct"), "stderr: {stderr}");
}

#[test]
fn mixed_model_kinds_are_rejected() {
    let dir = scratch("mixed");
    let (p0, _, _, _) = chain_models(&dir);
    let scalar = Model::Gmm(
        gmmot::mixture::MixtureModel::new(vec![(1.0, Gaussian::scalar(0.0, 1.0).unwrap())])
            .unwrap(),
    );
    let ps = dir.join("scalar.json");
    fs::write(&ps, model_to_json(&scalar).unwrap()).unwrap();
    let out = binary()
        .arg("distance")
        .arg(&p0)
        .arg(&ps)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_recipe_is_an_input_error() {
    let dir = scratch("norecipe");
    let out = binary()
        .arg("repro")
        .arg("fig-nope")
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("available"), "stderr: {stderr}");
}

#[test]
fn fit_then_interpolate_round_trip_is_deterministic() {
    let dir = scratch("fitinterp");
    let image = tiny_rgb_image(&dir);
    for run in ["a", "b"] {
        let fit_out = dir.join(format!("fit-{run}"));
        let status = binary()
            .arg("fit")
            .arg(&image)
            .args(["--k", "2", "--seed", "9", "--out"])
            .arg(&fit_out)
            .status()
            .unwrap();
        assert!(status.success());
        let status = binary()
            .arg("interpolate")
            .arg(fit_out.join("model.json"))
            .arg(fit_out.join("model.json"))
            .args(["--unbalanced", "--steps", "4", "--out"])
            .arg(dir.join(format!("interp-{run}")))
            .status()
            .unwrap();
        assert!(status.success(), "interpolate failed");
    }
    assert_eq!(
        fs::read(dir.join("fit-a/model.json")).unwrap(),
        fs::read(dir.join("fit-b/model.json")).unwrap()
    );
    for i in 0..=4 {
        assert_eq!(
            fs::read(dir.join(format!("interp-a/frame_{i:03}.ppm"))).unwrap(),
            fs::read(dir.join(format!("interp-b/frame_{i:03}.ppm"))).unwrap()
        );
    }
}
