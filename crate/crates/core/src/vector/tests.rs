use super::*;
use crate::gaussian::{w2_gaussian, Gaussian};
use crate::graph::ChannelGraph;
use crate::mixture::{unbalanced_gmm_distance, MixtureModel};
use crate::testkit::{random_connected_graph, random_gaussian, random_vector_mixture, rng};
use approx::assert_abs_diff_eq;
use rand::Rng;

fn chain(n: usize) -> ChannelGraph {
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    ChannelGraph::unit(n, &edges).unwrap()
}

fn full_graph(n: usize) -> ChannelGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for w in (u + 1)..n {
            edges.push((u, w));
        }
    }
    ChannelGraph::unit(n, &edges).unwrap()
}

/// Mass entirely in the first channel versus mass entirely in the last
/// channel of a three-channel chain; the direct cell is not an edge.
fn blocked_chain_pair() -> (VectorMixtureModel, VectorMixtureModel) {
    let g = chain(3);
    let rho0 = VectorMixtureModel::new(
        g.clone(),
        vec![(1.0, Gaussian::scalar(-1.0, 0.2).unwrap(), 0)],
    )
    .unwrap();
    let rho1 = VectorMixtureModel::new(
        g,
        vec![
            (0.5, Gaussian::scalar(0.5, 0.2).unwrap(), 2),
            (0.5, Gaussian::scalar(1.5, 0.2).unwrap(), 2),
        ],
    )
    .unwrap();
    (rho0, rho1)
}

#[test]
fn cost_entries_match_hand_values() {
    let g = chain(3);
    let rho0 =
        VectorMixtureModel::new(g.clone(), vec![(1.0, Gaussian::scalar(0.0, 1.0).unwrap(), 0)])
            .unwrap();
    let rho1 =
        VectorMixtureModel::new(g, vec![(1.0, Gaussian::scalar(3.0, 1.0).unwrap(), 2)]).unwrap();
    let c1 = cost_matrix_v1(&rho0, &rho1, 0.5).unwrap();
    assert_abs_diff_eq!(c1.get(0, 0), 4.0, epsilon = 1e-10);
    let c2 = cost_matrix_v2(&rho0, &rho1, 0.5).unwrap();
    assert_abs_diff_eq!(c2.get(0, 0), 11.0, epsilon = 1e-9);
}

#[test]
fn zero_gamma_reduces_to_plain_w2_costs() {
    let mut r = rng(71);
    let g = random_connected_graph(&mut r, 4, 0.5);
    let rho0 = random_vector_mixture(&mut r, &g, 2, 3);
    let rho1 = random_vector_mixture(&mut r, &g, 2, 3);
    let c1 = cost_matrix_v1(&rho0, &rho1, 0.0).unwrap();
    let c2 = cost_matrix_v2(&rho0, &rho1, 0.0).unwrap();
    for (i, c0) in rho0.components().iter().enumerate() {
        for (j, c1c) in rho1.components().iter().enumerate() {
            let w2 = w2_gaussian(&c0.gaussian, &c1c.gaussian).unwrap();
            assert_abs_diff_eq!(c1.get(i, j), w2, epsilon = 1e-10);
            assert_abs_diff_eq!(c2.get(i, j), w2 * w2, epsilon = 1e-9);
        }
    }
}

#[test]
fn identical_models_have_zero_distance_under_all_strategies() {
    let mut r = rng(72);
    let g = random_connected_graph(&mut r, 4, 0.6);
    let rho = random_vector_mixture(&mut r, &g, 2, 4);
    for s in STRATEGIES {
        let out = vgmm_distance(&rho, &rho, 1.0, s.id()).unwrap();
        let res = out.expect_solved("identical models are always feasible");
        assert_abs_diff_eq!(res.distance, 0.0, epsilon = 1e-9);
    }
}

#[test]
fn blocked_chain_is_infeasible_only_for_restricted() {
    let (rho0, rho1) = blocked_chain_pair();
    assert!(vgmm_distance(&rho0, &rho1, 1.0, ApproachId::Restricted)
        .unwrap()
        .is_infeasible());
    for id in [ApproachId::Linear, ApproachId::Quadratic] {
        let res = vgmm_distance(&rho0, &rho1, 1.0, id)
            .unwrap()
            .expect_solved("unrestricted strategies are always feasible");
        assert!(res.distance.is_finite() && res.distance > 0.0);
    }
}

#[test]
fn restricted_distance_vanishes_for_adjacent_channel_move() {
    // The same Gaussian on two adjacent channels: a pseudo-distance witness.
    let g = chain(2);
    let gaussian = Gaussian::scalar(0.0, 1.0).unwrap();
    let rho0 = VectorMixtureModel::new(g.clone(), vec![(1.0, gaussian.clone(), 0)]).unwrap();
    let rho1 = VectorMixtureModel::new(g, vec![(1.0, gaussian, 1)]).unwrap();
    assert!(!rho0.same_distribution(&rho1, 1e-9));
    let res = vgmm_distance(&rho0, &rho1, 1.0, ApproachId::Restricted)
        .unwrap()
        .expect_solved("adjacent channels are allowed");
    assert_abs_diff_eq!(res.distance, 0.0, epsilon = 1e-12);
}

#[test]
fn interpolation_midpoint_on_three_edge_path() {
    // One component travelling 0 -> 2 -> 3 -> 1 sits astride the middle edge
    // at t = 1/2.
    let g = ChannelGraph::unit(4, &[(0, 2), (2, 3), (1, 3)]).unwrap();
    let rho0 =
        VectorMixtureModel::new(g.clone(), vec![(1.0, Gaussian::scalar(0.0, 1.0).unwrap(), 0)])
            .unwrap();
    let rho1 =
        VectorMixtureModel::new(g, vec![(1.0, Gaussian::scalar(1.0, 1.0).unwrap(), 1)]).unwrap();
    let interp = vgmm_interpolate(&rho0, &rho1, 0.5, 1.0, ApproachId::Quadratic)
        .unwrap()
        .expect_solved("feasible");
    assert_eq!(interp.components().len(), 1);
    let pos = interp.components()[0].position;
    assert_eq!((pos.node_a, pos.node_b), (2, 3));
    assert_abs_diff_eq!(pos.fraction, 0.5, epsilon = 1e-12);
    let masses = interp.channel_masses();
    assert_abs_diff_eq!(masses[2], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(masses[3], 0.5, epsilon = 1e-12);
}

#[test]
fn interpolation_crosses_middle_channel_of_chain() {
    let (rho0, rho1) = blocked_chain_pair();
    let res = vgmm_distance(&rho0, &rho1, 1.0, ApproachId::Quadratic)
        .unwrap()
        .expect_solved("feasible");
    for &t in &[0.4, 0.5, 0.6] {
        let interp =
            vgmm_interpolate_plan(&rho0, &rho1, &res.plan, t, ApproachId::Quadratic).unwrap();
        let masses = interp.channel_masses();
        assert!(masses[1] > 0.0, "middle channel empty at t={t}");
    }
}

#[test]
fn interpolation_endpoints_reproduce_inputs() {
    let mut r = rng(73);
    let g = random_connected_graph(&mut r, 4, 0.5);
    let rho0 = random_vector_mixture(&mut r, &g, 2, 3);
    let rho1 = random_vector_mixture(&mut r, &g, 2, 4);
    for id in [ApproachId::Linear, ApproachId::Quadratic] {
        let at0 = vgmm_interpolate(&rho0, &rho1, 0.0, 1.0, id)
            .unwrap()
            .expect_solved("feasible");
        let at1 = vgmm_interpolate(&rho0, &rho1, 1.0, 1.0, id)
            .unwrap()
            .expect_solved("feasible");
        assert!(at0.to_mixture().unwrap().same_distribution(&rho0, 1e-7));
        assert!(at1.to_mixture().unwrap().same_distribution(&rho1, 1e-7));
    }
}

#[test]
fn metric_axioms_for_linear_and_quadratic() {
    let mut r = rng(74);
    for _ in 0..15 {
        let nodes = r.gen_range(2..=5);
        let g = random_connected_graph(&mut r, nodes, 0.4);
        let (ka, kb, kc) = (r.gen_range(1..=5), r.gen_range(1..=5), r.gen_range(1..=5));
        let a = random_vector_mixture(&mut r, &g, 2, ka);
        let b = random_vector_mixture(&mut r, &g, 2, kb);
        let c = random_vector_mixture(&mut r, &g, 2, kc);
        let gamma = r.gen_range(0.1..2.0);
        for id in [ApproachId::Linear, ApproachId::Quadratic] {
            let d = |x: &VectorMixtureModel, y: &VectorMixtureModel| {
                vgmm_distance(x, y, gamma, id)
                    .unwrap()
                    .expect_solved("feasible")
                    .distance
            };
            let (ab, ba) = (d(&a, &b), d(&b, &a));
            assert!((ab - ba).abs() <= 1e-9, "symmetry violated: {ab} vs {ba}");
            assert!(d(&a, &c) <= ab + d(&b, &c) + 1e-7, "triangle violated");
        }
    }
}

#[test]
fn identity_of_indiscernibles_canonical() {
    let g = chain(2);
    let ga = Gaussian::scalar(0.0, 1.0).unwrap();
    let gb = Gaussian::scalar(2.0, 0.5).unwrap();
    let rho0 = VectorMixtureModel::new(
        g.clone(),
        vec![(0.25, ga.clone(), 0), (0.25, ga.clone(), 0), (0.5, gb.clone(), 1)],
    )
    .unwrap();
    let rho1 =
        VectorMixtureModel::new(g, vec![(0.5, gb, 1), (0.5, ga, 0)]).unwrap();
    assert!(rho0.same_distribution(&rho1, 1e-9));
    for id in [ApproachId::Linear, ApproachId::Quadratic] {
        let d = vgmm_distance(&rho0, &rho1, 1.0, id)
            .unwrap()
            .expect_solved("feasible")
            .distance;
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-9);
    }
}

#[test]
fn restricted_triangle_on_feasible_triples() {
    let mut r = rng(75);
    let mut tested = 0;
    while tested < 10 {
        let nodes = r.gen_range(2..=4);
        let g = full_graph(nodes);
        let (ka, kb, kc) = (r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4));
        let a = random_vector_mixture(&mut r, &g, 1, ka);
        let b = random_vector_mixture(&mut r, &g, 1, kb);
        let c = random_vector_mixture(&mut r, &g, 1, kc);
        let d = |x: &VectorMixtureModel, y: &VectorMixtureModel| {
            vgmm_distance(x, y, 1.0, ApproachId::Restricted)
                .unwrap()
                .solved()
                .map(|r| r.distance)
        };
        let (Some(ab), Some(bc), Some(ac)) = (d(&a, &b), d(&b, &c), d(&a, &c)) else {
            continue;
        };
        assert!(ab >= 0.0 && bc >= 0.0 && ac >= 0.0);
        assert!(ac <= ab + bc + 1e-7, "triangle violated: {ac} vs {ab}+{bc}");
        tested += 1;
    }
}

#[test]
fn scalar_minkowski_lemma_holds() {
    let mut r = rng(76);
    for _ in 0..2000 {
        let n = r.gen_range(1..=8);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| r.gen_range(-3.0..3.0)).collect()
        };
        let (a, b, c, d) = (draw(&mut r), draw(&mut r), draw(&mut r), draw(&mut r));
        let lhs: f64 = (0..n)
            .map(|i| (a[i] + b[i]).powi(2) + (c[i] + d[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let rhs = (0..n)
            .map(|i| a[i] * a[i] + c[i] * c[i])
            .sum::<f64>()
            .sqrt()
            + (0..n)
                .map(|i| b[i] * b[i] + d[i] * d[i])
                .sum::<f64>()
                .sqrt();
        assert!(lhs <= rhs + 1e-12);
    }
}

fn linearity_for(id: ApproachId, seed: u64, instances: usize) {
    let mut r = rng(seed);
    let mut done = 0;
    while done < instances {
        let nodes = r.gen_range(2..=4);
        let g = random_connected_graph(&mut r, nodes, 0.5);
        let (k0, k1) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let rho0 = random_vector_mixture(&mut r, &g, 2, k0);
        let rho1 = random_vector_mixture(&mut r, &g, 2, k1);
        let gamma = r.gen_range(0.2..2.0);
        let Some(full) = vgmm_distance(&rho0, &rho1, gamma, id).unwrap().solved() else {
            continue;
        };
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (si, &s) in grid.iter().enumerate() {
            for &t in &grid[si + 1..] {
                let ps = vgmm_interpolate_plan(&rho0, &rho1, &full.plan, s, id).unwrap();
                let pt = vgmm_interpolate_plan(&rho0, &rho1, &full.plan, t, id).unwrap();
                let seg = vgmm_interpolant_distance(&ps, &pt, gamma, id)
                    .unwrap()
                    .expect_solved("diagonal coupling is feasible")
                    .distance;
                let expect = (t - s) * full.distance;
                assert!(
                    (seg - expect).abs() <= 1e-6,
                    "approach {id}: segment {seg} vs {expect} at ({s}, {t})"
                );
            }
        }
        done += 1;
    }
}

#[test]
fn geodesic_linearity_linear_cost() {
    linearity_for(ApproachId::Linear, 77, 4);
}

#[test]
fn geodesic_linearity_quadratic_cost() {
    linearity_for(ApproachId::Quadratic, 78, 4);
}

#[test]
fn geodesic_linearity_restricted() {
    linearity_for(ApproachId::Restricted, 79, 4);
}

#[test]
fn distance_is_monotone_in_gamma() {
    let mut r = rng(80);
    let g = random_connected_graph(&mut r, 4, 0.4);
    let rho0 = random_vector_mixture(&mut r, &g, 2, 3);
    let rho1 = random_vector_mixture(&mut r, &g, 2, 3);
    for id in [ApproachId::Linear, ApproachId::Quadratic] {
        let mut prev = 0.0;
        for &gamma in &[0.0, 0.1, 0.5, 1.0, 5.0, 50.0] {
            let d = vgmm_distance(&rho0, &rho1, gamma, id)
                .unwrap()
                .expect_solved("feasible")
                .distance;
            assert!(d + 1e-10 >= prev, "distance decreased in gamma");
            prev = d;
        }
    }
}

#[test]
fn huge_gamma_forces_same_channel_support() {
    let mut r = rng(81);
    let g = chain(3);
    // Matching per-channel masses so a same-channel coupling exists.
    let channels = [0, 1, 2, 1];
    let weights = [0.25, 0.25, 0.25, 0.25];
    let make = |r: &mut rand_chacha::ChaCha8Rng| {
        VectorMixtureModel::new(
            g.clone(),
            channels
                .iter()
                .zip(weights)
                .map(|(&q, w)| (w, random_gaussian(r, 2), q))
                .collect(),
        )
        .unwrap()
    };
    let rho0 = make(&mut r);
    let rho1 = make(&mut r);
    for id in [ApproachId::Linear, ApproachId::Quadratic] {
        let res = vgmm_distance(&rho0, &rho1, 1e6, id)
            .unwrap()
            .expect_solved("feasible");
        for (i, j) in res.plan.support() {
            assert_eq!(
                rho0.components()[i].channel,
                rho1.components()[j].channel,
                "cross-channel mass at huge gamma"
            );
        }
    }
}

#[test]
fn unbalanced_forced_source_plan() {
    let g = chain(2);
    let gaussian = Gaussian::scalar(0.0, 1.0).unwrap();
    let rho0 = VectorMixtureModel::new(g.clone(), vec![(1.0, gaussian.clone(), 0)]).unwrap();
    let rho1 = VectorMixtureModel::new(g, vec![(0.7, gaussian, 0)]).unwrap();
    let gamma_source = 3.0;
    let res = unbalanced_vgmm_distance(&rho0, &rho1, 1.0, gamma_source).unwrap();
    assert_abs_diff_eq!(res.distance * res.distance, 0.3 * gamma_source, epsilon = 1e-12);
    assert_abs_diff_eq!(res.plan.get(0, 0), 0.7, epsilon = 1e-12);
    assert_abs_diff_eq!(res.plan.get(0, 1), 0.3, epsilon = 1e-12);
}

#[test]
fn unbalanced_equal_masses_matches_balanced_quadratic() {
    let mut r = rng(82);
    let g = random_connected_graph(&mut r, 3, 0.5);
    let rho0 = random_vector_mixture(&mut r, &g, 2, 3);
    let rho1 = random_vector_mixture(&mut r, &g, 2, 3);
    let balanced = vgmm_distance(&rho0, &rho1, 0.8, ApproachId::Quadratic)
        .unwrap()
        .expect_solved("feasible");
    let unbalanced = unbalanced_vgmm_distance(&rho0, &rho1, 0.8, 2.0).unwrap();
    assert_abs_diff_eq!(balanced.distance, unbalanced.distance, epsilon = 1e-12);
}

#[test]
fn single_channel_matches_scalar_unbalanced_pipeline() {
    let mut r = rng(83);
    let single = ChannelGraph::unit(1, &[]).unwrap();
    for _ in 0..5 {
        let k0 = r.gen_range(1..=3);
        let k1 = r.gen_range(1..=3);
        let comps0: Vec<(f64, Gaussian)> = (0..k0)
            .map(|_| (r.gen_range(0.1..1.0), random_gaussian(&mut r, 2)))
            .collect();
        let comps1: Vec<(f64, Gaussian)> = (0..k1)
            .map(|_| (r.gen_range(0.1..1.0), random_gaussian(&mut r, 2)))
            .collect();
        let mu0 = MixtureModel::new(comps0.clone()).unwrap();
        let mu1 = MixtureModel::new(comps1.clone()).unwrap();
        let rho0 = VectorMixtureModel::new(
            single.clone(),
            comps0.into_iter().map(|(w, g)| (w, g, 0)).collect(),
        )
        .unwrap();
        let rho1 = VectorMixtureModel::new(
            single.clone(),
            comps1.into_iter().map(|(w, g)| (w, g, 0)).collect(),
        )
        .unwrap();
        let gamma = r.gen_range(0.5..3.0);
        let scalar = unbalanced_gmm_distance(&mu0, &mu1, gamma).unwrap();
        let vector = unbalanced_vgmm_distance(&rho0, &rho1, 1.0, gamma).unwrap();
        assert!(
            (scalar.distance - vector.distance).abs() <= 1e-9,
            "scalar {} vs vector {}",
            scalar.distance,
            vector.distance
        );
    }
}

#[test]
fn unbalanced_interpolation_mass_accounting() {
    let g = chain(2);
    let shape = Gaussian::scalar(0.0, 1.0).unwrap();
    let rho0 = VectorMixtureModel::new(g.clone(), vec![(1.0, shape.clone(), 0)]).unwrap();
    let rho1 = VectorMixtureModel::new(g, vec![(0.7, shape, 0)]).unwrap();
    let mut prev_mass = f64::INFINITY;
    for &t in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let interp = unbalanced_vgmm_interpolate(&rho0, &rho1, 1.0, 2.0, t).unwrap();
        let original = interp.original_mass();
        assert!(original <= prev_mass + 1e-12, "original mass not monotone");
        prev_mass = original;
        assert_abs_diff_eq!(
            original + interp.source_mass(),
            1.0,
            epsilon = 1e-12
        );
    }
    let at0 = unbalanced_vgmm_interpolate(&rho0, &rho1, 1.0, 2.0, 0.0).unwrap();
    assert_abs_diff_eq!(at0.original_mass(), 1.0, epsilon = 1e-9);
    let at1 = unbalanced_vgmm_interpolate(&rho0, &rho1, 1.0, 2.0, 1.0).unwrap();
    assert_abs_diff_eq!(at1.original_mass(), 0.7, epsilon = 1e-9);
    assert_abs_diff_eq!(at1.source_mass(), 0.3, epsilon = 1e-9);
}

#[test]
fn unbalanced_no_source_components_when_masses_match() {
    let mut r = rng(84);
    let g = random_connected_graph(&mut r, 3, 0.6);
    let rho0 = random_vector_mixture(&mut r, &g, 1, 2);
    let rho1 = random_vector_mixture(&mut r, &g, 1, 2);
    for &t in &[0.0, 0.5, 1.0] {
        let interp = unbalanced_vgmm_interpolate(&rho0, &rho1, 1.0, 1.0, t).unwrap();
        assert_abs_diff_eq!(interp.source_mass(), 0.0, epsilon = 1e-15);
    }
}

#[test]
fn mismatched_graphs_rejected() {
    let mut r = rng(85);
    let g1 = chain(3);
    let g2 = full_graph(3);
    let rho0 = random_vector_mixture(&mut r, &g1, 1, 2);
    let rho1 = random_vector_mixture(&mut r, &g2, 1, 2);
    assert!(matches!(
        vgmm_distance(&rho0, &rho1, 1.0, ApproachId::Quadratic),
        Err(Error::GraphMismatch)
    ));
}
