mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use planeslam::geometry::compose;
use planeslam::graph::{edge_error, EdgeKind, GraphEdge, GraphParams, PoseGraph};
use planeslam::{so3, PlaneSet, Pose, Vec3};

/// Edge measurement from `a` to `b`; the same convention `compose` uses.
fn measure(a: &Pose, b: &Pose) -> Pose {
    Pose::from_parts_unchecked(b.rotation * a.rotation.transpose(), a.rotation.tr_mul(&(b.translation - a.translation)))
}

/// Square circuit of `n` poses. Odometry is corrupted by Gaussian noise,
/// the closing edge is exact.
fn noisy_circuit(n: usize, sigma: f64, seed: u64) -> (PoseGraph, Vec<Pose>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let truth: Vec<Pose> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            Pose::new(so3::rot_z(a), Vec3::new(5.0 * a.cos(), 5.0 * a.sin(), 0.1 * k as f64)).unwrap()
        })
        .collect();
    let mut g = PoseGraph::new(truth[0], 0, PlaneSet::empty());
    for k in 1..n {
        let z = measure(&truth[k - 1], &truth[k]);
        let mut v = || Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        let dphi = v();
        let dt = v();
        g.add_frame(k as u64, PlaneSet::empty(), Pose::from_parts_unchecked(so3::exp(&dphi) * z.rotation, z.translation + dt));
    }
    g.edges.push(GraphEdge {
        from: 0,
        to: n - 1,
        relative: measure(&truth[0], &truth[n - 1]),
        kind: EdgeKind::LoopClosure,
        information: nalgebra::Matrix6::identity(),
    });
    (g, truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chi2_never_increases(seed in any::<u64>(), n in 12usize..40, sigma in 0.001f64..0.05) {
        let (mut g, truth) = noisy_circuit(n, sigma, seed);
        let before = g.chi2();
        let r = g.optimize(&GraphParams::default());
        prop_assert!(r.ran && !r.singular);
        prop_assert!(r.chi2_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(g.chi2() <= before);
        prop_assert_eq!(g.nodes[0].pose, truth[0]);
    }
}

#[test]
fn consistent_graph_is_a_fixed_point() {
    let (mut g, truth) = noisy_circuit(20, 0.0, 1);
    for (node, t) in g.nodes.iter().zip(&truth) {
        assert!((node.pose.translation - t.translation).norm() < 1e-9);
    }
    let before = g.poses();
    g.optimize(&GraphParams::default());
    for (a, b) in before.iter().zip(g.poses()) {
        assert!((a.translation - b.translation).norm() < 1e-9);
        assert!(so3::log(&(a.rotation * b.rotation.transpose())).norm() < 1e-9);
    }
}

#[test]
fn edge_error_vanishes_on_exact_measurements() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let a = common::random_pose(&mut rng, 180.0, 10.0);
        let b = common::random_pose(&mut rng, 180.0, 10.0);
        assert!(edge_error(&a, &b, &measure(&a, &b)).norm() < 1e-9);
        let c = compose(&a, &measure(&a, &b));
        assert!((c.translation - b.translation).norm() < 1e-9);
        assert!((c.rotation - b.rotation).norm() < 1e-9);
    }
}
