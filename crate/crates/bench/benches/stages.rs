use criterion::{black_box, criterion_group, criterion_main, Criterion};

use planeslam::extraction::{extract, ExtractionParams};
use planeslam::graph::{EdgeKind, GraphEdge, GraphParams, Information, PoseGraph};
use planeslam::mapping::{merge_plane_sets, MergeParams};
use planeslam::planning::{segment_collides_planes, Segment};
use planeslam::registration::{register, RegistrationParams};
use planeslam::{so3, PlaneSet, Pose, Vec3};
use planeslam_bench::{grid_planes, offset_pose, scan_pair, scene_scan};

fn extraction(c: &mut Criterion) {
    let params = ExtractionParams::default();
    for name in ["room", "blocks"] {
        let scan = scene_scan(name);
        c.bench_function(&format!("extract/{name}"), |b| b.iter(|| extract(black_box(&scan), &params).unwrap()));
    }
}

fn registration(c: &mut Criterion) {
    let params = RegistrationParams::default();
    let target = grid_planes(12);
    let source = target.transformed(&offset_pose());
    c.bench_function("register/synthetic_12", |b| b.iter(|| register(black_box(&source), &target, &params).unwrap()));

    let (a, bscan) = scan_pair("blocks");
    let (pa, pb) = (extract(&a, &ExtractionParams::default()).unwrap(), extract(&bscan, &ExtractionParams::default()).unwrap());
    c.bench_function("register/blocks_pair", |b| b.iter(|| register(black_box(&pb), &pa, &params).unwrap()));
}

fn merging(c: &mut Criterion) {
    let params = MergeParams::default();
    let map = grid_planes(60);
    let frame: PlaneSet = map.transformed(&Pose::from_translation(Vec3::new(0.05, 0.02, 0.0)));
    c.bench_function("merge/60_into_60", |b| b.iter(|| merge_plane_sets(black_box(&map), &frame, &params)));
}

fn pose_graph(c: &mut Criterion) {
    let step = Pose::new(so3::rot_z(2f64.to_radians() + 0.002), Vec3::new(0.5, 0.0, 0.0)).unwrap();
    let mut g = PoseGraph::new(Pose::identity(), 0, PlaneSet::empty());
    for k in 0..180 {
        g.add_frame(k + 1, PlaneSet::empty(), step);
    }
    // The chain overshoots a full circle slightly; the loop edge says it closes.
    g.edges.push(GraphEdge {
        from: 0,
        to: 180,
        relative: Pose::identity(),
        kind: EdgeKind::LoopClosure,
        information: Information::identity(),
    });
    let params = GraphParams::default();
    c.bench_function("graph/optimize_181_nodes", |b| {
        b.iter(|| {
            let mut g = g.clone();
            g.optimize(&params)
        })
    });
}

fn collision(c: &mut Criterion) {
    let planes = grid_planes(100).into_planes();
    let seg = Segment::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(30.0, 7.0, 5.0)).unwrap();
    c.bench_function("collide/segment_100_planes", |b| b.iter(|| segment_collides_planes(black_box(&seg), &planes)));
}

criterion_group!(benches, extraction, registration, merging, pose_graph, collision);
criterion_main!(benches);
