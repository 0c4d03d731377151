mod common;

use normalnet_core::mesh::shapes;
use normalnet_core::metrics::angle_deg;
use normalnet_core::pipeline::{
    advance_training_meshes, build_training_set, categorize_face, head_index, init_weights,
    make_targets, network_spec, select_cnn, DataOptions, FaceCategory, PipelineConfig, PresetTable,
    StagePlan, DEFAULT_MU_G_LIST,
};
use normalnet_core::voxel::VoxelParams;
use normalnet_core::{add_noise, NoiseSpec, TriangleMesh, Vec3};
use proptest::prelude::*;

/// A flat grid folded upward along `x = n/2` by `degrees`.
fn crease(n: usize, degrees: f64) -> TriangleMesh {
    let g = shapes::grid(n, n, 1.0);
    let mid = n as f64 / 2.0;
    let t = degrees.to_radians();
    g.map_vertices(|p| {
        if p.x <= mid {
            *p
        } else {
            let d = p.x - mid;
            Vec3::new(mid + d * t.cos(), p.y, d * t.sin())
        }
    })
    .unwrap()
}

fn face_touching_crease(m: &TriangleMesh, n: usize) -> usize {
    let mid = n as f64 / 2.0;
    (0..m.num_faces())
        .find(|&f| {
            let c = m.centroids()[f];
            c.x < mid && c.x > mid - 0.5 && (c.y - mid).abs() < 1.0
        })
        .unwrap()
}

#[test]
fn cnn_schedule_follows_the_iteration_intervals() {
    let intervals = [
        (1, 1, 1),
        (2, 2, 2),
        (3, 3, 3),
        (4, 5, 4),
        (6, 10, 5),
        (11, 25, 6),
    ];
    for it in 1..=25 {
        let want = intervals
            .iter()
            .find(|(a, b, _)| (*a..=*b).contains(&it))
            .unwrap()
            .2;
        assert_eq!(select_cnn(it, 25).unwrap(), want, "iteration {it}");
    }
    assert_eq!(StagePlan::new(25).required(), vec![1, 2, 3, 4, 5, 6]);
}

#[test]
fn presets_round_trip() {
    let t = PresetTable::builtin();
    assert_eq!(t.models.len(), 19);
    let back = PresetTable::parse(&t.to_json()).unwrap();
    assert_eq!(back, t);
    for p in &t.models {
        assert!(
            head_index(&DEFAULT_MU_G_LIST, p.mu_g).is_ok(),
            "{}",
            p.model
        );
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let cfg = PipelineConfig {
        nf: 4,
        seed: 9,
        ..Default::default()
    };
    std::fs::write(&path, cfg.to_json()).unwrap();
    assert_eq!(PipelineConfig::load(&path).unwrap(), cfg);
}

#[test]
fn crease_of_35_degrees_is_curved() {
    let m = crease(8, 35.0);
    let f = face_touching_crease(&m, 8);
    let (cat, a) = categorize_face(&m, f).unwrap();
    assert!((a - 35.0).abs() < 1e-9);
    assert_eq!(cat, FaceCategory::Curved);
}

#[test]
fn wider_mu_g_pulls_targets_across_a_crease() {
    let m = crease(8, 60.0);
    let f = face_touching_crease(&m, 8);
    let t = make_targets(&m, m.normals(), f, &DEFAULT_MU_G_LIST).unwrap();
    let own = m.normals()[f];
    let dev: Vec<f64> = t.iter().map(|n| angle_deg(n, &own)).collect();
    for w in dev.windows(2) {
        assert!(w[0] <= w[1], "{dev:?}");
    }
    assert!(dev[5] > dev[0] + 1.0, "{dev:?}");
}

#[test]
fn training_set_is_deterministic_and_balanced() {
    let truth = shapes::cube(6);
    let noisy = add_noise(&truth, &NoiseSpec::gaussian(0.3, 1)).unwrap();
    let opts = DataOptions {
        voxel: VoxelParams {
            half_extent: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    let pairs = vec![(noisy, truth)];
    let a = build_training_set(&pairs, 5, 3, &opts, 1).unwrap();
    let b = build_training_set(&pairs, 5, 3, &opts, 1).unwrap();
    assert_eq!(a.tuples, b.tuples);
    let short: usize = a.shortfalls.iter().map(|s| s.available).sum();
    assert_eq!(a.tuples.len(), 5 * (4 - a.shortfalls.len()) + short);
    for t in &a.tuples {
        assert_eq!(t.targets.len(), 6);
        for n in &t.targets {
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            assert!((len - 1.0).abs() < 1e-6);
        }
        assert_eq!(t.provenance.mesh, 0);
        assert_eq!(t.grid.side(), 9);
    }
}

#[test]
fn stage_filtering_uses_the_fourth_head_and_keeps_topology() {
    assert_eq!(head_index(&DEFAULT_MU_G_LIST, 0.4).unwrap(), 3);
    let voxel = VoxelParams {
        half_extent: 2,
        ..Default::default()
    };
    let spec = network_spec(2, &DEFAULT_MU_G_LIST);
    let w = init_weights(&spec, 4).unwrap();
    let truth = shapes::icosphere(1);
    let noisy = add_noise(&truth, &NoiseSpec::gaussian(0.2, 2)).unwrap();
    let out =
        advance_training_meshes(&[(noisy.clone(), truth.clone())], &spec, &w, &voxel).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].0.faces(), noisy.faces());
    assert_eq!(out[0].1, truth);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_total_and_monotone(nf in 1usize..60) {
        let s = StagePlan::new(nf).schedule();
        prop_assert_eq!(s.len(), nf);
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.iter().all(|&c| (1..=6).contains(&c)));
    }

    #[test]
    fn every_face_gets_one_category(seed in 0u64..100) {
        let m = common::lumpy_sphere(1, 0.3, seed);
        for f in 0..m.num_faces() {
            let (cat, a) = categorize_face(&m, f).unwrap();
            prop_assert_eq!(cat, FaceCategory::from_angle(a));
        }
    }
}
