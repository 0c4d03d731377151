mod common;

use normalnet_core::mesh::shapes;
use normalnet_core::voxel::{rasterize, VoxelParams, Voxelizer};
use normalnet_core::{triangle_box_overlap, TriangleMesh, Vec3, VolumetricGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every face of the mesh tested against every cube of the grid.
fn brute_force_grid(mesh: &TriangleMesh, face: usize, params: &VoxelParams) -> Vec<f32> {
    let vox = Voxelizer::new(mesh, params).unwrap();
    let frame = vox.frame(face).unwrap();
    let t = params.half_extent as i64;
    let side = params.side();
    let mut sums = vec![Vec3::zeros(); side * side * side];
    let mut hit = vec![false; sums.len()];
    for g in 0..mesh.num_faces() {
        let tri = mesh
            .corners(g)
            .map(|p| frame.transform.apply(&p) / vox.cube_size());
        let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
        let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
        if lo.min() > t as f64 + 0.5 || hi.max() < -(t as f64) - 0.5 {
            continue;
        }
        let n = frame.transform.rotate(&mesh.normals()[g]);
        let mut i = 0;
        for x in -t..=t {
            for y in -t..=t {
                for z in -t..=t {
                    let c = Vec3::new(x as f64, y as f64, z as f64);
                    if triangle_box_overlap(&tri, &c, 0.5) {
                        sums[i] += n;
                        hit[i] = true;
                    }
                    i += 1;
                }
            }
        }
    }
    sums.iter()
        .zip(&hit)
        .flat_map(|(s, &h)| {
            if h && s.norm() >= 1e-9 {
                let u = s.normalize();
                [u.x as f32, u.y as f32, u.z as f32]
            } else {
                [0.0; 3]
            }
        })
        .collect()
}

#[test]
fn grids_match_brute_force_over_the_whole_mesh() {
    // about 500 faces
    let m = common::bumpy_grid(16, 21);
    assert!(m.num_faces() >= 500);
    let params = VoxelParams::default();
    let vox = Voxelizer::new(&m, &params).unwrap();
    for face in [0, 137, 255, 300, 511] {
        let got = vox.face(face).unwrap();
        let want = brute_force_grid(&m, face, &params);
        let worst = got
            .labels()
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(worst < 1e-5, "face {face}: worst label difference {worst}");
    }
}

#[test]
fn grid_is_41_cubed_by_3() {
    let m = shapes::icosphere(2);
    let g = Voxelizer::new(&m, &VoxelParams::default())
        .unwrap()
        .face(3)
        .unwrap();
    assert_eq!(g.side(), 41);
    assert_eq!(g.labels().len(), 41 * 41 * 41 * 3);
}

#[test]
fn dyadic_translation_is_bit_identical() {
    let m = common::dyadic_sphere(2, 4);
    let params = VoxelParams::default();
    let shift = Vec3::new(3.25, -17.5, 0.015625);
    let moved = m.map_vertices(|p| p + shift).unwrap();
    let a = Voxelizer::new(&m, &params).unwrap();
    let b = Voxelizer::new(&moved, &params).unwrap();
    assert_eq!(a.cube_size(), b.cube_size());
    for f in (0..m.num_faces()).step_by(23) {
        assert_eq!(a.face(f).unwrap(), b.face(f).unwrap(), "face {f}");
    }
}

#[test]
fn occupied_cubes_carry_unit_labels() {
    let m = common::lumpy_sphere(3, 0.05, 2);
    let vox = Voxelizer::new(&m, &VoxelParams::default()).unwrap();
    let g = vox.face(100).unwrap();
    let mut count = 0;
    for c in g.labels().chunks_exact(3) {
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if n > 0.0 {
            assert!((n - 1.0).abs() < 1e-6);
            count += 1;
        }
    }
    assert_eq!(count, g.occupied());
}

#[test]
fn center_cube_label_follows_the_rotated_face_normal() {
    let m = common::lumpy_sphere(2, 0.02, 8);
    let vox = Voxelizer::new(&m, &VoxelParams::default()).unwrap();
    for f in [0, 50, 99] {
        let (g, frame): (VolumetricGrid, _) = vox.face_with_frame(f).unwrap();
        let l = g.label(0, 0, 0).unwrap();
        let n = frame.transform.rotate(&m.normals()[f]);
        // the centre cube averages the face with a few near-parallel neighbours
        let dot = l[0] as f64 * n.x + l[1] as f64 * n.y + l[2] as f64 * n.z;
        assert!(dot > 0.99, "face {f}: {dot}");
        // and the patch normal maps onto +y, so the face normal is close to it
        assert!(n.y > 0.95);
    }
}

#[test]
fn sat_agrees_with_monte_carlo_sampling() {
    // Samples on the triangle that land in the box prove an overlap, so the
    // test must never report a miss for them.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut contradictions = 0;
    let mut witnessed = 0;
    for _ in 0..10_000 {
        let tri = [0; 3].map(|_| {
            Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            )
        });
        let c = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let h = rng.random_range(0.1..1.0);
        let sat = triangle_box_overlap(&tri, &c, h);
        let seen = (0..10_000).any(|_| {
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            let p = tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v;
            (p - c).amax() <= h
        });
        if seen {
            witnessed += 1;
            if !sat {
                contradictions += 1;
            }
        }
    }
    assert_eq!(contradictions, 0);
    assert!(witnessed > 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sat_is_symmetric_under_vertex_order(
        a in prop::array::uniform3(-2.0f64..2.0),
        b in prop::array::uniform3(-2.0f64..2.0),
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let [a, b, c] = [a, b, c].map(Vec3::from);
        let o = Vec3::zeros();
        let r = triangle_box_overlap(&[a, b, c], &o, 0.5);
        prop_assert_eq!(r, triangle_box_overlap(&[b, c, a], &o, 0.5));
        prop_assert_eq!(r, triangle_box_overlap(&[c, b, a], &o, 0.5));
        // shifting box and triangle together changes nothing for dyadic shifts
        let s = Vec3::new(0.25, -0.5, 1.0);
        prop_assert_eq!(r, triangle_box_overlap(&[a + s, b + s, c + s], &s, 0.5));
    }

    #[test]
    fn vertex_inside_box_always_overlaps(
        p in prop::array::uniform3(-0.5f64..0.5),
        b in prop::array::uniform3(-3.0f64..3.0),
        c in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let tri = [Vec3::from(p), Vec3::from(b), Vec3::from(c)];
        prop_assert!(triangle_box_overlap(&tri, &Vec3::zeros(), 0.5));
    }

    #[test]
    fn frame_candidates_keep_face_geometry(seed in 0u64..500) {
        let m = common::lumpy_sphere(2, 0.1, seed);
        let vox = Voxelizer::new(&m, &VoxelParams::default()).unwrap();
        let f = (seed as usize * 37) % m.num_faces();
        let frame = vox.frame(f).unwrap();
        let own = frame.candidates.iter().find(|c| c.face == f).unwrap();
        // the face's own centroid lands at the origin of the frame
        let centroid = (own.corners[0] + own.corners[1] + own.corners[2]) / 3.0;
        prop_assert!(centroid.norm() < 1e-9);
        let r = rasterize(&frame, 20);
        prop_assert!(r.label(0, 0, 0).is_some_and(|l| l != [0.0; 3]));
    }
}

#[test]
fn cubes_per_face_stay_in_the_loose_band() {
    // Count of cubes each face overlaps in its own grid, default parameters.
    for m in [shapes::icosphere(3), common::lumpy_sphere(3, 0.01, 6)] {
        let vox = Voxelizer::new(&m, &VoxelParams::default()).unwrap();
        let counts: Vec<usize> = (0..m.num_faces())
            .step_by(5)
            .map(|f| vox.face_cube_count(f).unwrap())
            .collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        assert!((20.0..=120.0).contains(&mean), "mean {mean}");
    }
}
