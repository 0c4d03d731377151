mod common;

use normalnet_core::mesh::shapes;
use normalnet_core::mesh::{parse_obj, parse_off, write_mesh};
use normalnet_core::{load_mesh, save_mesh, MeshFormat, Precision, TriangleMesh, Vec3};
use proptest::prelude::*;

#[test]
fn icosahedron_adjacency() {
    let m = shapes::icosahedron();
    assert_eq!(
        (m.num_vertices(), m.num_faces(), m.edges().len()),
        (12, 20, 30)
    );
    for f in 0..20 {
        assert_eq!(m.edge_adjacent(f).len(), 3);
        // three edge neighbours plus two more around each corner
        assert_eq!(m.vertex_adjacent(f).len(), 9);
        assert_eq!(m.ring_patch(f, 1).unwrap().len(), 10);
    }
    assert!(m.edges().iter().all(|e| e.faces.len() == 2));
    for v in 0..12 {
        assert_eq!(m.vertex_faces(v).len(), 5);
    }
}

#[test]
fn outward_normals_on_shapes() {
    for m in [shapes::icosphere(2), shapes::cube(3)] {
        for f in 0..m.num_faces() {
            assert!(m.normals()[f].dot(&m.centroids()[f]) > 0.0);
        }
    }
}

#[test]
fn obj_and_off_files_round_trip() {
    let m = common::lumpy_sphere(2, 0.2, 5);
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("a.obj", MeshFormat::Obj), ("a.off", MeshFormat::Off)] {
        let path = dir.path().join(name);
        save_mesh(&m, &path, fmt, Precision::Full).unwrap();
        assert_eq!(MeshFormat::from_path(&path).unwrap(), fmt);
        let back = load_mesh(&path, fmt).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.faces(), m.faces());
    }
}

#[test]
fn obj_and_off_parse_to_the_same_mesh() {
    let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 3 1 4\n";
    let off = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 1 2 3\n3 2 0 3\n";
    assert_eq!(parse_obj(obj).unwrap(), parse_off(off).unwrap());
}

fn arb_mesh() -> impl Strategy<Value = TriangleMesh> {
    (
        2usize..6,
        2usize..6,
        prop::collection::vec(-1e3f64..1e3, 64),
    )
        .prop_map(|(nx, ny, z)| {
            let g = shapes::grid(nx, ny, 0.75);
            let verts = g
                .vertices()
                .iter()
                .enumerate()
                .map(|(i, p)| Vec3::new(p.x, p.y, z[i % z.len()] * 1e-3))
                .collect();
            g.with_vertices(verts).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_precision_text_round_trips_exactly(m in arb_mesh()) {
        for fmt in [MeshFormat::Obj, MeshFormat::Off] {
            let text = write_mesh(&m, fmt, Precision::Full);
            let back = match fmt {
                MeshFormat::Obj => parse_obj(&text),
                MeshFormat::Off => parse_off(&text),
            }.unwrap();
            prop_assert_eq!(back.vertices(), m.vertices());
            prop_assert_eq!(back.faces(), m.faces());
        }
    }

    #[test]
    fn rings_grow_monotonically(seed in 0u64..200, f in 0usize..80) {
        let m = common::lumpy_sphere(1, 0.2, seed);
        let mut prev = vec![f];
        for r in 0..4 {
            let p = m.ring_patch(f, r).unwrap();
            prop_assert!(p.contains(f));
            prop_assert!(prev.iter().all(|g| p.contains(*g)));
            prev = p.members;
        }
    }

    #[test]
    fn scales_survive_dyadic_translation(seed in 0u64..200, k in -64i32..64) {
        let m = common::dyadic_sphere(1, seed);
        let shift = Vec3::new(k as f64 / 8.0, 2.0, -(k as f64) / 4.0);
        let moved = m.map_vertices(|p| p + shift).unwrap();
        prop_assert_eq!(m.scales().unwrap(), moved.scales().unwrap());
    }
}
