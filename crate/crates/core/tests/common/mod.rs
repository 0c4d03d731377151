#![allow(dead_code)]

use normalnet_core::mesh::shapes;
use normalnet_core::{TriangleMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A jittered height field over an `n × n` quad grid (`2n²` faces).
pub fn bumpy_grid(n: usize, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = shapes::grid(n, n, 1.0);
    let verts = base
        .vertices()
        .iter()
        .map(|p| {
            Vec3::new(
                p.x + rng.random_range(-0.2..0.2),
                p.y + rng.random_range(-0.2..0.2),
                0.3 * (p.x * 0.7).sin() * (p.y * 0.5).cos() + rng.random_range(-0.15..0.15),
            )
        })
        .collect();
    base.with_vertices(verts).unwrap()
}

/// Unit icosphere with every vertex pushed radially by up to `amp`.
pub fn lumpy_sphere(subdivisions: usize, amp: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = shapes::icosphere(subdivisions);
    let verts = base
        .vertices()
        .iter()
        .map(|p| p * (1.0 + rng.random_range(-amp..=amp)))
        .collect();
    base.with_vertices(verts).unwrap()
}

/// Small random fixtures, each with at most 200 faces.
pub fn small_fixtures() -> Vec<TriangleMesh> {
    vec![
        bumpy_grid(10, 1),
        bumpy_grid(7, 2),
        lumpy_sphere(1, 0.15, 3),
        lumpy_sphere(1, 0.3, 4),
        bumpy_grid(9, 5),
    ]
}

/// Random coordinates on the dyadic lattice `k / 64`, which stay exact
/// under translation by other multiples of `1 / 64` of moderate size.
pub fn dyadic_sphere(subdivisions: usize, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = shapes::icosphere(subdivisions);
    let verts = base
        .vertices()
        .iter()
        .map(|p| {
            let q = p * 4.0 * (1.0 + rng.random_range(-0.05..0.05));
            q.map(|c| (c * 64.0).round() / 64.0)
        })
        .collect();
    base.with_vertices(verts).unwrap()
}

/// Faces sharing at least one vertex with `face`, grown `ring` times, found
/// by scanning every face.
pub fn naive_ring(mesh: &TriangleMesh, face: usize, ring: usize) -> Vec<usize> {
    let mut set = vec![face];
    for _ in 0..ring {
        let verts: Vec<usize> = set.iter().flat_map(|&f| mesh.faces()[f]).collect();
        let mut next = set.clone();
        for (g, tri) in mesh.faces().iter().enumerate() {
            if !mesh.is_degenerate(g) && tri.iter().any(|v| verts.contains(v)) && !next.contains(&g)
            {
                next.push(g);
            }
        }
        set = next;
    }
    set.sort_unstable();
    set
}

/// Plain double loop over faces: bilateral normal filter with guidance
/// normals, normalized.
pub fn naive_filter(mesh: &TriangleMesh, guidance: &[Vec3], mu_g: f64, mu_d: f64) -> Vec<Vec3> {
    let faces = mesh.faces();
    let verts = mesh.vertices();
    let centroid = |f: usize| {
        let [a, b, c] = faces[f];
        (verts[a] + verts[b] + verts[c]) / 3.0
    };
    let normal_area = |f: usize| {
        let [a, b, c] = faces[f];
        let n = (verts[b] - verts[a]).cross(&(verts[c] - verts[a]));
        (n.normalize(), 0.5 * n.norm())
    };
    (0..faces.len())
        .map(|i| {
            let ring = naive_ring(mesh, i, 2);
            let mut acc = Vec3::zeros();
            for j in 0..faces.len() {
                if !ring.contains(&j) {
                    continue;
                }
                let (n_j, a_j) = normal_area(j);
                let dc = (centroid(i) - centroid(j)).norm_squared();
                let dg = (guidance[i] - guidance[j]).norm_squared();
                let w = a_j * (-dc / (2.0 * mu_d * mu_d)).exp() * (-dg / (2.0 * mu_g * mu_g)).exp();
                acc += n_j * w;
            }
            acc / acc.norm()
        })
        .collect()
}
