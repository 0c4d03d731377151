//! Procedural meshes used for fixtures, toy corpora and benchmarks.

use std::collections::HashMap;

use super::{TriangleMesh, Vec3};

/// Regular icosahedron inscribed in the unit sphere, outward winding.
pub fn icosahedron() -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriangleMesh::new(vertices, faces).expect("static icosahedron")
}

/// Unit sphere from `subdivisions` rounds of 1-to-4 splitting of the
/// icosahedron: 20·4^s faces.
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let base = icosahedron();
    let mut vertices = base.vertices().to_vec();
    let mut faces = base.faces().to_vec();
    for _ in 0..subdivisions {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere")
}

/// Axis-aligned cube of side 1 centred at the origin, each side split into
/// `n × n` squares of two triangles, outward winding.
pub fn cube(n: usize) -> TriangleMesh {
    let n = n.max(1);
    let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: [usize; 3], vertices: &mut Vec<Vec3>| {
        *ids.entry(p).or_insert_with(|| {
            let c = |i: usize| i as f64 / n as f64 - 0.5;
            vertices.push(Vec3::new(c(p[0]), c(p[1]), c(p[2])));
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [0, n] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let lattice = |i: usize, j: usize| {
                let mut p = [0; 3];
                p[axis] = side;
                p[u] = i;
                p[v] = j;
                p
            };
            let outward = if side == 0 { -1.0 } else { 1.0 };
            for i in 0..n {
                for j in 0..n {
                    let q = [
                        vid(lattice(i, j), &mut vertices),
                        vid(lattice(i + 1, j), &mut vertices),
                        vid(lattice(i + 1, j + 1), &mut vertices),
                        vid(lattice(i, j + 1), &mut vertices),
                    ];
                    for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                        let nrm = (vertices[tri[1]] - vertices[tri[0]])
                            .cross(&(vertices[tri[2]] - vertices[tri[0]]));
                        faces.push(if nrm[axis] * outward > 0.0 {
                            tri
                        } else {
                            [tri[0], tri[2], tri[1]]
                        });
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("cube")
}

/// Flat `nx × ny` grid of squares with side `spacing` in the z = 0 plane,
/// normals along +z.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outward(m: &TriangleMesh) -> bool {
        (0..m.num_faces()).all(|f| m.normals()[f].dot(&m.centroids()[f]) > 0.0)
    }

    #[test]
    fn icosphere_counts() {
        for (s, v, f) in [(0, 12, 20), (1, 42, 80), (3, 642, 1280)] {
            let m = icosphere(s);
            assert_eq!((m.num_vertices(), m.num_faces()), (v, f));
            assert!(outward(&m));
            assert!(m.degenerate_faces().is_empty());
        }
    }

    #[test]
    fn cube_is_closed_and_outward() {
        let m = cube(3);
        assert_eq!(m.num_faces(), 6 * 9 * 2);
        assert_eq!(m.num_vertices(), 6 * 9 + 2);
        assert!(outward(&m));
        assert!(m.edges().iter().all(|e| e.faces.len() == 2));
    }

    #[test]
    fn grid_normals_point_up() {
        let m = grid(3, 2, 0.5);
        assert_eq!(m.num_faces(), 12);
        assert!(m.normals().iter().all(|n| *n == Vec3::z()));
    }
}
