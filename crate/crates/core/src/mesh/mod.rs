//! Indexed triangle meshes with cached per-face geometry and adjacency.

mod io;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::par;

pub use io::{load_mesh, parse_obj, parse_off, save_mesh, write_mesh, MeshFormat, Precision};

pub type Vec3 = Vector3<f64>;

/// Faces whose doubled area falls below this fraction of their longest
/// squared edge are treated as zero-area.
const DEGENERATE_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Every face using this edge, degenerate ones included, ascending.
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    centroids: Vec<Vec3>,
    areas: Vec<f64>,
    degenerate: Vec<bool>,
    vertex_faces: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    face_edges: Vec<[usize; 3]>,
    edge_adjacent: Vec<Vec<usize>>,
    vertex_adjacent: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub center: usize,
    pub ring: usize,
    /// Ascending face indices, always containing `center`.
    pub members: Vec<usize>,
}

impl Patch {
    pub fn contains(&self, face: usize) -> bool {
        self.members.binary_search(&face).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshScales {
    /// Mean distance between centroids of edge-adjacent faces.
    pub d_c: f64,
    /// Average distance between adjacent faces; the same quantity as `d_c`.
    pub d_s: f64,
    pub e_avg: f64,
}

struct FaceGeometry {
    normal: Vec3,
    centroid: Vec3,
    area: f64,
    degenerate: bool,
}

fn face_geometry(p: [Vec3; 3]) -> FaceGeometry {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let cross = e1.cross(&e2);
    let len = cross.norm();
    let longest = e1
        .norm_squared()
        .max(e2.norm_squared())
        .max((p[2] - p[1]).norm_squared());
    let degenerate = !(len > DEGENERATE_RATIO * longest);
    FaceGeometry {
        normal: if degenerate {
            Vec3::zeros()
        } else {
            cross / len
        },
        centroid: (p[0] + p[1] + p[2]) / 3.0,
        area: 0.5 * len,
        degenerate,
    }
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&v) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidFace {
                    face: fi,
                    message: format!("vertex {v} out of range ({} vertices)", vertices.len()),
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidFace {
                    face: fi,
                    message: format!("repeated vertex in {f:?}"),
                });
            }
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidParams(format!("vertex {i} is not finite")));
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        faces: Vec::new(),
                    });
                    edges.len() - 1
                });
                edges[id].faces.push(fi);
                ids[k] = id;
            }
            face_edges.push(ids);
        }

        let mut mesh = TriangleMesh {
            vertices,
            faces,
            normals: Vec::new(),
            centroids: Vec::new(),
            areas: Vec::new(),
            degenerate: Vec::new(),
            vertex_faces: Vec::new(),
            edges,
            face_edges,
            edge_adjacent: Vec::new(),
            vertex_adjacent: Vec::new(),
        };
        mesh.refresh();
        Ok(mesh)
    }

    /// Same faces, new positions. Degeneracy and adjacency are recomputed
    /// because a moved vertex can collapse or restore a face.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::TopologyMismatch(format!(
                "{} vertices given, mesh has {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidParams(format!("vertex {i} is not finite")));
        }
        let mut mesh = TriangleMesh {
            vertices,
            ..self.clone()
        };
        mesh.refresh();
        Ok(mesh)
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        self.with_vertices(self.vertices.iter().map(f).collect())
    }

    fn refresh(&mut self) {
        let geo: Vec<FaceGeometry> = par::map_slice(&self.faces, |f| {
            face_geometry([
                self.vertices[f[0]],
                self.vertices[f[1]],
                self.vertices[f[2]],
            ])
        });
        self.normals = geo.iter().map(|g| g.normal).collect();
        self.centroids = geo.iter().map(|g| g.centroid).collect();
        self.areas = geo.iter().map(|g| g.area).collect();
        self.degenerate = geo.iter().map(|g| g.degenerate).collect();

        let mut vertex_faces = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            if !self.degenerate[fi] {
                for &v in f {
                    vertex_faces[v].push(fi);
                }
            }
        }
        self.vertex_faces = vertex_faces;

        let nf = self.faces.len();
        self.edge_adjacent = par::map_range(0..nf, |fi| {
            if self.degenerate[fi] {
                return Vec::new();
            }
            let mut adj: Vec<usize> = self.face_edges[fi]
                .iter()
                .flat_map(|&e| self.edges[e].faces.iter().copied())
                .filter(|&g| g != fi && !self.degenerate[g])
                .collect();
            adj.sort_unstable();
            adj.dedup();
            adj
        });
        self.vertex_adjacent = par::map_range(0..nf, |fi| {
            if self.degenerate[fi] {
                return Vec::new();
            }
            let mut adj: Vec<usize> = self.faces[fi]
                .iter()
                .flat_map(|&v| self.vertex_faces[v].iter().copied())
                .filter(|&g| g != fi)
                .collect();
            adj.sort_unstable();
            adj.dedup();
            adj
        });
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.degenerate[face]
    }

    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.degenerate[f])
            .collect()
    }

    /// Non-degenerate faces incident to `vertex`, ascending.
    pub fn vertex_faces(&self, vertex: usize) -> &[usize] {
        &self.vertex_faces[vertex]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn face_edges(&self, face: usize) -> [usize; 3] {
        self.face_edges[face]
    }

    /// Non-degenerate faces sharing an edge with `face`, ascending.
    pub fn edge_adjacent(&self, face: usize) -> &[usize] {
        &self.edge_adjacent[face]
    }

    /// Non-degenerate faces sharing at least one vertex with `face`,
    /// excluding `face` itself, ascending.
    pub fn vertex_adjacent(&self, face: usize) -> &[usize] {
        &self.vertex_adjacent[face]
    }

    pub fn corners(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0]],
            self.vertices[f[1]],
            self.vertices[f[2]],
        ]
    }

    pub fn same_topology(&self, other: &TriangleMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    pub fn check_face(&self, face: usize) -> Result<()> {
        if face >= self.faces.len() {
            Err(Error::OutOfRange {
                index: face,
                len: self.faces.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn ring_patch(&self, center: usize, ring: usize) -> Result<Patch> {
        self.check_face(center)?;
        Ok(Patch {
            center,
            ring,
            members: self.ring_members(center, ring),
        })
    }

    pub(crate) fn ring_members(&self, center: usize, ring: usize) -> Vec<usize> {
        let mut members = vec![center];
        let mut frontier = vec![center];
        for _ in 0..ring {
            let mut next: Vec<usize> = frontier
                .iter()
                .flat_map(|&f| self.vertex_adjacent[f].iter().copied())
                .filter(|g| members.binary_search(g).is_err())
                .collect();
            if next.is_empty() {
                break;
            }
            next.sort_unstable();
            next.dedup();
            members.extend_from_slice(&next);
            members.sort_unstable();
            frontier = next;
        }
        members
    }

    pub fn scales(&self) -> Result<MeshScales> {
        let mut dists = Vec::new();
        for f in 0..self.faces.len() {
            for &g in &self.edge_adjacent[f] {
                if g > f {
                    dists.push(self.centroid_distance(f, g));
                }
            }
        }
        if dists.is_empty() {
            return Err(Error::NoAdjacentFaces);
        }
        let d_c = par::pairwise_mean(&dists);
        let lengths: Vec<f64> = self
            .edges
            .iter()
            .map(|e| (self.vertices[e.vertices[0]] - self.vertices[e.vertices[1]]).norm())
            .collect();
        Ok(MeshScales {
            d_c,
            d_s: d_c,
            e_avg: par::pairwise_mean(&lengths),
        })
    }

    /// Centroid distance computed relative to a vertex of `f`, so it does not
    /// pick up rounding from the absolute position of the pair.
    pub(crate) fn centroid_distance(&self, f: usize, g: usize) -> f64 {
        let origin = self.vertices[self.faces[f][0]];
        (self.local_centroid(f, &origin) - self.local_centroid(g, &origin)).norm()
    }

    pub(crate) fn local_centroid(&self, face: usize, origin: &Vec3) -> Vec3 {
        let [a, b, c] = self.corners(face);
        ((a - origin) + (b - origin) + (c - origin)) / 3.0
    }
}

pub fn compute_scales(mesh: &TriangleMesh) -> Result<MeshScales> {
    mesh.scales()
}

pub fn build_ring_patch(mesh: &TriangleMesh, center: usize, ring: usize) -> Result<Patch> {
    mesh.ring_patch(center, ring)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn square_scales() {
        let s = square().scales().unwrap();
        assert!((s.d_c - 2.0f64.sqrt() / 3.0).abs() < 1e-15);
        assert_eq!(s.d_c, s.d_s);
        assert!((s.e_avg - (4.0 + 2.0f64.sqrt()) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_triangle_has_no_scales() {
        let m =
            TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.scales(), Err(Error::NoAdjacentFaces)));
        assert_eq!(m.ring_patch(0, 3).unwrap().members, vec![0]);
    }

    #[test]
    fn bad_faces_are_rejected() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn zero_area_face_is_excluded() {
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        assert_eq!(m.degenerate_faces(), vec![1]);
        assert_eq!(m.normals()[1], Vec3::zeros());
        assert!(m.vertex_adjacent(0).is_empty());
        assert_eq!(m.ring_patch(0, 2).unwrap().members, vec![0]);
    }

    #[test]
    fn moving_vertices_keeps_faces() {
        let m = square();
        let lifted = m.map_vertices(|v| v + Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert!(m.same_topology(&lifted));
        assert_eq!(lifted.normals(), m.normals());
    }
}
