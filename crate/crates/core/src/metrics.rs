//! Denoising quality metrics: mean angular normal error and the L2
//! vertex-to-surface distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleStat {
    /// Mean of the per-face angles, degrees.
    #[default]
    Mean,
    /// Mean of the squared per-face angles, degrees squared.
    MeanSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub e_a: f64,
    pub e_v: f64,
    pub faces: usize,
    pub vertices: usize,
}

pub fn evaluate(denoised: &TriangleMesh, truth: &TriangleMesh) -> Result<MetricReport> {
    Ok(MetricReport {
        e_a: mean_angular_error(denoised, truth)?,
        e_v: vertex_l2_error(denoised, truth)?,
        faces: denoised.num_faces(),
        vertices: denoised.num_vertices(),
    })
}

/// Angle in degrees between two unit vectors. `atan2` of sine and cosine
/// stays in [0, 180] without clamping and is exactly 0 for equal inputs,
/// where `acos` of a rounded dot product is not.
pub fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

pub fn mean_angular_error(denoised: &TriangleMesh, truth: &TriangleMesh) -> Result<f64> {
    angular_error(denoised, truth, AngleStat::Mean)
}

/// Averages over faces that are non-degenerate in both meshes.
pub fn angular_error(
    denoised: &TriangleMesh,
    truth: &TriangleMesh,
    stat: AngleStat,
) -> Result<f64> {
    if !denoised.same_topology(truth) {
        return Err(Error::TopologyMismatch(format!(
            "{}/{} vertices/faces against {}/{}",
            denoised.num_vertices(),
            denoised.num_faces(),
            truth.num_vertices(),
            truth.num_faces()
        )));
    }
    let angles: Vec<f64> = (0..denoised.num_faces())
        .filter(|&f| !denoised.is_degenerate(f) && !truth.is_degenerate(f))
        .map(|f| {
            let a = angle_deg(&denoised.normals()[f], &truth.normals()[f]);
            match stat {
                AngleStat::Mean => a,
                AngleStat::MeanSquare => a * a,
            }
        })
        .collect();
    Ok(par::pairwise_mean(&angles))
}

/// Closest point of triangle `abc` to `p`, by Voronoi-region classification.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        return if denom > 0.0 {
            a + ab * (d1 / denom)
        } else {
            *a
        };
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        return if denom > 0.0 {
            a + ac * (d2 / denom)
        } else {
            *a
        };
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        return if denom > 0.0 {
            b + (c - b) * ((d4 - d3) / denom)
        } else {
            *b
        };
    }
    let sum = va + vb + vc;
    if !(sum > 0.0) {
        // Collinear corners that slipped through the edge tests.
        return [*a, *b, *c]
            .into_iter()
            .min_by(|x, y| (p - x).norm_squared().total_cmp(&(p - y).norm_squared()))
            .unwrap();
    }
    let v = vb / sum;
    let w = vc / sum;
    a + ab * v + ac * w
}

pub fn point_triangle_distance_sq(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    (p - closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2])).norm_squared()
}

/// Bounding-volume hierarchy over triangles for nearest-surface queries.
struct Bvh {
    tris: Vec<[Vec3; 3]>,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: range into `order`. Inner: children indices.
    kind: NodeKind,
}

enum NodeKind {
    Leaf(usize, usize),
    Inner(usize, usize),
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    fn new(tris: Vec<[Vec3; 3]>) -> Self {
        let mut bvh = Bvh {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        let n = bvh.order.len();
        bvh.build(0, n);
        bvh
    }

    fn bounds(&self, lo_i: usize, hi_i: usize) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[lo_i..hi_i] {
            for p in &self.tris[t] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf(start, end),
        });
        if end - start > LEAF_SIZE {
            let axis = (hi - lo).imax();
            let tris = &self.tris;
            let key = |t: &usize| tris[*t].iter().map(|p| p[axis]).sum::<f64>();
            self.order[start..end].sort_by(|a, b| key(a).total_cmp(&key(b)));
            let mid = (start + end) / 2;
            let left = self.build(start, mid);
            let right = self.build(mid, end);
            self.nodes[id].kind = NodeKind::Inner(left, right);
        }
        id
    }

    fn box_distance_sq(node: &Node, p: &Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let d = (node.lo[k] - p[k]).max(p[k] - node.hi[k]).max(0.0);
                d * d
            })
            .sum()
    }

    fn nearest_sq(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_distance_sq(node, p) > best {
                continue;
            }
            match node.kind {
                NodeKind::Leaf(s, e) => {
                    for &t in &self.order[s..e] {
                        best = best.min(point_triangle_distance_sq(p, &self.tris[t]));
                    }
                }
                NodeKind::Inner(l, r) => {
                    let (dl, dr) = (
                        Self::box_distance_sq(&self.nodes[l], p),
                        Self::box_distance_sq(&self.nodes[r], p),
                    );
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        best
    }
}

/// Root mean square distance from the denoised vertices to the truth surface.
pub fn vertex_l2_error(denoised: &TriangleMesh, truth: &TriangleMesh) -> Result<f64> {
    if truth.num_faces() == 0 || denoised.num_vertices() == 0 {
        return Err(Error::EmptyMesh);
    }
    let bvh = Bvh::new((0..truth.num_faces()).map(|f| truth.corners(f)).collect());
    let sq = par::map_slice(denoised.vertices(), |v| bvh.nearest_sq(v));
    Ok(par::pairwise_mean(&sq).sqrt())
}
