//! Face-local voxelization: the neighbourhood of a face is rotated so its
//! average normal points along a fixed direction, centred on the face
//! centroid, and rasterized into a cube grid labelled with face normals.

mod io;
mod sat;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};
use crate::par;

pub use io::{load_grid, read_grid, save_grid, write_grid};
pub use sat::triangle_box_overlap;

/// Label sums shorter than this are treated as cancelled.
const CANCEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelParams {
    /// Half extent in cubes; the grid side is `2·half_extent + 1`.
    pub half_extent: usize,
    /// Cube side is the mean adjacent-face distance over this divisor.
    pub alpha_c: f64,
    /// Direction the patch-average normal is rotated onto.
    pub target: [f64; 3],
    pub candidate_ring: usize,
}

impl Default for VoxelParams {
    fn default() -> Self {
        VoxelParams {
            half_extent: 20,
            alpha_c: 8.0,
            target: [0.0, 1.0, 0.0],
            candidate_ring: 4,
        }
    }
}

impl VoxelParams {
    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn target(&self) -> Vec3 {
        Vec3::from(self.target)
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_extent < 1 {
            return Err(Error::InvalidParams("half extent must be >= 1".into()));
        }
        if !(self.alpha_c > 0.0 && self.alpha_c.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha_c must be positive, got {}",
                self.alpha_c
            )));
        }
        if (self.target().norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(
                "target direction must be unit length".into(),
            ));
        }
        Ok(())
    }
}

/// `v' = rotation · v + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl NormalizationTransform {
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.rotation * v + self.translation
    }

    pub fn rotate(&self, n: &Vec3) -> Vec3 {
        self.rotation * n
    }

    /// Maps a direction from the normalized frame back to model space.
    pub fn unrotate(&self, n: &Vec3) -> Vec3 {
        self.rotation.transpose() * n
    }
}

/// Minimal rotation taking unit `from` onto unit `to`. For opposite vectors
/// the rotation is a half turn about the first coordinate axis least
/// aligned with `to`, made orthogonal to it; for `to = +y` that is the x axis.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Matrix3<f64> {
    let sum = from + to;
    if sum.norm() < 1e-9 {
        let mut best = 0;
        for k in 1..3 {
            if to[k].abs() < to[best].abs() {
                best = k;
            }
        }
        let e = Vec3::ith(best, 1.0);
        let axis = (e - to * e.dot(to)).normalize();
        return axis * axis.transpose() * 2.0 - Matrix3::identity();
    }
    // 1 + cos, computed without cancellation near the antipode
    let one_plus_cos = 0.5 * sum.norm_squared();
    let k = from.cross(to).cross_matrix();
    Matrix3::identity() + k + k * k / one_plus_cos
}

fn patch_normal(mesh: &TriangleMesh, face: usize) -> Result<Vec3> {
    mesh.check_face(face)?;
    if mesh.is_degenerate(face) {
        return Err(Error::DegenerateFace(face));
    }
    let sum: Vec3 = mesh
        .ring_members(face, 2)
        .iter()
        .map(|&f| mesh.normals()[f])
        .sum();
    let len = sum.norm();
    if len < 1e-12 {
        return Err(Error::DegeneratePatchNormal(face));
    }
    Ok(sum / len)
}

pub fn compute_normalization(
    mesh: &TriangleMesh,
    face: usize,
    params: &VoxelParams,
) -> Result<NormalizationTransform> {
    params.validate()?;
    let n = patch_normal(mesh, face)?;
    let rotation = rotation_between(&n, &params.target());
    Ok(NormalizationTransform {
        rotation,
        translation: -(rotation * mesh.centroids()[face]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumetricGrid {
    half_extent: usize,
    cube_size: f32,
    /// `side³` labels, x slowest then y then z, three components each.
    labels: Vec<f32>,
    occupied: usize,
    cancelled: usize,
}

impl VolumetricGrid {
    pub fn new(half_extent: usize, cube_size: f32, labels: Vec<f32>) -> Result<Self> {
        let side = 2 * half_extent + 1;
        if labels.len() != side * side * side * 3 {
            return Err(Error::InvalidParams(format!(
                "{} label values for a grid of side {side}",
                labels.len()
            )));
        }
        let occupied = labels
            .chunks_exact(3)
            .filter(|l| l.iter().any(|&c| c != 0.0))
            .count();
        Ok(VolumetricGrid {
            half_extent,
            cube_size,
            labels,
            occupied,
            cancelled: 0,
        })
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn cube_size(&self) -> f32 {
        self.cube_size
    }

    pub fn labels(&self) -> &[f32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<f32> {
        self.labels
    }

    /// Number of cubes with a non-zero label.
    pub fn occupied(&self) -> usize {
        self.occupied
    }

    /// Cubes whose overlapping normals summed to zero.
    pub fn cancelled(&self) -> usize {
        self.cancelled
    }

    /// Flat cube index of B(x, y, z), coordinates in `-T..=T`.
    pub fn index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        let t = self.half_extent as i64;
        let s = self.side() as i64;
        if [x, y, z].iter().any(|c| c.abs() > t) {
            return None;
        }
        Some((((x + t) * s + (y + t)) * s + (z + t)) as usize)
    }

    pub fn label(&self, x: i64, y: i64, z: i64) -> Option<[f32; 3]> {
        self.index(x, y, z).map(|i| {
            [
                self.labels[3 * i],
                self.labels[3 * i + 1],
                self.labels[3 * i + 2],
            ]
        })
    }
}

/// A candidate face in the normalized frame, scaled to cube units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTriangle {
    pub face: usize,
    pub corners: [Vec3; 3],
    pub normal: Vec3,
}

/// Everything a grid is computed from: candidate faces mapped into the
/// normalized frame and divided by the cube size, so cube B(x, y, z) is
/// the cube of half side 0.5 around (x, y, z).
#[derive(Debug, Clone)]
pub struct FaceFrame {
    pub face: usize,
    pub transform: NormalizationTransform,
    pub cube_size: f64,
    /// Ascending by face index.
    pub candidates: Vec<FrameTriangle>,
}

/// Voxelizes faces of one mesh; the cube size is fixed per mesh.
pub struct Voxelizer<'a> {
    mesh: &'a TriangleMesh,
    params: VoxelParams,
    cube_size: f64,
}

impl<'a> Voxelizer<'a> {
    pub fn new(mesh: &'a TriangleMesh, params: &VoxelParams) -> Result<Self> {
        params.validate()?;
        let cube_size = mesh.scales()?.d_s / params.alpha_c;
        Ok(Voxelizer {
            mesh,
            params: *params,
            cube_size,
        })
    }

    pub fn cube_size(&self) -> f64 {
        self.cube_size
    }

    pub fn params(&self) -> &VoxelParams {
        &self.params
    }

    /// Positions are taken relative to a corner of the face before rotating,
    /// so the frame depends only on coordinate differences and a translation
    /// that moves every coordinate exactly leaves it bit-identical.
    pub fn frame(&self, face: usize) -> Result<FaceFrame> {
        let mesh = self.mesh;
        let n = patch_normal(mesh, face)?;
        let rotation = rotation_between(&n, &self.params.target());
        let origin = mesh.vertices()[mesh.faces()[face][0]];
        let center = mesh.local_centroid(face, &origin);
        let inv = 1.0 / self.cube_size;
        let candidates = mesh
            .ring_members(face, self.params.candidate_ring)
            .into_iter()
            .filter(|&g| !mesh.is_degenerate(g))
            .map(|g| {
                let corners = mesh
                    .corners(g)
                    .map(|p| (rotation * ((p - origin) - center)) * inv);
                FrameTriangle {
                    face: g,
                    corners,
                    normal: rotation * mesh.normals()[g],
                }
            })
            .collect();
        Ok(FaceFrame {
            face,
            transform: NormalizationTransform {
                rotation,
                translation: -(rotation * mesh.centroids()[face]),
            },
            cube_size: self.cube_size,
            candidates,
        })
    }

    pub fn face(&self, face: usize) -> Result<VolumetricGrid> {
        Ok(self.face_with_frame(face)?.0)
    }

    pub fn face_with_frame(&self, face: usize) -> Result<(VolumetricGrid, FaceFrame)> {
        let frame = self.frame(face)?;
        let grid = rasterize(&frame, self.params.half_extent);
        Ok((grid, frame))
    }

    /// Number of cubes the face itself overlaps.
    pub fn face_cube_count(&self, face: usize) -> Result<usize> {
        let frame = self.frame(face)?;
        let own = frame
            .candidates
            .iter()
            .find(|c| c.face == face)
            .expect("centre face is a candidate");
        let mut count = 0;
        for_each_overlap(&own.corners, self.params.half_extent as i64, |_| count += 1);
        Ok(count)
    }
}

/// Calls `hit` with the flat index of every in-grid cube the triangle
/// overlaps, scanning only the cubes its bounding box touches.
fn for_each_overlap(tri: &[Vec3; 3], t: i64, mut hit: impl FnMut(usize)) {
    let s = 2 * t + 1;
    let mut range = [(0i64, 0i64); 3];
    for (k, r) in range.iter_mut().enumerate() {
        let lo = tri[0][k].min(tri[1][k]).min(tri[2][k]);
        let hi = tri[0][k].max(tri[1][k]).max(tri[2][k]);
        let a = ((lo - 0.5).ceil() as i64).max(-t);
        let b = ((hi + 0.5).floor() as i64).min(t);
        if a > b {
            return;
        }
        *r = (a, b);
    }
    for x in range[0].0..=range[0].1 {
        for y in range[1].0..=range[1].1 {
            for z in range[2].0..=range[2].1 {
                let c = Vec3::new(x as f64, y as f64, z as f64);
                let v = [tri[0] - c, tri[1] - c, tri[2] - c];
                if sat::overlap_centered(&v, 0.5) {
                    hit((((x + t) * s + (y + t)) * s + (z + t)) as usize);
                }
            }
        }
    }
}

/// Builds a grid from per-cube normal sums accumulated in candidate order.
pub fn rasterize(frame: &FaceFrame, half_extent: usize) -> VolumetricGrid {
    let side = 2 * half_extent + 1;
    let mut sums = vec![[0.0f64; 3]; side * side * side];
    let mut seen = vec![false; sums.len()];
    let mut touched = Vec::new();
    for cand in &frame.candidates {
        for_each_overlap(&cand.corners, half_extent as i64, |i| {
            if !seen[i] {
                seen[i] = true;
                touched.push(i);
            }
            for k in 0..3 {
                sums[i][k] += cand.normal[k];
            }
        });
    }
    finish_grid(half_extent, frame.cube_size, &sums, &touched)
}

/// Normalizes accumulated label sums into a grid. `touched` lists each
/// overlapped cube once. Exposed so alternative enumerations of cube
/// overlaps can share the labelling rule.
pub fn finish_grid(
    half_extent: usize,
    cube_size: f64,
    sums: &[[f64; 3]],
    touched: &[usize],
) -> VolumetricGrid {
    let side = 2 * half_extent + 1;
    let mut labels = vec![0.0f32; side * side * side * 3];
    let (mut occupied, mut cancelled) = (0, 0);
    for &i in touched {
        let s = Vec3::from(sums[i]);
        let len = s.norm();
        if len < CANCEL_EPS {
            cancelled += 1;
            continue;
        }
        let u = s / len;
        labels[3 * i] = u.x as f32;
        labels[3 * i + 1] = u.y as f32;
        labels[3 * i + 2] = u.z as f32;
        occupied += 1;
    }
    VolumetricGrid {
        half_extent,
        cube_size: cube_size as f32,
        labels,
        occupied,
        cancelled,
    }
}

pub fn voxelize_face(
    mesh: &TriangleMesh,
    face: usize,
    params: &VoxelParams,
) -> Result<VolumetricGrid> {
    Voxelizer::new(mesh, params)?.face(face)
}

/// Grids for every non-degenerate face in ascending face order, produced a
/// chunk at a time in parallel.
pub struct GridStream<'a> {
    voxelizer: Voxelizer<'a>,
    faces: Vec<usize>,
    next: usize,
    buffer: std::collections::VecDeque<Result<(usize, VolumetricGrid)>>,
    chunk: usize,
}

impl Iterator for GridStream<'_> {
    type Item = Result<(usize, VolumetricGrid)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.buffer.is_empty() && self.next < self.faces.len() {
            let end = (self.next + self.chunk).min(self.faces.len());
            let batch = &self.faces[self.next..end];
            let v = &self.voxelizer;
            self.buffer
                .extend(par::map_slice(batch, |&f| v.face(f).map(|g| (f, g))));
            self.next = end;
        }
        self.buffer.pop_front()
    }
}

pub fn voxelize_mesh<'a>(mesh: &'a TriangleMesh, params: &VoxelParams) -> Result<GridStream<'a>> {
    let voxelizer = Voxelizer::new(mesh, params)?;
    let faces = (0..mesh.num_faces())
        .filter(|&f| !mesh.is_degenerate(f))
        .collect();
    Ok(GridStream {
        voxelizer,
        faces,
        next: 0,
        buffer: Default::default(),
        chunk: 32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn identity_when_aligned() {
        let r = rotation_between(&Vec3::y(), &Vec3::y());
        assert_eq!(r, Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_between(&Vec3::x(), &Vec3::y());
        let want = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - want).abs().max() < 1e-15);
        assert!((r * Vec3::x() - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn antipodal_uses_half_turn_about_x() {
        let r = rotation_between(&-Vec3::y(), &Vec3::y());
        let want = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        assert_eq!(r, want);
        // nearly antipodal still rotates onto the target
        let n = Vec3::new(1e-7, -1.0, 0.0).normalize();
        let r = rotation_between(&n, &Vec3::y());
        assert!((r * n - Vec3::y()).norm() < 1e-9);
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn grid_geometry() {
        let m = shapes::icosphere(2);
        let g = voxelize_face(&m, 5, &VoxelParams::default()).unwrap();
        assert_eq!(g.side(), 41);
        assert_eq!(g.labels().len(), 41 * 41 * 41 * 3);
        assert!(g.label(0, 0, 0).unwrap().iter().any(|&c| c != 0.0));
        assert_eq!(g.index(-20, -20, -20), Some(0));
        assert_eq!(g.index(20, 20, 20), Some(41 * 41 * 41 - 1));
        assert_eq!(g.index(21, 0, 0), None);
    }

    #[test]
    fn flat_plane_labels_are_the_target() {
        let m = shapes::grid(12, 12, 1.0);
        let v = Voxelizer::new(&m, &VoxelParams::default()).unwrap();
        let g = v.face(144).unwrap();
        assert!(g.occupied() > 0);
        for l in g.labels().chunks_exact(3) {
            if l != [0.0; 3] {
                assert!((l[0].abs() + (l[1] - 1.0).abs() + l[2].abs()) < 1e-6);
            }
        }
    }

    #[test]
    fn stream_skips_degenerate_faces_in_order() {
        let mut verts = shapes::icosahedron().vertices().to_vec();
        let mut faces = shapes::icosahedron().faces().to_vec();
        verts.push(verts[0] * 2.0);
        faces.push([0, 1, 12]);
        let last = verts.len();
        verts.push(verts[0] * 3.0);
        faces.push([0, 12, last]);
        let m = TriangleMesh::new(verts, faces).unwrap();
        assert_eq!(m.degenerate_faces(), vec![21]);
        let ids: Vec<usize> = voxelize_mesh(&m, &VoxelParams::default())
            .unwrap()
            .map(|r| r.unwrap().0)
            .collect();
        assert_eq!(ids, (0..21).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_params() {
        let bad = VoxelParams {
            target: [0.0, 2.0, 0.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(VoxelParams {
            half_extent: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
