//! Guided normal filtering: bilateral face-normal filtering with per-face
//! guidance normals, followed by vertex updates that fit the mesh to the
//! filtered normals.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Patch, TriangleMesh, Vec3};
use crate::metrics;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceAverage {
    #[default]
    Unweighted,
    AreaWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnfParams {
    pub mu_g: f64,
    /// `mu_d = mu_d_factor · d_c` of the mesh being filtered.
    pub mu_d_factor: f64,
    pub nf: usize,
    pub nv: usize,
    pub neighborhood_ring: usize,
    pub epsilon: f64,
    pub guidance_average: GuidanceAverage,
}

impl Default for GnfParams {
    fn default() -> Self {
        GnfParams {
            mu_g: 0.3,
            mu_d_factor: 2.0,
            nf: 10,
            nv: 20,
            neighborhood_ring: 2,
            epsilon: 1e-9,
            guidance_average: GuidanceAverage::Unweighted,
        }
    }
}

impl GnfParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("mu_g", self.mu_g)?;
        positive("mu_d_factor", self.mu_d_factor)?;
        positive("epsilon", self.epsilon)
    }
}

/// One normal per face; degenerate faces hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField(pub Vec<Vec3>);

impl NormalField {
    pub fn of(mesh: &TriangleMesh) -> Self {
        NormalField(mesh.normals().to_vec())
    }
}

impl Deref for NormalField {
    type Target = [Vec3];
    fn deref(&self) -> &[Vec3] {
        &self.0
    }
}

impl DerefMut for NormalField {
    fn deref_mut(&mut self) -> &mut [Vec3] {
        &mut self.0
    }
}

/// Filter output plus the number of faces whose weighted sum vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub normals: NormalField,
    pub warnings: usize,
}

pub fn kernel_g(n_i: &Vec3, n_j: &Vec3, mu_g: f64) -> f64 {
    (-(n_i - n_j).norm_squared() / (2.0 * mu_g * mu_g)).exp()
}

pub fn kernel_d(c_i: &Vec3, c_j: &Vec3, mu_d: f64) -> f64 {
    (-(c_i - c_j).norm_squared() / (2.0 * mu_d * mu_d)).exp()
}

pub fn edge_saliency(n_1: &Vec3, n_2: &Vec3) -> f64 {
    (n_1 - n_2).norm()
}

/// Saliency of mesh edge `edge`; zero unless exactly two non-degenerate
/// faces meet there.
pub fn mesh_edge_saliency(mesh: &TriangleMesh, edge: usize) -> f64 {
    match interior_pair(mesh, edge) {
        Some((a, b)) => edge_saliency(&mesh.normals()[a], &mesh.normals()[b]),
        None => 0.0,
    }
}

fn interior_pair(mesh: &TriangleMesh, edge: usize) -> Option<(usize, usize)> {
    let mut faces = mesh.edges()[edge]
        .faces
        .iter()
        .copied()
        .filter(|&f| !mesh.is_degenerate(f));
    match (faces.next(), faces.next(), faces.next()) {
        (Some(a), Some(b), None) => Some((a, b)),
        _ => None,
    }
}

/// `D(P) · R(P)`: the largest normal difference in the patch times the
/// share of the most salient interior edge in the total interior saliency.
pub fn patch_consistency(mesh: &TriangleMesh, patch: &Patch, epsilon: f64) -> f64 {
    consistency(mesh, &patch.members, epsilon)
}

fn consistency(mesh: &TriangleMesh, members: &[usize], epsilon: f64) -> f64 {
    let normals = mesh.normals();
    let live: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&f| !mesh.is_degenerate(f))
        .collect();
    let mut d = 0.0f64;
    for (k, &a) in live.iter().enumerate() {
        for &b in &live[k + 1..] {
            d = d.max((normals[a] - normals[b]).norm());
        }
    }
    if d == 0.0 {
        return 0.0;
    }
    let (mut max_sal, mut sum_sal) = (0.0f64, 0.0f64);
    for &f in &live {
        for e in mesh.face_edges(f) {
            if let Some((a, b)) = interior_pair(mesh, e) {
                // each interior edge once, from its lower face
                let other = if a == f { b } else { a };
                if f < other && members.binary_search(&other).is_ok() {
                    let s = edge_saliency(&normals[a], &normals[b]);
                    max_sal = max_sal.max(s);
                    sum_sal += s;
                }
            }
        }
    }
    d * max_sal / (epsilon + sum_sal)
}

fn patch_average(mesh: &TriangleMesh, members: &[usize], how: GuidanceAverage) -> Vec3 {
    members
        .iter()
        .filter(|&&f| !mesh.is_degenerate(f))
        .map(|&f| match how {
            GuidanceAverage::Unweighted => mesh.normals()[f],
            GuidanceAverage::AreaWeighted => mesh.normals()[f] * mesh.areas()[f],
        })
        .sum()
}

/// Per-face 1-ring consistency and average normal, shared by every guidance
/// lookup in one pass.
struct CandidateTable {
    consistency: Vec<f64>,
    average: Vec<Vec3>,
}

impl CandidateTable {
    fn new(mesh: &TriangleMesh, epsilon: f64, how: GuidanceAverage) -> Self {
        let rows = par::map_range(0..mesh.num_faces(), |f| {
            if mesh.is_degenerate(f) {
                return (f64::INFINITY, Vec3::zeros());
            }
            let members = mesh.ring_members(f, 1);
            (
                consistency(mesh, &members, epsilon),
                patch_average(mesh, &members, how),
            )
        });
        let (consistency, average) = rows.into_iter().unzip();
        CandidateTable {
            consistency,
            average,
        }
    }

    /// Returns the guidance normal and whether it fell back to `n_i`.
    fn guidance(&self, mesh: &TriangleMesh, face: usize) -> (Vec3, bool) {
        if mesh.is_degenerate(face) {
            return (Vec3::zeros(), false);
        }
        // The 1-ring relation is symmetric, so the patches containing `face`
        // are exactly those centred on its 1-ring.
        let mut best = face;
        for &g in mesh.vertex_adjacent(face) {
            let (cg, cb) = (self.consistency[g], self.consistency[best]);
            if cg < cb || (cg == cb && g < best) {
                best = g;
            }
        }
        let avg = self.average[best];
        let len = avg.norm();
        if len > 0.0 {
            (avg / len, false)
        } else {
            (mesh.normals()[face], true)
        }
    }
}

/// Guidance normal of one face: the average normal of the most consistent
/// 1-ring patch containing it.
pub fn guidance_normal(mesh: &TriangleMesh, face: usize, epsilon: f64) -> Result<Vec3> {
    mesh.check_face(face)?;
    if mesh.is_degenerate(face) {
        return Err(Error::DegenerateFace(face));
    }
    let mut best = (f64::INFINITY, face);
    let mut centers = vec![face];
    centers.extend_from_slice(mesh.vertex_adjacent(face));
    centers.sort_unstable();
    for g in centers {
        let c = consistency(mesh, &mesh.ring_members(g, 1), epsilon);
        if c < best.0 {
            best = (c, g);
        }
    }
    let avg = patch_average(
        mesh,
        &mesh.ring_members(best.1, 1),
        GuidanceAverage::Unweighted,
    );
    let len = avg.norm();
    Ok(if len > 0.0 {
        avg / len
    } else {
        mesh.normals()[face]
    })
}

pub fn guidance_field(mesh: &TriangleMesh, epsilon: f64, how: GuidanceAverage) -> Filtered {
    let table = CandidateTable::new(mesh, epsilon, how);
    let rows = par::map_range(0..mesh.num_faces(), |f| table.guidance(mesh, f));
    Filtered {
        warnings: rows.iter().filter(|r| r.1).count(),
        normals: NormalField(rows.into_iter().map(|r| r.0).collect()),
    }
}

/// Weighted sum of neighbour normals for one face, before normalization.
pub(crate) fn filter_sum(
    mesh: &TriangleMesh,
    face: usize,
    members: &[usize],
    guidance: &[Vec3],
    mu_g: f64,
    mu_d: f64,
) -> Vec3 {
    let c_i = &mesh.centroids()[face];
    let g_i = &guidance[face];
    let mut sum = Vec3::zeros();
    for &j in members {
        if mesh.is_degenerate(j) {
            continue;
        }
        let w = mesh.areas()[j]
            * kernel_d(c_i, &mesh.centroids()[j], mu_d)
            * kernel_g(g_i, &guidance[j], mu_g);
        sum += mesh.normals()[j] * w;
    }
    sum
}

fn mu_d(mesh: &TriangleMesh, params: &GnfParams) -> Result<f64> {
    Ok(params.mu_d_factor * mesh.scales()?.d_c)
}

pub fn guided_filter_normals(
    mesh: &TriangleMesh,
    guidance: &NormalField,
    params: &GnfParams,
) -> Result<Filtered> {
    params.validate()?;
    if guidance.len() != mesh.num_faces() {
        return Err(Error::TopologyMismatch(format!(
            "{} guidance normals for {} faces",
            guidance.len(),
            mesh.num_faces()
        )));
    }
    let mu_d = mu_d(mesh, params)?;
    let rows = par::map_range(0..mesh.num_faces(), |f| {
        if mesh.is_degenerate(f) {
            return (Vec3::zeros(), false);
        }
        let members = mesh.ring_members(f, params.neighborhood_ring);
        let sum = filter_sum(mesh, f, &members, guidance, params.mu_g, mu_d);
        let len = sum.norm();
        if len > 0.0 && len.is_finite() {
            (sum / len, false)
        } else {
            (mesh.normals()[f], true)
        }
    });
    Ok(Filtered {
        warnings: rows.iter().filter(|r| r.1).count(),
        normals: NormalField(rows.into_iter().map(|r| r.0).collect()),
    })
}

/// Guided filtering with ground-truth normals as the guidance.
pub fn gt_guided_filter_normals(
    mesh: &TriangleMesh,
    truth_normals: &NormalField,
    params: &GnfParams,
) -> Result<Filtered> {
    guided_filter_normals(mesh, truth_normals, params)
}

/// Moves every vertex `nv` times towards the planes through the current
/// incident face centroids with the target normals. Each sweep reads only
/// the previous sweep's positions.
pub fn update_vertices(
    mesh: &TriangleMesh,
    targets: &NormalField,
    nv: usize,
) -> Result<TriangleMesh> {
    if targets.len() != mesh.num_faces() {
        return Err(Error::TopologyMismatch(format!(
            "{} target normals for {} faces",
            targets.len(),
            mesh.num_faces()
        )));
    }
    if nv == 0 {
        return Ok(mesh.clone());
    }
    let faces = mesh.faces();
    let mut pos = mesh.vertices().to_vec();
    for _ in 0..nv {
        let centroids: Vec<Vec3> = faces
            .iter()
            .map(|f| (pos[f[0]] + pos[f[1]] + pos[f[2]]) / 3.0)
            .collect();
        pos = par::map_range(0..pos.len(), |v| {
            let incident = mesh.vertex_faces(v);
            if incident.is_empty() {
                return pos[v];
            }
            let x = pos[v];
            let mut step = Vec3::zeros();
            for &f in incident {
                let n = &targets[f];
                step += n * n.dot(&(centroids[f] - x));
            }
            x + step / incident.len() as f64
        });
    }
    mesh.with_vertices(pos)
}

#[derive(Debug, Clone)]
pub struct GnfOutcome {
    pub mesh: TriangleMesh,
    /// Mean angular error against the truth after each iteration.
    pub trace: Vec<f64>,
    pub warnings: usize,
}

pub fn gnf_denoise(
    mesh: &TriangleMesh,
    params: &GnfParams,
    truth: Option<&TriangleMesh>,
) -> Result<GnfOutcome> {
    params.validate()?;
    if let Some(t) = truth {
        if !t.same_topology(mesh) {
            return Err(Error::TopologyMismatch("truth mesh differs".into()));
        }
    }
    let mut current = mesh.clone();
    let mut trace = Vec::new();
    let mut warnings = 0;
    for it in 0..params.nf {
        let guidance = guidance_field(&current, params.epsilon, params.guidance_average);
        let filtered = guided_filter_normals(&current, &guidance.normals, params)?;
        warnings += guidance.warnings + filtered.warnings;
        current = update_vertices(&current, &filtered.normals, params.nv)?;
        if let Some(t) = truth {
            let e_a = metrics::mean_angular_error(&current, t)?;
            log::debug!("gnf iteration {}: E_a = {e_a:.4}", it + 1);
            trace.push(e_a);
        }
    }
    Ok(GnfOutcome {
        mesh: current,
        trace,
        warnings,
    })
}
