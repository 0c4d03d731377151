//! Synthetic vertex noise.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Impulsive,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDirection {
    /// Along the area-weighted vertex normal.
    #[default]
    VertexNormal,
    /// Along an independent uniformly random unit direction per vertex.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Standard deviation as a multiple of the mean edge length.
    pub level: f64,
    /// Fraction of vertices displaced by impulsive noise.
    pub impulse_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub direction: NoiseDirection,
}

impl NoiseSpec {
    pub fn gaussian(level: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            level,
            impulse_fraction: 1.0,
            seed,
            direction: NoiseDirection::VertexNormal,
        }
    }

    pub fn impulsive(level: f64, fraction: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Impulsive,
            impulse_fraction: fraction,
            ..Self::gaussian(level, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "noise level must be finite and >= 0, got {}",
                self.level
            )));
        }
        if !(0.0..=1.0).contains(&self.impulse_fraction) {
            return Err(Error::InvalidParams(format!(
                "impulse fraction must lie in [0, 1], got {}",
                self.impulse_fraction
            )));
        }
        Ok(())
    }
}

/// Area-weighted average of incident face normals, or zero for a vertex with
/// no non-degenerate incident face.
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vec3> {
    (0..mesh.num_vertices())
        .map(|v| {
            let sum: Vec3 = mesh
                .vertex_faces(v)
                .iter()
                .map(|&f| mesh.normals()[f] * mesh.areas()[f])
                .sum();
            let len = sum.norm();
            if len > 0.0 {
                sum / len
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

/// Displaces vertices by zero-mean gaussian offsets with standard deviation
/// `level · e_avg`. Draws come from ChaCha8 seeded with `spec.seed`, one
/// vertex at a time in index order.
pub fn add_noise(mesh: &TriangleMesh, spec: &NoiseSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    let sigma = match mesh.scales() {
        Ok(s) => spec.level * s.e_avg,
        Err(_) => 0.0,
    };
    if sigma == 0.0 {
        return Ok(mesh.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let nv = mesh.num_vertices();
    let chosen: Vec<usize> = match spec.kind {
        NoiseKind::Gaussian => (0..nv).collect(),
        NoiseKind::Impulsive => {
            let k = (spec.impulse_fraction * nv as f64).round() as usize;
            let mut picked = index::sample(&mut rng, nv, k.min(nv)).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    let normals = vertex_normals(mesh);
    let mut vertices = mesh.vertices().to_vec();
    for v in chosen {
        let dir = match spec.direction {
            NoiseDirection::VertexNormal => normals[v],
            NoiseDirection::Random => random_unit(&mut rng),
        };
        let d: f64 = gauss.sample(&mut rng);
        vertices[v] += dir * d;
    }
    mesh.with_vertices(vertices)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let len = v.norm();
        if len > 1e-12 {
            return v / len;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn zero_level_is_identity() {
        let m = shapes::icosphere(2);
        assert_eq!(add_noise(&m, &NoiseSpec::gaussian(0.0, 3)).unwrap(), m);
    }

    #[test]
    fn seeded_runs_match() {
        let m = shapes::icosphere(2);
        let spec = NoiseSpec::gaussian(0.3, 9);
        let a = add_noise(&m, &spec).unwrap();
        assert_eq!(a, add_noise(&m, &spec).unwrap());
        assert_ne!(a, add_noise(&m, &NoiseSpec::gaussian(0.3, 10)).unwrap());
        assert!(a.same_topology(&m));
    }

    #[test]
    fn gaussian_spread_matches_level() {
        let m = shapes::icosphere(5);
        assert!(m.num_vertices() >= 10_000);
        let e_avg = m.scales().unwrap().e_avg;
        let noisy = add_noise(&m, &NoiseSpec::gaussian(0.3, 1)).unwrap();
        let normals = vertex_normals(&m);
        let d: Vec<f64> = (0..m.num_vertices())
            .map(|v| (noisy.vertices()[v] - m.vertices()[v]).dot(&normals[v]))
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let rel = (var.sqrt() - 0.3 * e_avg).abs() / (0.3 * e_avg);
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn impulsive_moves_only_a_subset() {
        let m = shapes::icosphere(3);
        let noisy = add_noise(&m, &NoiseSpec::impulsive(0.5, 0.1, 2)).unwrap();
        let moved = (0..m.num_vertices())
            .filter(|&v| noisy.vertices()[v] != m.vertices()[v])
            .count();
        assert_eq!(moved, (0.1 * m.num_vertices() as f64).round() as usize);
    }

    #[test]
    fn random_direction_is_not_along_normal() {
        let m = shapes::icosphere(2);
        let mut spec = NoiseSpec::gaussian(0.3, 4);
        spec.direction = NoiseDirection::Random;
        let noisy = add_noise(&m, &spec).unwrap();
        let normals = vertex_normals(&m);
        let off_axis = (0..m.num_vertices()).any(|v| {
            let d = noisy.vertices()[v] - m.vertices()[v];
            d.cross(&normals[v]).norm() > 1e-6 * d.norm().max(1e-30)
        });
        assert!(off_axis);
    }

    #[test]
    fn invalid_specs() {
        assert!(NoiseSpec::gaussian(-1.0, 0).validate().is_err());
        assert!(NoiseSpec::impulsive(0.1, 1.5, 0).validate().is_err());
    }
}
