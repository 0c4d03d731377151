use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::metrics::angle_deg;

/// Face classes by the widest normal angle in the surrounding 2-ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaceCategory {
    /// Above 80 degrees.
    LargeEdge,
    /// (50, 80].
    SmallEdge,
    /// (20, 50].
    Curved,
    /// At most 20.
    Smooth,
}

impl FaceCategory {
    pub const ALL: [FaceCategory; 4] = [
        FaceCategory::LargeEdge,
        FaceCategory::SmallEdge,
        FaceCategory::Curved,
        FaceCategory::Smooth,
    ];

    pub fn from_angle(degrees: f64) -> Self {
        if degrees > 80.0 {
            FaceCategory::LargeEdge
        } else if degrees > 50.0 {
            FaceCategory::SmallEdge
        } else if degrees > 20.0 {
            FaceCategory::Curved
        } else {
            FaceCategory::Smooth
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FaceCategory::LargeEdge => "v1",
            FaceCategory::SmallEdge => "v2",
            FaceCategory::Curved => "v3",
            FaceCategory::Smooth => "v4",
        }
    }
}

/// Largest angle in degrees between any two face normals of the 2-ring
/// patch around `face`.
pub fn max_patch_angle(mesh: &TriangleMesh, face: usize) -> Result<f64> {
    mesh.check_face(face)?;
    if mesh.is_degenerate(face) {
        return Err(Error::DegenerateFace(face));
    }
    let members = mesh.ring_members(face, 2);
    let n = mesh.normals();
    let mut widest = 0.0f64;
    for (k, &a) in members.iter().enumerate() {
        for &b in &members[k + 1..] {
            widest = widest.max(angle_deg(&n[a], &n[b]));
        }
    }
    Ok(widest)
}

pub fn categorize_face(mesh: &TriangleMesh, face: usize) -> Result<(FaceCategory, f64)> {
    let a = max_patch_angle(mesh, face)?;
    Ok((FaceCategory::from_angle(a), a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn thresholds_belong_to_the_lower_class() {
        use FaceCategory::*;
        assert_eq!(FaceCategory::from_angle(0.0), Smooth);
        assert_eq!(FaceCategory::from_angle(20.0), Smooth);
        assert_eq!(FaceCategory::from_angle(20.0 + 1e-9), Curved);
        assert_eq!(FaceCategory::from_angle(50.0), Curved);
        assert_eq!(FaceCategory::from_angle(50.0 + 1e-9), SmallEdge);
        assert_eq!(FaceCategory::from_angle(80.0), SmallEdge);
        assert_eq!(FaceCategory::from_angle(80.0 + 1e-9), LargeEdge);
        assert_eq!(FaceCategory::from_angle(180.0), LargeEdge);
    }

    #[test]
    fn flat_and_cube_faces() {
        let flat = shapes::grid(6, 6, 1.0);
        assert_eq!(
            categorize_face(&flat, 30).unwrap(),
            (FaceCategory::Smooth, 0.0)
        );
        let cube = shapes::cube(4);
        let (c, a) = categorize_face(&cube, 0).unwrap();
        assert_eq!(c, FaceCategory::LargeEdge);
        assert!((a - 90.0).abs() < 1e-9);
    }
}
