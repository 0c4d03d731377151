use crate::mesh::Vec3;

/// Separating-axis test between a closed triangle and the closed
/// axis-aligned cube with centre `center` and half side `half`. Touching
/// counts as overlap. Degenerate triangles need no special case: their zero
/// normal axis never separates and the remaining axes cover segments and
/// points.
pub fn triangle_box_overlap(tri: &[Vec3; 3], center: &Vec3, half: f64) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    overlap_centered(&v, half)
}

pub(crate) fn overlap_centered(v: &[Vec3; 3], h: f64) -> bool {
    // box face normals
    for k in 0..3 {
        let (lo, hi) = min_max(v[0][k], v[1][k], v[2][k]);
        if lo > h || hi < -h {
            return false;
        }
    }

    // edge × box axis
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    for edge in &e {
        for k in 0..3 {
            // edge × unit axis k, written out
            let a = match k {
                0 => Vec3::new(0.0, edge.z, -edge.y),
                1 => Vec3::new(-edge.z, 0.0, edge.x),
                _ => Vec3::new(edge.y, -edge.x, 0.0),
            };
            let (lo, hi) = min_max(a.dot(&v[0]), a.dot(&v[1]), a.dot(&v[2]));
            let r = h * (a.x.abs() + a.y.abs() + a.z.abs());
            if lo > r || hi < -r {
                return false;
            }
        }
    }

    // triangle plane
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v[0]);
    let r = h * (n.x.abs() + n.y.abs() + n.z.abs());
    d.abs() <= r
}

fn min_max(a: f64, b: f64, c: f64) -> (f64, f64) {
    (a.min(b).min(c), a.max(b).max(c))
}
