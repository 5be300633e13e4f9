//! Narrow phase: polygon-polygon manifolds by separating axes and reference
//! face clipping.

use crate::math::Vec2;

use super::polygon::{max_separation, Polygon};

/// Relative bias toward keeping the first polygon as reference face.
const REFERENCE_FACE_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ContactPoint {
    /// Midpoint between the incident vertex and the reference face.
    pub point: Vec2,
    /// Signed distance along the normal; negative when overlapping.
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Manifold {
    /// Unit normal pointing from the first polygon toward the second.
    pub normal: Vec2,
    pub points: Vec<ContactPoint>,
}

/// Manifold for polygons closer than `margin` (0 for overlap-only queries).
pub(crate) fn collide_polygons(a: &Polygon, b: &Polygon, margin: f64) -> Option<Manifold> {
    let (edge_a, sep_a) = max_separation(a, b);
    if sep_a > margin {
        return None;
    }
    let (edge_b, sep_b) = max_separation(b, a);
    if sep_b > margin {
        return None;
    }
    let flip = sep_b > sep_a + REFERENCE_FACE_TOLERANCE;
    let (reference, incident, edge) = if flip { (b, a, edge_b) } else { (a, b, edge_a) };

    let n = reference.normals()[edge];
    let inc = (0..incident.len())
        .min_by(|&i, &j| {
            n.dot(incident.normals()[i])
                .total_cmp(&n.dot(incident.normals()[j]))
        })
        .unwrap_or(0);
    let iv = incident.vertices();
    let mut segment = [iv[inc], iv[(inc + 1) % iv.len()]];

    let rv = reference.vertices();
    let r1 = rv[edge];
    let r2 = rv[(edge + 1) % rv.len()];
    let tangent = (r2 - r1).normalized();

    let mut count = clip_segment(&mut segment, -tangent, -tangent.dot(r1));
    if count < 2 {
        return None;
    }
    count = clip_segment(&mut segment, tangent, tangent.dot(r2));
    if count < 2 {
        return None;
    }

    let points: Vec<ContactPoint> = segment
        .iter()
        .filter_map(|&p| {
            let separation = n.dot(p - r1);
            (separation <= margin).then(|| ContactPoint {
                point: p - n * (0.5 * separation),
                separation,
            })
        })
        .collect();
    if points.is_empty() {
        return None;
    }
    Some(Manifold {
        normal: if flip { -n } else { n },
        points,
    })
}

/// Keeps the part of `segment` with `normal . p <= offset`. Returns the number
/// of points kept (0..=2).
fn clip_segment(segment: &mut [Vec2; 2], normal: Vec2, offset: f64) -> usize {
    let d0 = normal.dot(segment[0]) - offset;
    let d1 = normal.dot(segment[1]) - offset;
    let mut out = [segment[0], segment[1]];
    let mut count = 0;
    if d0 <= 0.0 {
        out[count] = segment[0];
        count += 1;
    }
    if d1 <= 0.0 {
        out[count] = segment[1];
        count += 1;
    }
    if d0 * d1 < 0.0 && count < 2 {
        let t = d0 / (d0 - d1);
        out[count] = segment[0] + (segment[1] - segment[0]) * t;
        count += 1;
    }
    *segment = out;
    count
}
