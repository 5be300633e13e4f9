//! Convex polygons: validation, mass properties, separating-axis queries and
//! clipping.

use crate::math::{Aabb, Rot, Vec2};

use super::PhysicsError;

/// Convex polygon with counterclockwise winding and outward edge normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    normals: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub area: f64,
    pub mass: f64,
    pub centroid: Vec2,
    /// Rotational inertia about the centroid.
    pub inertia: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, PhysicsError> {
        let n = vertices.len();
        if n < 3 {
            return Err(PhysicsError::InvalidPolygon(format!("{n} vertices")));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(PhysicsError::InvalidPolygon("non-finite vertex".into()));
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(PhysicsError::InvalidPolygon(
                    "not strictly convex and counterclockwise".into(),
                ));
            }
        }
        let normals = (0..n)
            .map(|i| {
                let e = vertices[(i + 1) % n] - vertices[i];
                Vec2::new(e.y, -e.x).normalized()
            })
            .collect();
        Ok(Self { vertices, normals })
    }

    /// Axis-aligned box with the given half extents, centered at `center`.
    pub fn rect(center: Vec2, half_width: f64, half_height: f64) -> Result<Self, PhysicsError> {
        let (hw, hh) = (half_width, half_height);
        Self::new(vec![
            center + Vec2::new(-hw, -hh),
            center + Vec2::new(hw, -hh),
            center + Vec2::new(hw, hh),
            center + Vec2::new(-hw, hh),
        ])
    }

    /// Regular polygon inscribed in a circle of `radius`.
    pub fn regular(center: Vec2, sides: usize, radius: f64) -> Result<Self, PhysicsError> {
        let verts = (0..sides)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / sides as f64;
                center + Vec2::from_angle(a) * radius
            })
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Rotates about the origin then translates.
    pub fn transformed(&self, translation: Vec2, rot: Rot) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| v.rotate(rot) + translation)
                .collect(),
            normals: self.normals.iter().map(|n| n.rotate(rot)).collect(),
        }
    }

    pub fn translated(&self, offset: Vec2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            normals: self.normals.clone(),
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn mass_properties(&self, density: f64) -> MassProperties {
        let origin = self.vertices[0];
        let mut area = 0.0;
        let mut center = Vec2::ZERO;
        let mut inertia_origin = 0.0;
        for i in 1..self.vertices.len() - 1 {
            let e1 = self.vertices[i] - origin;
            let e2 = self.vertices[i + 1] - origin;
            let d = e1.cross(e2);
            let tri = 0.5 * d;
            area += tri;
            center += (e1 + e2) * (tri / 3.0);
            let intx2 = e1.x * e1.x + e2.x * e1.x + e2.x * e2.x;
            let inty2 = e1.y * e1.y + e2.y * e1.y + e2.y * e2.y;
            inertia_origin += (0.25 / 3.0) * d * (intx2 + inty2);
        }
        let local_center = center * (1.0 / area);
        let mass = density * area;
        let inertia = density * inertia_origin - mass * local_center.length_squared();
        MassProperties {
            area,
            mass,
            centroid: origin + local_center,
            inertia,
        }
    }

    /// Closed intersection test (touching counts).
    pub fn intersects(&self, other: &Polygon) -> bool {
        max_separation(self, other).1 <= 0.0 && max_separation(other, self).1 <= 0.0
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        self.vertices
            .iter()
            .zip(&self.normals)
            .all(|(&v, &n)| n.dot(p - v) <= 0.0)
    }
}

/// Best separating axis among `a`'s edge normals: (edge index, separation).
/// Positive separation means a gap along that axis.
pub fn max_separation(a: &Polygon, b: &Polygon) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (&n, &v)) in a.normals.iter().zip(&a.vertices).enumerate() {
        let sep = b
            .vertices
            .iter()
            .map(|&w| n.dot(w - v))
            .fold(f64::INFINITY, f64::min);
        if sep > best.1 {
            best = (i, sep);
        }
    }
    best
}

pub fn signed_area(points: &[Vec2]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..points.len() {
        sum += points[i].cross(points[(i + 1) % points.len()]);
    }
    0.5 * sum
}

/// Area and centroid of a (possibly degenerate) counterclockwise polygon.
pub fn area_centroid(points: &[Vec2]) -> (f64, Vec2) {
    if points.len() < 3 {
        return (0.0, Vec2::ZERO);
    }
    let origin = points[0];
    let mut area = 0.0;
    let mut center = Vec2::ZERO;
    for i in 1..points.len() - 1 {
        let e1 = points[i] - origin;
        let e2 = points[i + 1] - origin;
        let tri = 0.5 * e1.cross(e2);
        area += tri;
        center += (e1 + e2) * (tri / 3.0);
    }
    if area <= 0.0 {
        return (0.0, Vec2::ZERO);
    }
    (area, origin + center * (1.0 / area))
}

/// Sutherland-Hodgman clip of `subject` against the convex `clip` polygon.
pub fn clip_polygon(subject: &[Vec2], clip: &Polygon) -> Vec<Vec2> {
    let mut output = subject.to_vec();
    for (&v, &n) in clip.vertices.iter().zip(&clip.normals) {
        if output.is_empty() {
            break;
        }
        let input = std::mem::take(&mut output);
        for i in 0..input.len() {
            let cur = input[i];
            let next = input[(i + 1) % input.len()];
            let dc = n.dot(cur - v);
            let dn = n.dot(next - v);
            if dc <= 0.0 {
                output.push(cur);
            }
            if (dc <= 0.0) != (dn <= 0.0) {
                let t = dc / (dc - dn);
                output.push(cur + (next - cur) * t);
            }
        }
    }
    output
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_polygons() {
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        // clockwise
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).is_err());
        // concave
        assert!(Polygon::new(vec![
            Vec2::ZERO,
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.2),
            Vec2::new(1.0, 2.0)
        ])
        .is_err());
    }

    #[test]
    fn rectangle_mass_matches_closed_form() {
        let r = Polygon::rect(Vec2::new(3.0, -1.0), 0.5, 0.1).unwrap();
        let mp = r.mass_properties(1.0);
        assert!((mp.mass - 0.2).abs() < 1e-15);
        assert!((mp.centroid - Vec2::new(3.0, -1.0)).length() < 1e-14);
        let want = 0.2 * (1.0 + 0.04) / 12.0;
        assert!((mp.inertia - want).abs() < 1e-14, "{}", mp.inertia);
    }

    #[test]
    fn regular_polygon_area() {
        let p = Polygon::regular(Vec2::ZERO, 16, 1.0).unwrap();
        let want = 0.5 * 16.0 * (std::f64::consts::TAU / 16.0).sin();
        assert!((p.area() - want).abs() < 1e-12);
    }

    #[test]
    fn clipping_half_overlap() {
        let a = Polygon::rect(Vec2::ZERO, 1.0, 1.0).unwrap();
        let b = Polygon::rect(Vec2::new(1.0, 0.0), 1.0, 1.0).unwrap();
        let clipped = clip_polygon(a.vertices(), &b);
        let (area, c) = area_centroid(&clipped);
        assert!((area - 2.0).abs() < 1e-12);
        assert!((c - Vec2::new(0.5, 0.0)).length() < 1e-12);
        let far = Polygon::rect(Vec2::new(5.0, 0.0), 1.0, 1.0).unwrap();
        assert_eq!(area_centroid(&clip_polygon(a.vertices(), &far)).0, 0.0);
    }

    #[test]
    fn intersection_is_closed() {
        let a = Polygon::rect(Vec2::ZERO, 0.5, 0.5).unwrap();
        let touching = Polygon::rect(Vec2::new(1.0, 0.0), 0.5, 0.5).unwrap();
        let apart = Polygon::rect(Vec2::new(1.001, 0.0), 0.5, 0.5).unwrap();
        assert!(a.intersects(&touching));
        assert!(!a.intersects(&apart));
    }
}
