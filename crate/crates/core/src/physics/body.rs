use serde::{Deserialize, Serialize};

use crate::math::{Aabb, Rot, Vec2};
use crate::shape::BrickChain;

use super::polygon::Polygon;
use super::PhysicsError;

/// Role of a body inside a challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyTag {
    Design,
    Ball,
    Projectile,
    Ground,
    Medium,
    /// Non-colliding region; ignored by contact detection and region queries.
    Sensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub friction: f64,
    pub restitution: f64,
}

impl Material {
    pub fn new(friction: f64, restitution: f64) -> Self {
        Self {
            friction: friction.clamp(0.0, 1.0),
            restitution: restitution.clamp(0.0, 1.0),
        }
    }
}

/// A rigid body. `position` is the center of mass; fixtures are stored
/// relative to it. Zero mass means static.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBody {
    pub position: Vec2,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    mass: f64,
    inv_mass: f64,
    inertia: f64,
    inv_inertia: f64,
    area: f64,
    fixtures: Vec<Polygon>,
    radius: f64,
    pub material: Material,
    pub tag: BodyTag,
}

impl RigidBody {
    /// Dynamic body from fixtures given in world coordinates at zero rotation.
    pub fn dynamic(
        fixtures: Vec<Polygon>,
        density: f64,
        material: Material,
        tag: BodyTag,
    ) -> Result<Self, PhysicsError> {
        if fixtures.is_empty() {
            return Err(PhysicsError::NoFixtures);
        }
        if !(density > 0.0 && density.is_finite()) {
            return Err(PhysicsError::InvalidDensity(density));
        }
        let props: Vec<_> = fixtures.iter().map(|f| f.mass_properties(density)).collect();
        let mass: f64 = props.iter().map(|p| p.mass).sum();
        let area: f64 = props.iter().map(|p| p.area).sum();
        let com = props
            .iter()
            .fold(Vec2::ZERO, |acc, p| acc + p.centroid * p.mass)
            * (1.0 / mass);
        // Parallel-axis sum; overlapping fixtures are counted twice.
        let inertia: f64 = props
            .iter()
            .map(|p| p.inertia + p.mass * (p.centroid - com).length_squared())
            .sum();
        Ok(Self::assemble(fixtures, com, mass, inertia, area, material, tag))
    }

    /// Static body from world-space fixtures.
    pub fn fixed(fixtures: Vec<Polygon>, material: Material, tag: BodyTag) -> Result<Self, PhysicsError> {
        if fixtures.is_empty() {
            return Err(PhysicsError::NoFixtures);
        }
        let props: Vec<_> = fixtures.iter().map(|f| f.mass_properties(1.0)).collect();
        let area: f64 = props.iter().map(|p| p.area).sum();
        let origin = props
            .iter()
            .fold(Vec2::ZERO, |acc, p| acc + p.centroid * p.area)
            * (1.0 / area);
        Ok(Self::assemble(fixtures, origin, 0.0, 0.0, area, material, tag))
    }

    fn assemble(
        fixtures: Vec<Polygon>,
        origin: Vec2,
        mass: f64,
        inertia: f64,
        area: f64,
        material: Material,
        tag: BodyTag,
    ) -> Self {
        let local: Vec<Polygon> = fixtures.iter().map(|f| f.translated(-origin)).collect();
        let radius = local
            .iter()
            .flat_map(|f| f.vertices().iter())
            .map(|v| v.length())
            .fold(0.0, f64::max);
        Self {
            position: origin,
            angle: 0.0,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            mass,
            inv_mass: if mass > 0.0 { 1.0 / mass } else { 0.0 },
            inertia,
            inv_inertia: if inertia > 0.0 { 1.0 / inertia } else { 0.0 },
            area,
            fixtures: local,
            radius,
            material,
            tag,
        }
    }

    pub fn is_static(&self) -> bool {
        self.inv_mass == 0.0
    }

    pub fn collides(&self) -> bool {
        self.tag != BodyTag::Sensor
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inverse_mass(&self) -> f64 {
        self.inv_mass
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn inverse_inertia(&self) -> f64 {
        self.inv_inertia
    }

    /// Total fixture area (overlaps counted twice).
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Fixtures in body-local coordinates (origin at the center of mass).
    pub fn local_fixtures(&self) -> &[Polygon] {
        &self.fixtures
    }

    /// Largest distance from the center of mass to any fixture vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.radius
    }

    pub fn world_fixtures(&self) -> Vec<Polygon> {
        let rot = Rot::new(self.angle);
        self.fixtures
            .iter()
            .map(|f| f.transformed(self.position, rot))
            .collect()
    }

    pub fn aabb(&self) -> Aabb {
        let r = Vec2::new(self.radius, self.radius);
        Aabb {
            min: self.position - r,
            max: self.position + r,
        }
    }

    /// Velocity of a world point attached to this body.
    pub fn point_velocity(&self, p: Vec2) -> Vec2 {
        self.linear_velocity + Vec2::cross_scalar(self.angular_velocity, p - self.position)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.linear_velocity.length_squared()
            + 0.5 * self.inertia * self.angular_velocity * self.angular_velocity
    }

    pub fn translate(&mut self, offset: Vec2) {
        self.position += offset;
    }
}

/// One rigid body whose fixtures are the chain's bricks, placed where the
/// chain's anchor puts them.
pub fn compound_from_chain(
    chain: &BrickChain,
    density: f64,
    material: Material,
) -> Result<RigidBody, PhysicsError> {
    let fixtures = chain
        .rects()
        .into_iter()
        .map(|r| Polygon::new(r.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    RigidBody::dynamic(fixtures, density, material, BodyTag::Design)
}
