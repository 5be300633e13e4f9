//! Deterministic fixed-timestep 2D rigid-body dynamics for convex polygons.
//!
//! Each step integrates velocities (gravity and media first), builds contact
//! manifolds with the separating-axis test, resolves them with sequential
//! impulses (Coulomb friction, restitution, two-point block solve), removes
//! residual penetration beyond the slop, and finally integrates positions.
//! Pairs that are close but not yet touching get speculative contacts, so
//! resting bodies sit on their supports instead of sinking into them.

mod body;
mod collide;
mod frames;
mod polygon;
mod world;

use thiserror::Error;

pub use body::{compound_from_chain, BodyTag, Material, RigidBody};
pub use frames::{read_frames, write_frames, BodyFrame, Frame, DEFAULT_FRAME_INTERVAL};
pub use polygon::{area_centroid, clip_polygon, max_separation, MassProperties, Polygon};
pub use world::{
    ContactManifold, Medium, SolverConfig, World, DEFAULT_DT, DEFAULT_GRAVITY,
    DEFAULT_SOLVER_ITERATIONS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("body needs at least one fixture")]
    NoFixtures,
    #[error("density must be positive, got {0}")]
    InvalidDensity(f64),
}
