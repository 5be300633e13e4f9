//! The four design challenges: collect, protect, move and cut.
//!
//! Each challenge is a versioned [`ChallengeSpec`] describing a static arena,
//! where the design is placed, what gets spawned when, and the goal. An
//! episode simulates a design in that arena and maps the outcome onto a score
//! in `[0, 1]`.

mod env;
mod episode;
mod scoring;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec2;
use crate::physics::{Material, PhysicsError, Polygon};
use crate::shape::ShapeError;

pub use env::{build_env, Environment, PendingSpawn};
pub use episode::{evaluate_batch, evaluate_batch_sequential, run_episode, EpisodeResult, FrameCapture};
pub use scoring::{
    collected_balls, deepest_penetration, move_target, score_collect, score_cut, score_move,
    score_protect,
};

pub const SPEC_VERSION: &str = "v1";
/// Episode seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChallengeError {
    #[error("design must contain at least one brick")]
    EmptyChain,
    #[error("invalid challenge spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate goal: {0}")]
    DegenerateSpec(String),
    #[error("unknown challenge {0:?}")]
    UnknownChallenge(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChallengeId {
    Collect,
    Protect,
    Move,
    Cut,
}

impl ChallengeId {
    pub const ALL: [ChallengeId; 4] = [
        ChallengeId::Collect,
        ChallengeId::Protect,
        ChallengeId::Move,
        ChallengeId::Cut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChallengeId::Collect => "collect",
            ChallengeId::Protect => "protect",
            ChallengeId::Move => "move",
            ChallengeId::Cut => "cut",
        }
    }
}

impl fmt::Display for ChallengeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChallengeId {
    type Err = ChallengeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChallengeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ChallengeError::UnknownChallenge(s.to_string()))
    }
}

/// A static piece of arena geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaPiece {
    pub vertices: Vec<Vec2>,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpawnKind {
    Ball,
    Projectile,
}

/// A disc-like body (regular 16-gon) launched into the arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blueprint {
    pub kind: SpawnKind,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub density: f64,
    pub material: Material,
    /// Maximum seeded offset applied to `position` on each axis.
    pub jitter: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spawn {
    pub step: u64,
    pub blueprint: Blueprint,
}

/// Where the design's compound body starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Placement {
    /// Center of mass at `center`; the body is pinned (static).
    Pinned { center: Vec2 },
    /// Center of mass at horizontal position `x`, lowered or raised so that
    /// the lowest point sits `clearance` above the surface line through
    /// `surface_point` with unit normal `normal`. The body is dynamic.
    Dropped {
        x: f64,
        surface_point: Vec2,
        normal: Vec2,
        clearance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Goal {
    Collect {
        kill_plane_y: f64,
        /// Gap below which two bodies count as touching.
        touch_tolerance: f64,
    },
    Protect {
        zone: Vec<Vec2>,
        projectile_count: usize,
    },
    Move {
        incline_angle: f64,
        /// Target lies this far down-slope from the design's starting center of mass.
        target_distance: f64,
    },
    Cut {
        medium: Vec<Vec2>,
        drag: f64,
        /// Buoyancy density of the medium.
        density: f64,
        depth: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    pub version: String,
    pub id: ChallengeId,
    pub arena: Vec<ArenaPiece>,
    pub episode_steps: u64,
    pub spawn_schedule: Vec<Spawn>,
    pub design_placement: Placement,
    pub design_density: f64,
    pub design_material: Material,
    pub goal: Goal,
}

fn polygon(vertices: &[Vec2], what: &str) -> Result<Polygon, ChallengeError> {
    Polygon::new(vertices.to_vec()).map_err(|e| ChallengeError::InvalidSpec(format!("{what}: {e}")))
}

impl ChallengeSpec {
    pub fn validate(&self) -> Result<(), ChallengeError> {
        let invalid = |msg: &str| Err(ChallengeError::InvalidSpec(msg.to_string()));
        if self.version != SPEC_VERSION {
            return invalid("unsupported version");
        }
        if self.episode_steps == 0 {
            return invalid("episode_steps must be positive");
        }
        if self.spawn_schedule.iter().any(|s| s.step >= self.episode_steps) {
            return invalid("spawn step beyond episode");
        }
        for piece in &self.arena {
            polygon(&piece.vertices, "arena piece")?;
        }
        for s in &self.spawn_schedule {
            let b = &s.blueprint;
            if !(b.radius > 0.0 && b.density > 0.0) {
                return invalid("spawn radius and density must be positive");
            }
        }
        if self.design_density.is_nan() || self.design_density <= 0.0 {
            return invalid("design density must be positive");
        }
        if let Placement::Dropped { normal, .. } = &self.design_placement {
            if (normal.length() - 1.0).abs() > 1e-9 || normal.y <= 0.0 {
                return invalid("placement normal must be a unit vector pointing up");
            }
        }
        let count = |kind| {
            self.spawn_schedule
                .iter()
                .filter(|s| s.blueprint.kind == kind)
                .count()
        };
        match &self.goal {
            Goal::Collect { touch_tolerance, .. } => {
                if count(SpawnKind::Ball) == 0 {
                    return invalid("collect needs at least one ball");
                }
                if *touch_tolerance < 0.0 {
                    return invalid("touch tolerance must be non-negative");
                }
            }
            Goal::Protect {
                zone,
                projectile_count,
            } => {
                polygon(zone, "zone")?;
                if *projectile_count == 0 || count(SpawnKind::Projectile) != *projectile_count {
                    return invalid("projectile_count must match the projectile spawns");
                }
            }
            Goal::Move {
                incline_angle,
                target_distance,
            } => {
                if !(0.0..PI / 2.0).contains(incline_angle) {
                    return invalid("incline must be in [0, pi/2)");
                }
                if target_distance.is_nan() || *target_distance <= 0.0 {
                    return invalid("target must be distinct from start");
                }
            }
            Goal::Cut {
                medium,
                drag,
                density,
                depth,
            } => {
                polygon(medium, "medium")?;
                if depth.is_nan() || *depth <= 0.0 {
                    return invalid("medium depth must be positive");
                }
                if *drag < 0.0 || *density < 0.0 {
                    return invalid("medium drag and density must be non-negative");
                }
            }
        }
        Ok(())
    }

    /// Down-slope unit vector for the move challenge.
    pub fn downslope(&self) -> Option<Vec2> {
        match self.goal {
            Goal::Move { incline_angle, .. } => Some(Vec2::from_angle(-incline_angle)),
            _ => None,
        }
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

fn ground_material() -> Material {
    Material::new(0.6, 0.1)
}

fn design_material() -> Material {
    Material::new(0.6, 0.1)
}

pub fn default_spec(id: ChallengeId) -> ChallengeSpec {
    let version = SPEC_VERSION.to_string();
    match id {
        ChallengeId::Collect => ChallengeSpec {
            version,
            id,
            arena: vec![ArenaPiece {
                vertices: rect(-20.0, -3.0, 20.0, -2.0),
                material: ground_material(),
            }],
            episode_steps: 900,
            spawn_schedule: (0..10)
                .map(|i| Spawn {
                    step: i * 30,
                    blueprint: Blueprint {
                        kind: SpawnKind::Ball,
                        position: Vec2::new(0.0, 8.0),
                        velocity: Vec2::ZERO,
                        radius: 0.15,
                        density: 1.0,
                        material: Material::new(0.3, 0.5),
                        jitter: Vec2::new(0.5, 0.0),
                    },
                })
                .collect(),
            design_placement: Placement::Pinned {
                center: Vec2::new(0.0, 2.0),
            },
            design_density: 1.0,
            design_material: design_material(),
            goal: Goal::Collect {
                kill_plane_y: -1.0,
                touch_tolerance: 0.02,
            },
        },
        ChallengeId::Protect => ChallengeSpec {
            version,
            id,
            arena: vec![ArenaPiece {
                vertices: rect(-20.0, -1.0, 20.0, 0.0),
                material: ground_material(),
            }],
            episode_steps: 900,
            spawn_schedule: (0..10)
                .map(|i| Spawn {
                    step: i * 45,
                    blueprint: Blueprint {
                        kind: SpawnKind::Projectile,
                        position: Vec2::new(1.0, 1.75),
                        velocity: Vec2::new(8.0, 0.0),
                        radius: 0.1,
                        density: 1.0,
                        material: Material::new(0.3, 0.3),
                        jitter: Vec2::new(0.0, 0.3),
                    },
                })
                .collect(),
            design_placement: Placement::Pinned {
                center: Vec2::new(2.5, 1.5),
            },
            design_density: 1.0,
            design_material: design_material(),
            goal: Goal::Protect {
                zone: rect(4.0, 0.0, 6.0, 1.0),
                projectile_count: 10,
            },
        },
        ChallengeId::Move => {
            let incline = PI / 18.0;
            let along = Vec2::from_angle(-incline);
            let normal = along.perp();
            let (s0, s1) = (-10.0, 60.0);
            ChallengeSpec {
                version,
                id,
                arena: vec![ArenaPiece {
                    vertices: vec![
                        along * s0 - normal,
                        along * s1 - normal,
                        along * s1,
                        along * s0,
                    ],
                    material: ground_material(),
                }],
                episode_steps: 600,
                spawn_schedule: Vec::new(),
                design_placement: Placement::Dropped {
                    x: 0.0,
                    surface_point: Vec2::ZERO,
                    normal,
                    clearance: 0.5,
                },
                design_density: 1.0,
                design_material: design_material(),
                goal: Goal::Move {
                    incline_angle: incline,
                    target_distance: 6.0,
                },
            }
        }
        ChallengeId::Cut => ChallengeSpec {
            version,
            id,
            arena: vec![ArenaPiece {
                vertices: rect(-20.0, -5.0, 20.0, -4.0),
                material: ground_material(),
            }],
            episode_steps: 600,
            spawn_schedule: Vec::new(),
            design_placement: Placement::Dropped {
                x: 0.0,
                surface_point: Vec2::ZERO,
                normal: Vec2::new(0.0, 1.0),
                clearance: 2.0,
            },
            design_density: 1.0,
            design_material: design_material(),
            goal: Goal::Cut {
                medium: rect(-6.0, -2.0, 6.0, 0.0),
                drag: 3.0,
                density: 2.0,
                depth: 2.0,
            },
        },
    }
}

/// The four canonical v1 challenges.
pub fn default_specs() -> BTreeMap<ChallengeId, ChallengeSpec> {
    ChallengeId::ALL
        .into_iter()
        .map(|id| (id, default_spec(id)))
        .collect()
}
