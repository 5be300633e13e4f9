use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Vec2;
use crate::physics::{compound_from_chain, BodyTag, Material, Medium, Polygon, RigidBody, World};
use crate::shape::BrickChain;

use super::{polygon, Blueprint, ChallengeError, ChallengeSpec, Goal, Placement, SpawnKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PendingSpawn {
    pub step: u64,
    pub blueprint: Blueprint,
    /// Seeded offset added to the blueprint position.
    pub offset: Vec2,
}

/// A ready-to-run world plus the bookkeeping an episode needs.
#[derive(Debug, Clone)]
pub struct Environment {
    pub world: World,
    pub design: usize,
    /// Spawns not yet injected, in schedule order.
    pub pending: Vec<PendingSpawn>,
    pub zone: Option<Polygon>,
    pub start_com: Vec2,
}

/// Builds the arena, places the design and registers the spawn schedule
/// (without jitter; see [`Environment::jitter_spawns`]).
pub fn build_env(spec: &ChallengeSpec, design: &BrickChain) -> Result<Environment, ChallengeError> {
    spec.validate()?;
    let mut world = World::default();
    for piece in &spec.arena {
        let poly = polygon(&piece.vertices, "arena piece")?;
        world.add_body(RigidBody::fixed(vec![poly], piece.material, BodyTag::Ground)?);
    }

    let body = place_design(spec, design)?;
    let start_com = body.position;
    let design_index = world.add_body(body);

    let mut zone = None;
    match &spec.goal {
        Goal::Protect { zone: z, .. } => {
            let poly = polygon(z, "zone")?;
            world.add_body(RigidBody::fixed(
                vec![poly.clone()],
                Material::new(0.0, 0.0),
                BodyTag::Sensor,
            )?);
            zone = Some(poly);
        }
        Goal::Cut {
            medium,
            drag,
            density,
            ..
        } => world.media.push(Medium {
            region: polygon(medium, "medium")?,
            drag: *drag,
            density: *density,
            affects: BodyTag::Design,
        }),
        Goal::Collect { .. } | Goal::Move { .. } => {}
    }

    let mut pending: Vec<PendingSpawn> = spec
        .spawn_schedule
        .iter()
        .map(|s| PendingSpawn {
            step: s.step,
            blueprint: s.blueprint.clone(),
            offset: Vec2::ZERO,
        })
        .collect();
    pending.sort_by_key(|p| p.step);

    Ok(Environment {
        world,
        design: design_index,
        pending,
        zone,
        start_com,
    })
}

fn place_design(spec: &ChallengeSpec, design: &BrickChain) -> Result<RigidBody, ChallengeError> {
    let body = compound_from_chain(design, spec.design_density, spec.design_material)?;
    match &spec.design_placement {
        Placement::Pinned { center } => {
            let offset = *center - body.position;
            let fixtures = body.world_fixtures().iter().map(|f| f.translated(offset)).collect();
            Ok(RigidBody::fixed(fixtures, spec.design_material, BodyTag::Design)?)
        }
        Placement::Dropped {
            x,
            surface_point,
            normal,
            clearance,
        } => {
            let mut body = body;
            body.position.x = *x;
            let lowest = body
                .world_fixtures()
                .iter()
                .flat_map(|f| f.vertices().to_vec())
                .map(|v| normal.dot(v - *surface_point))
                .fold(f64::INFINITY, f64::min);
            body.position.y += (clearance - lowest) / normal.y;
            Ok(body)
        }
    }
}

pub(crate) fn spawn_body(spawn: &PendingSpawn) -> Result<RigidBody, ChallengeError> {
    let bp = &spawn.blueprint;
    let poly = Polygon::regular(bp.position + spawn.offset, 16, bp.radius)?;
    let tag = match bp.kind {
        SpawnKind::Ball => BodyTag::Ball,
        SpawnKind::Projectile => BodyTag::Projectile,
    };
    let mut body = RigidBody::dynamic(vec![poly], bp.density, bp.material, tag)?;
    body.linear_velocity = bp.velocity;
    Ok(body)
}

impl Environment {
    /// Draws every spawn's offset from a generator seeded with `seed`, two
    /// uniform draws per spawn in schedule order.
    pub fn jitter_spawns(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.pending {
            let ux: f64 = rng.random_range(-1.0..=1.0);
            let uy: f64 = rng.random_range(-1.0..=1.0);
            p.offset = Vec2::new(ux * p.blueprint.jitter.x, uy * p.blueprint.jitter.y);
        }
    }

    /// Adds every pending spawn scheduled at `step`; returns their indices.
    pub fn spawn_due(&mut self, step: u64) -> Result<Vec<(usize, SpawnKind)>, ChallengeError> {
        let mut added = Vec::new();
        while self.pending.first().is_some_and(|p| p.step <= step) {
            let spawn = self.pending.remove(0);
            let index = self.world.add_body(spawn_body(&spawn)?);
            added.push((index, spawn.blueprint.kind));
        }
        Ok(added)
    }
}
