use std::collections::{BTreeSet, VecDeque};

use crate::math::Vec2;
use crate::physics::{BodyTag, World};

use super::{ChallengeError, ChallengeSpec, Goal};

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        (part as f64 / whole as f64).clamp(0.0, 1.0)
    }
}

/// Balls above the kill plane that are connected to the design through a
/// chain of touching bodies. Only balls relay contact; the ground does not.
pub fn collected_balls(world: &World, design: usize, kill_plane_y: f64, tolerance: f64) -> usize {
    let n = world.bodies.len();
    let mut adjacency = vec![Vec::new(); n];
    for (a, b) in world.touching_pairs(tolerance) {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = BTreeSet::from([design]);
    let mut queue = VecDeque::from([design]);
    let mut collected = 0;
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            let body = &world.bodies[j];
            if body.tag != BodyTag::Ball || !seen.insert(j) {
                continue;
            }
            if body.position.y > kill_plane_y {
                collected += 1;
                queue.push_back(j);
            }
        }
    }
    collected
}

pub fn score_collect(collected: usize, spawned: usize) -> f64 {
    ratio(collected, spawned)
}

/// One flag per spawned projectile, set once it has touched the zone.
pub fn score_protect(hits: &[bool]) -> f64 {
    1.0 - ratio(hits.iter().filter(|h| **h).count(), hits.len())
}

/// Target point of the move challenge for a design starting at `start`.
pub fn move_target(spec: &ChallengeSpec, start: Vec2) -> Result<Vec2, ChallengeError> {
    match (&spec.goal, spec.downslope()) {
        (Goal::Move { target_distance, .. }, Some(dir)) => Ok(start + dir * *target_distance),
        _ => Err(ChallengeError::InvalidSpec("not a move challenge".into())),
    }
}

/// Closest-approach score of a center-of-mass trajectory whose first
/// sample is the start position.
pub fn score_move(trajectory: &[Vec2], target: Vec2) -> Result<f64, ChallengeError> {
    let start = *trajectory
        .first()
        .ok_or_else(|| ChallengeError::InvalidSpec("empty trajectory".into()))?;
    let d0 = (start - target).length();
    if d0 <= 0.0 {
        return Err(ChallengeError::DegenerateSpec("start coincides with target".into()));
    }
    let d_min = trajectory
        .iter()
        .map(|p| (*p - target).length())
        .fold(f64::INFINITY, f64::min);
    Ok(((d0 - d_min) / d0).clamp(0.0, 1.0))
}

/// How far the design's lowest vertex is below `entry_y`; negative when above.
pub fn deepest_penetration(world: &World, design: usize, entry_y: f64) -> f64 {
    world.bodies[design]
        .world_fixtures()
        .iter()
        .flat_map(|f| f.vertices().iter().map(|v| entry_y - v.y).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn score_cut(depth_reached: f64, depth: f64) -> Result<f64, ChallengeError> {
    if depth.is_nan() || depth <= 0.0 {
        return Err(ChallengeError::DegenerateSpec("medium depth must be positive".into()));
    }
    Ok((depth_reached / depth).clamp(0.0, 1.0))
}
