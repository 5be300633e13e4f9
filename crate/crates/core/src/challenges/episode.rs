use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::math::Vec2;
use crate::physics::Frame;
use crate::shape::BrickChain;

use super::env::build_env;
use super::scoring::{
    collected_balls, deepest_penetration, move_target, score_collect, score_cut, score_move,
    score_protect,
};
use super::{ChallengeError, ChallengeSpec, Goal, SpawnKind};

/// Which world states to record during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameCapture {
    #[default]
    Off,
    /// The initial state, every `n`-th state after it, and the final state.
    Every(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub score: f64,
    pub metrics: BTreeMap<String, f64>,
    pub seed: u64,
    pub design_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_ref: Option<String>,
    #[serde(skip)]
    pub frames: Option<Vec<Frame>>,
}

enum Tracker {
    Collect { spawned: usize },
    Protect { projectiles: Vec<(usize, bool)> },
    Move { trajectory: Vec<Vec2> },
    Cut { entry_y: f64, deepest: f64 },
}

/// Simulates `design` in the challenge and scores the outcome.
pub fn run_episode(
    spec: &ChallengeSpec,
    design: &BrickChain,
    seed: u64,
    capture: FrameCapture,
) -> Result<EpisodeResult, ChallengeError> {
    let mut env = build_env(spec, design)?;
    env.jitter_spawns(seed);
    let design_index = env.design;

    let mut tracker = match &spec.goal {
        Goal::Collect { .. } => Tracker::Collect { spawned: 0 },
        Goal::Protect { .. } => Tracker::Protect {
            projectiles: Vec::new(),
        },
        Goal::Move { .. } => Tracker::Move {
            trajectory: vec![env.start_com],
        },
        Goal::Cut { medium, .. } => {
            let entry_y = medium.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
            Tracker::Cut {
                entry_y,
                deepest: deepest_penetration(&env.world, design_index, entry_y),
            }
        }
    };

    let interval = match capture {
        FrameCapture::Off => None,
        FrameCapture::Every(n) => Some(n.max(1)),
    };
    let mut frames = Vec::new();

    for step in 0..spec.episode_steps {
        for (index, kind) in env.spawn_due(step)? {
            match (&mut tracker, kind) {
                (Tracker::Collect { spawned }, SpawnKind::Ball) => *spawned += 1,
                (Tracker::Protect { projectiles }, SpawnKind::Projectile) => {
                    projectiles.push((index, false))
                }
                _ => {}
            }
        }
        if interval.is_some_and(|n| step % n == 0) {
            frames.push(Frame::capture(&env.world));
        }
        env.world.step();

        match &mut tracker {
            Tracker::Protect { projectiles } => {
                if let Some(zone) = &env.zone {
                    let inside = env.world.query_region(zone);
                    for (index, hit) in projectiles.iter_mut() {
                        *hit |= inside.contains(index);
                    }
                }
            }
            Tracker::Move { trajectory } => trajectory.push(env.world.bodies[design_index].position),
            Tracker::Cut { entry_y, deepest } => {
                *deepest = deepest.max(deepest_penetration(&env.world, design_index, *entry_y));
            }
            Tracker::Collect { .. } => {}
        }
    }
    if interval.is_some() {
        frames.push(Frame::capture(&env.world));
    }

    let mut metrics = BTreeMap::new();
    let score = match (&tracker, &spec.goal) {
        (
            Tracker::Collect { spawned },
            Goal::Collect {
                kill_plane_y,
                touch_tolerance,
            },
        ) => {
            let collected = collected_balls(&env.world, design_index, *kill_plane_y, *touch_tolerance);
            metrics.insert("balls_collected".into(), collected as f64);
            metrics.insert("balls_spawned".into(), *spawned as f64);
            score_collect(collected, *spawned)
        }
        (Tracker::Protect { projectiles }, _) => {
            let hits: Vec<bool> = projectiles.iter().map(|(_, h)| *h).collect();
            let hit_count = hits.iter().filter(|h| **h).count();
            metrics.insert("hits".into(), hit_count as f64);
            metrics.insert("hits_blocked".into(), (hits.len() - hit_count) as f64);
            metrics.insert("projectiles_spawned".into(), hits.len() as f64);
            score_protect(&hits)
        }
        (Tracker::Move { trajectory }, _) => {
            let target = move_target(spec, trajectory[0])?;
            let d0 = (trajectory[0] - target).length();
            let score = score_move(trajectory, target)?;
            metrics.insert("start_distance".into(), d0);
            metrics.insert("distance_closed".into(), score * d0);
            score
        }
        (Tracker::Cut { deepest, .. }, Goal::Cut { depth, .. }) => {
            metrics.insert("depth_reached".into(), *deepest);
            score_cut(*deepest, *depth)?
        }
        _ => unreachable!("tracker built from the same goal"),
    };

    Ok(EpisodeResult {
        score,
        metrics,
        seed,
        design_hash: design.content_hash(),
        frames_ref: None,
        frames: interval.map(|_| frames),
    })
}

/// Evaluates every design under the same spec and seed, in parallel when
/// the `parallel` feature is enabled. Output order matches input order.
pub fn evaluate_batch(
    spec: &ChallengeSpec,
    designs: &[BrickChain],
    seed: u64,
) -> Vec<Result<EpisodeResult, ChallengeError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        designs
            .par_iter()
            .map(|d| run_episode(spec, d, seed, FrameCapture::Off))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    evaluate_batch_sequential(spec, designs, seed)
}

pub fn evaluate_batch_sequential(
    spec: &ChallengeSpec,
    designs: &[BrickChain],
    seed: u64,
) -> Vec<Result<EpisodeResult, ChallengeError>> {
    designs
        .iter()
        .map(|d| run_episode(spec, d, seed, FrameCapture::Off))
        .collect()
}
