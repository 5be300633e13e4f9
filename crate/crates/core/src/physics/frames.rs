//! Trajectory frames for playback: one JSON line per sampled step.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::math::Vec2;

use super::body::BodyTag;
use super::world::World;

pub const DEFAULT_FRAME_INTERVAL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyFrame {
    pub tag: BodyTag,
    pub pos: Vec2,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub bodies: Vec<BodyFrame>,
}

impl Frame {
    pub fn capture(world: &World) -> Self {
        Self {
            t: world.time(),
            bodies: world
                .bodies
                .iter()
                .map(|b| BodyFrame {
                    tag: b.tag,
                    pos: b.position,
                    angle: b.angle,
                })
                .collect(),
        }
    }
}

pub fn write_frames<W: Write>(mut out: W, frames: &[Frame]) -> io::Result<()> {
    for frame in frames {
        serde_json::to_writer(&mut out, frame)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_frames<R: BufRead>(input: R) -> io::Result<Vec<Frame>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|line| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect()
}
