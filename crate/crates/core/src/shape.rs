//! Brick-chain designs and the action vocabulary shared by human and agent.
//!
//! A design is an ordered chain of equal rectangular bricks. Each brick's
//! angle is stored relative to the previous brick's axis (the first one is
//! absolute, measured from +x). Every angle is an integer multiple of
//! [`ANGLE_STEP`], so the edit space is finite and identical for every actor.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::math::Vec2;

/// Angular resolution of every brick angle (15 degrees).
pub const ANGLE_STEP: f64 = PI / 12.0;
/// Number of distinct quantized angles in `[-pi, pi)`.
pub const ANGLE_STEPS_PER_TURN: i32 = 24;
pub const MAX_BRICKS: usize = 32;
pub const BRICK_LENGTH: f64 = 1.0;
pub const BRICK_THICKNESS: f64 = 0.2;
/// Distance charged for every brick one chain has and the other lacks.
pub const LENGTH_PENALTY: f64 = PI;

const QUANTIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("brick index {index} out of range for chain of {len} bricks")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("chain already holds the maximum of {MAX_BRICKS} bricks")]
    ChainFull,
    #[error("operation requires a non-empty chain")]
    EmptyChain,
    #[error("angle {0} is not a multiple of pi/12")]
    UnquantizedAngle(f64),
    #[error("invalid length bounds {min}..={max}")]
    BadBounds { min: usize, max: usize },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid log at seq {seq}: {source}")]
    InvalidLog {
        seq: u64,
        #[source]
        source: Box<ShapeError>,
    },
}

/// A quantized angle, stored as a whole number of [`ANGLE_STEP`]s in `[-12, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Angle(i8);

impl Angle {
    pub const ZERO: Angle = Angle(0);

    /// Builds an angle from a step count, wrapping into `[-pi, pi)`.
    pub fn from_steps(steps: i32) -> Self {
        let half = ANGLE_STEPS_PER_TURN / 2;
        Angle(((steps + half).rem_euclid(ANGLE_STEPS_PER_TURN) - half) as i8)
    }

    /// Parses radians. Values must sit on the quantization grid; they are
    /// wrapped into `[-pi, pi)`.
    pub fn from_radians(radians: f64) -> Result<Self, ShapeError> {
        if !radians.is_finite() {
            return Err(ShapeError::UnquantizedAngle(radians));
        }
        let steps = (radians / ANGLE_STEP).round();
        if (radians - steps * ANGLE_STEP).abs() > QUANTIZATION_TOLERANCE
            || steps.abs() > 1e6
        {
            return Err(ShapeError::UnquantizedAngle(radians));
        }
        Ok(Self::from_steps(steps as i32))
    }

    pub fn steps(self) -> i32 {
        self.0 as i32
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * ANGLE_STEP
    }

    /// Absolute angular difference after wrapping, in radians, in `[0, pi]`.
    pub fn distance(self, other: Angle) -> f64 {
        let d = Angle::from_steps(self.steps() - other.steps()).steps().abs();
        d as f64 * ANGLE_STEP
    }

    /// Every representable angle, ascending.
    pub fn all() -> impl Iterator<Item = Angle> {
        let half = ANGLE_STEPS_PER_TURN / 2;
        (-half..half).map(Angle::from_steps)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Angle {
        let half = ANGLE_STEPS_PER_TURN / 2;
        Angle::from_steps(rng.random_range(-half..half))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.steps() * 15)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.radians())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let radians = f64::deserialize(deserializer)?;
        Angle::from_radians(radians).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Brick {
    pub rel_angle: Angle,
}

/// A non-empty, continuous chain of bricks.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickChain {
    bricks: Vec<Brick>,
    anchor: Vec2,
    brick_length: f64,
    brick_thickness: f64,
}

/// Four corners of one brick, counterclockwise.
pub type BrickRect = [Vec2; 4];

impl BrickChain {
    /// A chain with default brick dimensions, anchored at the origin.
    pub fn from_angles(angles: &[Angle]) -> Result<Self, ShapeError> {
        Self::new(
            angles.iter().map(|&rel_angle| Brick { rel_angle }).collect(),
            Vec2::ZERO,
            BRICK_LENGTH,
            BRICK_THICKNESS,
        )
    }

    /// Convenience constructor from step counts (multiples of 15 degrees).
    pub fn from_steps(steps: &[i32]) -> Result<Self, ShapeError> {
        let angles: Vec<Angle> = steps.iter().map(|&s| Angle::from_steps(s)).collect();
        Self::from_angles(&angles)
    }

    pub fn new(
        bricks: Vec<Brick>,
        anchor: Vec2,
        brick_length: f64,
        brick_thickness: f64,
    ) -> Result<Self, ShapeError> {
        if bricks.is_empty() {
            return Err(ShapeError::EmptyChain);
        }
        if bricks.len() > MAX_BRICKS {
            return Err(ShapeError::ChainFull);
        }
        if !(brick_length > 0.0 && brick_length.is_finite())
            || !(brick_thickness > 0.0 && brick_thickness.is_finite())
        {
            return Err(ShapeError::InvalidDesign(
                "brick dimensions must be positive and finite".into(),
            ));
        }
        if !(anchor.x.is_finite() && anchor.y.is_finite()) {
            return Err(ShapeError::InvalidDesign("anchor must be finite".into()));
        }
        Ok(Self {
            bricks,
            anchor,
            brick_length,
            brick_thickness,
        })
    }

    pub fn bricks(&self) -> &[Brick] {
        &self.bricks
    }

    pub fn len(&self) -> usize {
        self.bricks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn anchor(&self) -> Vec2 {
        self.anchor
    }

    pub fn brick_length(&self) -> f64 {
        self.brick_length
    }

    pub fn brick_thickness(&self) -> f64 {
        self.brick_thickness
    }

    pub fn angles(&self) -> Vec<Angle> {
        self.bricks.iter().map(|b| b.rel_angle).collect()
    }

    /// Same geometry translated so that the anchor sits at `anchor`.
    pub fn with_anchor(&self, anchor: Vec2) -> Self {
        Self {
            anchor,
            ..self.clone()
        }
    }

    /// Absolute heading of every brick, as cumulative step counts.
    fn headings(&self) -> impl Iterator<Item = f64> + '_ {
        self.bricks.iter().scan(0i32, |acc, b| {
            *acc += b.rel_angle.steps();
            Some(*acc as f64 * ANGLE_STEP)
        })
    }

    /// Joint positions: `len() + 1` points, the first being the anchor.
    pub fn joints(&self) -> Vec<Vec2> {
        let mut joints = Vec::with_capacity(self.bricks.len() + 1);
        let mut p = self.anchor;
        joints.push(p);
        for heading in self.headings() {
            p += Vec2::from_angle(heading) * self.brick_length;
            joints.push(p);
        }
        joints
    }

    /// One oriented rectangle per brick, centerline from joint i to joint i+1.
    pub fn rects(&self) -> Vec<BrickRect> {
        let joints = self.joints();
        let half = self.brick_thickness * 0.5;
        self.headings()
            .zip(joints.windows(2))
            .map(|(heading, w)| {
                let offset = Vec2::from_angle(heading).perp() * half;
                [w[0] - offset, w[1] - offset, w[1] + offset, w[0] + offset]
            })
            .collect()
    }

    pub fn to_wire(&self) -> DesignWire {
        DesignWire {
            brick_length: self.brick_length,
            brick_thickness: self.brick_thickness,
            anchor: [self.anchor.x, self.anchor.y],
            angles: self.bricks.iter().map(|b| b.rel_angle.radians()).collect(),
        }
    }

    pub fn from_wire(wire: &DesignWire) -> Result<Self, ShapeError> {
        let bricks = wire
            .angles
            .iter()
            .map(|&a| Angle::from_radians(a).map(|rel_angle| Brick { rel_angle }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            bricks,
            Vec2::new(wire.anchor[0], wire.anchor[1]),
            wire.brick_length,
            wire.brick_thickness,
        )
    }

    /// Hex SHA-256 of the canonical wire encoding.
    pub fn content_hash(&self) -> String {
        crate::canonical::hash_value(&serde_json::to_value(self.to_wire()).expect("design serializes"))
    }
}

/// Free-function form of [`BrickChain::rects`].
pub fn chain_vertices(chain: &BrickChain) -> Vec<BrickRect> {
    chain.rects()
}

impl Serialize for BrickChain {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BrickChain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = DesignWire::deserialize(deserializer)?;
        BrickChain::from_wire(&wire).map_err(serde::de::Error::custom)
    }
}

/// JSON form of a design. `angles` may be empty on the wire (the empty
/// design); the other fields default to the standard brick at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignWire {
    #[serde(default = "default_length")]
    pub brick_length: f64,
    #[serde(default = "default_thickness")]
    pub brick_thickness: f64,
    #[serde(default)]
    pub anchor: [f64; 2],
    pub angles: Vec<f64>,
}

fn default_length() -> f64 {
    BRICK_LENGTH
}

fn default_thickness() -> f64 {
    BRICK_THICKNESS
}

impl DesignWire {
    pub fn empty() -> Self {
        Self {
            brick_length: BRICK_LENGTH,
            brick_thickness: BRICK_THICKNESS,
            anchor: [0.0, 0.0],
            angles: Vec::new(),
        }
    }
}

/// Wire form of an optional chain (`angles: []` for empty).
pub fn design_to_wire(design: Option<&BrickChain>) -> DesignWire {
    design.map_or_else(DesignWire::empty, BrickChain::to_wire)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainEnd {
    Head,
    Tail,
}

/// One atomic design edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    Add { end: ChainEnd, rel_angle: Angle },
    Remove { end: ChainEnd },
    Rotate { index: usize, new_rel_angle: Angle },
}

/// Applies one action. `None` is the empty design.
///
/// Adding at the head prepends a brick whose end meets the old anchor; the
/// former first brick then hangs off it at `rel_angle`, so the rest of the
/// chain keeps its world orientation.
pub fn apply_action(
    chain: Option<&BrickChain>,
    action: &Action,
) -> Result<Option<BrickChain>, ShapeError> {
    match (chain, *action) {
        (None, Action::Add { rel_angle, .. }) => {
            BrickChain::from_angles(&[rel_angle]).map(Some)
        }
        (None, _) => Err(ShapeError::EmptyChain),
        (Some(c), Action::Add { end, rel_angle }) => {
            if c.len() >= MAX_BRICKS {
                return Err(ShapeError::ChainFull);
            }
            let mut next = c.clone();
            match end {
                ChainEnd::Tail => next.bricks.push(Brick { rel_angle }),
                ChainEnd::Head => {
                    let old_first = c.bricks[0].rel_angle;
                    let new_first = Angle::from_steps(old_first.steps() - rel_angle.steps());
                    next.bricks[0].rel_angle = rel_angle;
                    next.bricks.insert(0, Brick { rel_angle: new_first });
                    next.anchor =
                        c.anchor - Vec2::from_angle(new_first.radians()) * c.brick_length;
                }
            }
            Ok(Some(next))
        }
        (Some(c), Action::Remove { end }) => {
            if c.len() == 1 {
                return Ok(None);
            }
            let mut next = c.clone();
            match end {
                ChainEnd::Tail => {
                    next.bricks.pop();
                }
                ChainEnd::Head => {
                    let removed = next.bricks.remove(0).rel_angle;
                    let heading = Angle::from_steps(removed.steps() + next.bricks[0].rel_angle.steps());
                    next.bricks[0].rel_angle = heading;
                    next.anchor =
                        c.anchor + Vec2::from_angle(removed.radians()) * c.brick_length;
                }
            }
            Ok(Some(next))
        }
        (Some(c), Action::Rotate { index, new_rel_angle }) => {
            if index >= c.len() {
                return Err(ShapeError::IndexOutOfRange {
                    index,
                    len: c.len(),
                });
            }
            let mut next = c.clone();
            next.bricks[index].rel_angle = new_rel_angle;
            Ok(Some(next))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Human,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActorId {
    pub kind: ActorKind,
    pub id: String,
}

impl ActorId {
    pub fn human(id: impl Into<String>) -> Self {
        Self {
            kind: ActorKind::Human,
            id: id.into(),
        }
    }

    pub fn agent(id: impl Into<String>) -> Self {
        Self {
            kind: ActorKind::Agent,
            id: id.into(),
        }
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ActorKind::Human => "human",
            ActorKind::Agent => "agent",
        };
        write!(f, "{kind}:{}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub actor: ActorId,
    pub action: Action,
}

/// Ordered record of every edit made in a design session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLog {
    pub session_id: String,
    pub challenge_id: String,
    pub entries: Vec<LogEntry>,
}

impl ActionLog {
    pub fn new(session_id: impl Into<String>, challenge_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            challenge_id: challenge_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Validates `action` against `current` and appends it. Returns the new
    /// chain; the log is untouched on error.
    pub fn append(
        &mut self,
        current: Option<&BrickChain>,
        actor: ActorId,
        action: Action,
    ) -> Result<(u64, Option<BrickChain>), ShapeError> {
        let next = apply_action(current, &action)?;
        let seq = self.next_seq();
        self.entries.push(LogEntry { seq, actor, action });
        Ok((seq, next))
    }

    /// Log truncated to entries with `seq <= upto`.
    pub fn prefix(&self, upto: u64) -> ActionLog {
        ActionLog {
            session_id: self.session_id.clone(),
            challenge_id: self.challenge_id.clone(),
            entries: self.entries.iter().take(upto as usize + 1).cloned().collect(),
        }
    }
}

/// Folds every logged action over the empty design.
pub fn replay(log: &ActionLog) -> Result<Option<BrickChain>, ShapeError> {
    let mut chain = None;
    for (i, entry) in log.entries.iter().enumerate() {
        if entry.seq != i as u64 {
            return Err(ShapeError::InvalidLog {
                seq: entry.seq,
                source: Box::new(ShapeError::InvalidDesign("sequence gap".into())),
            });
        }
        chain = apply_action(chain.as_ref(), &entry.action).map_err(|e| ShapeError::InvalidLog {
            seq: entry.seq,
            source: Box::new(e),
        })?;
    }
    Ok(chain)
}

/// Angle-wise L1 distance between two chains plus [`LENGTH_PENALTY`] per
/// unmatched brick.
pub fn genotype_distance(a: &BrickChain, b: &BrickChain) -> f64 {
    let extra = a.len().abs_diff(b.len()) as f64 * LENGTH_PENALTY;
    let shared: f64 = a
        .bricks
        .iter()
        .zip(&b.bricks)
        .map(|(x, y)| x.rel_angle.distance(y.rel_angle))
        .sum();
    extra + shared
}

/// Uniform random chain: length uniform in `min_len..=max_len`, angles
/// uniform over the quantized set.
pub fn random_chain<R: Rng + ?Sized>(
    rng: &mut R,
    min_len: usize,
    max_len: usize,
) -> Result<BrickChain, ShapeError> {
    if min_len < 1 || min_len > max_len || max_len > MAX_BRICKS {
        return Err(ShapeError::BadBounds {
            min: min_len,
            max: max_len,
        });
    }
    let len = rng.random_range(min_len..=max_len);
    let angles: Vec<Angle> = (0..len).map(|_| Angle::random(rng)).collect();
    BrickChain::from_angles(&angles)
}
