//! Co-creative brick-chain design: shapes, a deterministic 2D rigid-body
//! engine, four scored challenges, an evolutionary designer that accepts
//! hand-edited injections, and flat-file persistence.

pub mod canonical;
pub mod challenges;
pub mod evolve;
pub mod math;
pub mod physics;
pub mod shape;
pub mod store;

pub use math::Vec2;
pub use shape::{Action, ActionLog, ActorId, ActorKind, Angle, BrickChain, ChainEnd};
