//! Deterministic 2D simulation of a robot swarm that assembles under a
//! payload and carries it through a polygonal environment.
//!
//! Phase 1 is a centralised planner ([`phase1`]) that fits a circular region
//! in sensed free space, packs it with triangles ([`geometry`]) and assigns
//! each agent a support point under the object. Phase 2 ([`phase2`]) is a
//! decentralised relay: an elected master plans the next region and every
//! agent rebuilds its own goal from a stored polar offset. [`engine`] drives
//! both phases tick by tick and records a replayable trace.

pub mod dynamics;
pub mod engine;
pub mod geometry;
pub mod phase1;
pub mod phase2;
pub mod plot;
pub mod scenario;
pub mod sensing;
pub mod trace;

pub use engine::{run, SimTrace};
pub use geometry::{CircleRegion, Polygon, Vec2};
pub use scenario::Scenario;
