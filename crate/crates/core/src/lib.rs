//! Arbitrary pattern formation by oblivious robots with viewing range 1.
//!
//! Robots start in a near-gathering (or directly in the initial drawing
//! pattern), split into one drawing formation per symmetric component, and
//! walk precomputed drawing paths, dropping one robot on every pattern
//! coordinate they pass.

pub mod corpus;
pub mod error;
pub mod formation;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod pathing;
pub mod protocol;
pub mod registration;
pub mod render;
pub mod simulator;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::{Circle, Point, TAU_GEOM};
