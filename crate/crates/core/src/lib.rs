//! Centerline-constrained guidewire navigation environment with a geodesic
//! (along-vessel) distance reward and a small DDPG trainer.

pub mod ddpg;
pub mod env;
pub mod geometry;
pub mod guidewire;
pub mod numfmt;
pub mod reward;
pub mod vesselgraph;

pub use geometry::{Frame, Point3};
