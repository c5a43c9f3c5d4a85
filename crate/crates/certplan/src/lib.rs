//! Certified multi-agent motion planning from trajectory data.
//!
//! Each one-cell move of an RRT over a grid is accepted only when a
//! λ-contractive ellipsoid, computed by a semidefinite program from raw
//! input–state data, fits inside the two-cell box of the move. Multiple agents
//! grow their trees in synchronized layers guarded by a space–time
//! reservation table.

pub mod baseline;
pub mod certificates;
pub mod data;
pub mod executor;
pub mod harness;
pub mod lti;
pub mod planner;
pub mod render;
pub mod scenario;
pub mod serial;
pub mod workspace;
