//! Crowd navigation through dynamic channels: Delaunay triangulation of the
//! crowd, timed A* over gate-feasible triangles, a clearance-aware funnel,
//! plus the simulator, baselines and benchmark harness used to evaluate it.

pub mod baselines;
pub mod bench;
pub mod config;
pub mod crowd;
pub mod datasets;
pub mod funnel;
pub mod geom;
pub mod homotopy;
pub mod planner;
pub mod sim;
