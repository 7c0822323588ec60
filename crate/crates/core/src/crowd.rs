//! Pedestrian state, the linear motion model and gate feasibility.
//!
//! A gate is a triangulation edge between two pedestrians. Under constant
//! velocities its squared width is a quadratic in time, so the set of times
//! at which the gate is at least `d_th` wide is a union of at most two
//! intervals.

use crate::geom::{Point2, Vec2};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// Discriminants below this are treated as a tangent (single touching) root.
const TANGENT_EPS: f64 = 1e-12;
/// Relative velocities with squared norm below this are treated as equal.
const STATIC_EPS: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pedestrian {
    pub id: i64,
    pub position: Point2,
    pub velocity: Vec2,
    pub radius: f64,
}

impl Pedestrian {
    pub fn new(id: i64, position: Point2, velocity: Vec2) -> Self {
        Pedestrian { id, position, velocity, radius: 0.3 }
    }

    /// Position under the linear model `p + v * tau`.
    pub fn position_at(&self, tau: f64) -> Point2 {
        self.position + self.velocity * tau
    }
}

/// Pedestrian positions and velocities at one instant.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CrowdSnapshot {
    pub time: f64,
    pub pedestrians: Vec<Pedestrian>,
}

impl CrowdSnapshot {
    pub fn new(time: f64, pedestrians: Vec<Pedestrian>) -> Self {
        CrowdSnapshot { time, pedestrians }
    }

    pub fn len(&self) -> usize {
        self.pedestrians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pedestrians.is_empty()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.pedestrians.iter().map(|p| p.position).collect()
    }

    pub fn get(&self, id: i64) -> Option<&Pedestrian> {
        self.pedestrians.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrowdError {
    #[error("snapshot times must increase (prev {prev}, curr {curr})")]
    NonMonotonicTime { prev: f64, curr: f64 },
}

/// Ordered, disjoint closed time intervals; the last one may be open-ended
/// (`hi == f64::INFINITY`).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibleIntervals {
    pub intervals: Vec<(f64, f64)>,
}

impl FeasibleIntervals {
    pub fn always() -> Self {
        FeasibleIntervals { intervals: vec![(0.0, f64::INFINITY)] }
    }

    pub fn never() -> Self {
        FeasibleIntervals { intervals: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= t && t <= hi)
    }
}

/// Minimum gate width for the robot to pass: `2 (r_obs + s_safe)`.
pub fn d_thresh(r_obs: f64, s_safe: f64) -> f64 {
    2.0 * (r_obs + s_safe)
}

/// Distance between two pedestrians `tau` seconds ahead.
pub fn gate_distance(pi: &Pedestrian, pj: &Pedestrian, tau: f64) -> f64 {
    let dp = pi.position - pj.position;
    let dv = pi.velocity - pj.velocity;
    (dp + dv * tau).norm()
}

/// Times in `[0, horizon]` at which the gate `pi`-`pj` is at least `d_th`
/// wide. A final interval still feasible at the horizon is left open-ended.
pub fn feasible_intervals(pi: &Pedestrian, pj: &Pedestrian, d_th: f64, horizon: f64) -> FeasibleIntervals {
    let dp = pi.position - pj.position;
    let dv = pi.velocity - pj.velocity;
    let a = dv.norm_sq();
    let b = 2.0 * dp.dot(dv);
    let c = dp.norm_sq() - d_th * d_th;

    if a <= STATIC_EPS {
        return if c >= 0.0 { FeasibleIntervals::always() } else { FeasibleIntervals::never() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= TANGENT_EPS {
        return FeasibleIntervals::always();
    }
    // Numerically stable roots of a t^2 + b t + c.
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-sq / (2.0 * a), sq / (2.0 * a)) };
    let (t1, t2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };

    let mut out = Vec::with_capacity(2);
    if t1 >= 0.0 {
        if t1 > horizon {
            return FeasibleIntervals::always();
        }
        out.push((0.0, t1));
    }
    if t2 <= horizon {
        out.push((t2.max(0.0), f64::INFINITY));
    }
    FeasibleIntervals { intervals: out }
}

/// Finite-difference velocities between consecutive snapshots. Pedestrians
/// seen only in `curr` get zero velocity.
pub fn estimate_velocities(prev: &CrowdSnapshot, curr: &CrowdSnapshot) -> Result<CrowdSnapshot, CrowdError> {
    if curr.time <= prev.time {
        return Err(CrowdError::NonMonotonicTime { prev: prev.time, curr: curr.time });
    }
    let dt = curr.time - prev.time;
    let before: HashMap<i64, Point2> = prev.pedestrians.iter().map(|p| (p.id, p.position)).collect();
    let pedestrians = curr
        .pedestrians
        .iter()
        .map(|p| {
            let velocity = before.get(&p.id).map_or(Vec2::ZERO, |&q| (p.position - q) * (1.0 / dt));
            Pedestrian { velocity, ..*p }
        })
        .collect();
    Ok(CrowdSnapshot { time: curr.time, pedestrians })
}
