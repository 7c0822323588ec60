//! Comparison planners: a sampling generalized velocity obstacle planner and
//! wait-and-go.

use crate::crowd::{CrowdSnapshot, Pedestrian};
use crate::geom::{Point2, Vec2};
use crate::planner::is_virtual;
use crate::sim::{steer_toward, step_car, CarParams, CarState, ControlInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GvoConfig {
    pub time_horizon: f64,
    pub samples: usize,
    /// Collision checks per second along each sampled trajectory.
    pub check_rate: f64,
    pub wheelbase: f64,
    /// Minimum allowed robot-pedestrian distance at a checkpoint.
    pub radius: f64,
}

impl Default for GvoConfig {
    fn default() -> Self {
        GvoConfig { time_horizon: 3.5, samples: 40, check_rate: 10.0, wheelbase: 1.0, radius: 1.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaitAndGoConfig {
    pub stop_distance: f64,
    pub vo_horizon: f64,
    pub radius: f64,
}

impl Default for WaitAndGoConfig {
    fn default() -> Self {
        WaitAndGoConfig { stop_distance: 1.5, vo_horizon: 3.0, radius: 1.0 }
    }
}

/// Pursuit toward the goal at `v_max`, ignoring obstacles.
pub fn preferred_control(state: &CarState, goal: Point2, car: &CarParams) -> ControlInput {
    ControlInput { speed: car.v_max, steering: steer_toward(state, goal, car) }
}

/// Whether a robot and a pedestrian, both moving linearly, come closer than
/// `radius` within `[0, horizon]`.
pub fn velocity_obstacle_collision(robot_pos: Point2, robot_vel: Vec2, ped: &Pedestrian, horizon: f64, radius: f64) -> bool {
    assert!(horizon > 0.0, "horizon must be positive");
    let p = robot_pos - ped.position;
    let v = robot_vel - ped.velocity;
    let vv = v.dot(v);
    let tau = if vv > 0.0 { (-p.dot(v) / vv).clamp(0.0, horizon) } else { 0.0 };
    (p + v * tau).norm() < radius
}

fn control_distance(a: &ControlInput, b: &ControlInput, car: &CarParams) -> f64 {
    let ds = (a.speed - b.speed) / car.v_max;
    let dd = (a.steering - b.steering) / car.steering_max;
    (ds * ds + dd * dd).sqrt()
}

/// Whether holding `u` for the horizon keeps at least `cfg.radius` from
/// every linearly moving pedestrian at each checkpoint.
pub fn gvo_trajectory_is_free(state: &CarState, u: ControlInput, crowd: &CrowdSnapshot, cfg: &GvoConfig, car: &CarParams) -> bool {
    let car = CarParams { wheelbase: cfg.wheelbase, ..*car };
    let h = 1.0 / cfg.check_rate;
    let n = (cfg.time_horizon * cfg.check_rate).round() as usize;
    let mut s = *state;
    for k in 1..=n {
        s = step_car(s, u, &car, h);
        let tau = k as f64 * h;
        if crowd.pedestrians.iter().any(|p| !is_virtual(p.id) && s.pos.dist(p.position_at(tau)) < cfg.radius) {
            return false;
        }
    }
    true
}

/// Samples `cfg.samples` controls uniformly (plus the preferred control) and
/// returns the collision-free one closest to the preferred control; a full
/// stop when none is free.
pub fn gvo_plan(
    state: &CarState,
    crowd: &CrowdSnapshot,
    goal: Point2,
    cfg: &GvoConfig,
    car: &CarParams,
    seed: u64,
) -> ControlInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pref = preferred_control(state, goal, car);
    let mut candidates = vec![pref];
    candidates.extend((0..cfg.samples).map(|_| ControlInput {
        speed: rng.gen_range(0.0..=car.v_max),
        steering: rng.gen_range(-car.steering_max..=car.steering_max),
    }));
    candidates
        .into_iter()
        .filter(|u| gvo_trajectory_is_free(state, *u, crowd, cfg, car))
        .min_by(|a, b| control_distance(a, &pref, car).total_cmp(&control_distance(b, &pref, car)))
        .unwrap_or(ControlInput::STOP)
}

/// Drives straight for the goal and stops while a pedestrian is within
/// `stop_distance` or on a collision course within the horizon.
pub fn wait_and_go(state: &CarState, crowd: &CrowdSnapshot, goal: Point2, cfg: &WaitAndGoConfig, car: &CarParams) -> ControlInput {
    let u = preferred_control(state, goal, car);
    let robot_vel = (goal - state.pos).normalized() * car.v_max;
    let danger = crowd.pedestrians.iter().filter(|p| !is_virtual(p.id)).any(|p| {
        p.position.dist(state.pos) < cfg.stop_distance
            || velocity_obstacle_collision(state.pos, robot_vel, p, cfg.vo_horizon, cfg.radius)
    });
    if danger {
        ControlInput { speed: 0.0, ..u }
    } else {
        u
    }
}
