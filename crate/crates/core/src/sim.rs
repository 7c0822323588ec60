//! Car-like robot kinematics, pure-pursuit tracking and the trial loop.

use crate::baselines::{gvo_plan, wait_and_go, GvoConfig, WaitAndGoConfig};
use crate::crowd::CrowdSnapshot;
use crate::datasets::{sensing_filter, Scenario};
use crate::funnel::sample_path;
use crate::geom::{Point2, Vec2};
use crate::planner::{is_virtual, plan, with_virtual_corners, PlanKind, PlannerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarParams {
    pub wheelbase: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub steering_max: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        CarParams { wheelbase: 1.0, v_max: 1.2, a_max: 2.0, steering_max: 0.6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarState {
    pub pos: Point2,
    pub heading: f64,
    pub speed: f64,
}

impl CarState {
    pub fn new(pos: Point2, heading: f64) -> Self {
        CarState { pos, heading, speed: 0.0 }
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.heading.cos(), self.heading.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ControlInput {
    pub speed: f64,
    pub steering: f64,
}

impl ControlInput {
    pub const STOP: ControlInput = ControlInput { speed: 0.0, steering: 0.0 };
}

/// Kinematic bicycle step. Speed moves toward the command at no more than
/// `a_max`; the path is an exact arc of curvature `tan(steering) / wheelbase`,
/// so splitting a step in two gives the same state.
pub fn step_car(state: CarState, u: ControlInput, car: &CarParams, dt: f64) -> CarState {
    assert!(dt > 0.0, "dt must be positive");
    let target = u.speed.clamp(0.0, car.v_max);
    let steering = u.steering.clamp(-car.steering_max, car.steering_max);
    let v0 = state.speed;
    let ramp = (target - v0).abs() / car.a_max;
    let (v1, dist) = if ramp >= dt {
        let v1 = v0 + (target - v0).signum() * car.a_max * dt;
        (v1, 0.5 * (v0 + v1) * dt)
    } else {
        (target, 0.5 * (v0 + target) * ramp + target * (dt - ramp))
    };
    let kappa = steering.tan() / car.wheelbase;
    let th = state.heading;
    let (pos, heading) = if (kappa * dist).abs() < 1e-12 {
        (state.pos + Vec2::new(th.cos(), th.sin()) * dist, th + kappa * dist)
    } else {
        let th1 = th + kappa * dist;
        let d = Vec2::new(th1.sin() - th.sin(), th.cos() - th1.cos()) * (1.0 / kappa);
        (state.pos + d, th1)
    };
    CarState { pos, heading, speed: v1 }
}

/// Pursuit law toward `target`: `atan(2 L sin(alpha) / ld)`, saturated when
/// the target is behind the car.
pub fn steer_toward(state: &CarState, target: Point2, car: &CarParams) -> f64 {
    let d = target - state.pos;
    let ld = d.norm();
    if ld < 1e-12 {
        return 0.0;
    }
    let alpha = wrap_angle(d.angle() - state.heading);
    if alpha.abs() > std::f64::consts::FRAC_PI_2 {
        return if alpha >= 0.0 { car.steering_max } else { -car.steering_max };
    }
    (2.0 * car.wheelbase * alpha.sin() / ld).atan().clamp(-car.steering_max, car.steering_max)
}

pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + t
    } else {
        r
    }
}

/// Tracks a sampled path: steers at the first sample at least `lookahead`
/// of arc length past the closest sample, at `v_max` ramped down linearly
/// within `3 * goal_radius` of the path end.
pub fn pure_pursuit(state: &CarState, path: &[Point2], lookahead: f64, goal_radius: f64, car: &CarParams) -> ControlInput {
    assert!(!path.is_empty(), "path must not be empty");
    let closest = (0..path.len())
        .min_by(|&i, &j| state.pos.dist(path[i]).total_cmp(&state.pos.dist(path[j])))
        .unwrap();
    let mut target = path.len() - 1;
    let mut acc = 0.0;
    for i in closest + 1..path.len() {
        acc += path[i - 1].dist(path[i]);
        if acc >= lookahead {
            target = i;
            break;
        }
    }
    let remaining: f64 =
        path[closest..].windows(2).map(|w| w[0].dist(w[1])).sum::<f64>() + state.pos.dist(path[closest]);
    let ramp = 3.0 * goal_radius;
    let speed = if ramp > 0.0 { car.v_max * (remaining / ramp).min(1.0) } else { car.v_max };
    ControlInput { speed, steering: steer_toward(state, path[target], car) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PlannerKind {
    DynamicChannels,
    Gvo,
    WaitAndGo,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::DynamicChannels, PlannerKind::Gvo, PlannerKind::WaitAndGo];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::DynamicChannels => "dynamic-channels",
            PlannerKind::Gvo => "gvo",
            PlannerKind::WaitAndGo => "wait-and-go",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        PlannerKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub collision_distance: f64,
    /// Trials end after this multiple of the straight-line time at `v_max`.
    pub timeout_factor: f64,
    /// Margin of the virtual corners around workspace, robot and goal.
    pub corner_margin: f64,
    /// Path sample spacing handed to pure pursuit.
    pub track_spacing: f64,
    /// Record wall-clock planning times; off gives reproducible results.
    pub timing: bool,
    pub car: CarParams,
    pub planner: PlannerConfig,
    pub gvo: GvoConfig,
    pub wait: WaitAndGoConfig,
    pub guard: GuardConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.05,
            collision_distance: 1.0,
            timeout_factor: 4.0,
            corner_margin: 1.0,
            track_spacing: 0.1,
            timing: true,
            car: CarParams::default(),
            planner: PlannerConfig::default(),
            gvo: GvoConfig::default(),
            wait: WaitAndGoConfig::default(),
            guard: GuardConfig::default(),
        }
    }
}

/// Short-horizon maneuver layer under the path tracker.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuardConfig {
    pub enabled: bool,
    pub horizon: f64,
    pub check_dt: f64,
    pub radius: f64,
    pub speed_levels: usize,
    pub steering_levels: usize,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig { enabled: true, horizon: 2.0, check_dt: 0.1, radius: 1.1, speed_levels: 4, steering_levels: 9 }
    }
}

/// Smallest distance to any linearly moving real pedestrian while holding
/// `u` for `horizon`, checked every `h` seconds.
pub fn predicted_clearance(state: &CarState, u: ControlInput, crowd: &CrowdSnapshot, car: &CarParams, horizon: f64, h: f64) -> f64 {
    let n = (horizon / h).round() as usize;
    let mut s = *state;
    let mut best = f64::INFINITY;
    for k in 1..=n {
        s = step_car(s, u, car, h);
        let tau = k as f64 * h;
        for p in crowd.pedestrians.iter().filter(|p| !is_virtual(p.id)) {
            best = best.min(s.pos.dist(p.position_at(tau)));
        }
    }
    best
}

/// Keeps `u` when its short-term prediction stays clear; otherwise the clear
/// control of a fixed grid closest to `u`, or the grid control with the
/// most predicted clearance when none is clear.
pub fn guard_control(state: &CarState, u: ControlInput, crowd: &CrowdSnapshot, cfg: &GuardConfig, car: &CarParams) -> ControlInput {
    let clear = |c: ControlInput| predicted_clearance(state, c, crowd, car, cfg.horizon, cfg.check_dt);
    if !cfg.enabled || clear(u) >= cfg.radius {
        return u;
    }
    let dist = |c: &ControlInput| {
        let ds = (c.speed - u.speed) / car.v_max;
        let dd = (c.steering - u.steering) / car.steering_max;
        ds * ds + dd * dd
    };
    let mut best: Option<(bool, f64, f64, ControlInput)> = None;
    for i in 0..cfg.speed_levels {
        let speed = car.v_max * (1.0 - i as f64 / (cfg.speed_levels - 1).max(1) as f64);
        for j in 0..cfg.steering_levels {
            let steering = car.steering_max * (2.0 * j as f64 / (cfg.steering_levels - 1).max(1) as f64 - 1.0);
            let c = ControlInput { speed, steering };
            let d = clear(c);
            let ok = d >= cfg.radius;
            let key = (ok, if ok { -dist(&c) } else { d }, -dist(&c), c);
            let better = match &best {
                None => true,
                Some(b) => (key.0, key.1, key.2) > (b.0, b.1, b.2),
            };
            if better {
                best = Some(key);
            }
        }
    }
    best.map_or(u, |b| b.3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub outcome: Outcome,
    pub travel_time: f64,
    /// Seconds per planning cycle (zeros when timing is off).
    pub plan_times: Vec<f64>,
    pub min_clearance: f64,
    /// Mean number of pedestrians visible per step.
    pub visible_mean: f64,
}

impl TrialResult {
    pub fn mean_plan_time(&self) -> f64 {
        if self.plan_times.is_empty() {
            0.0
        } else {
            self.plan_times.iter().sum::<f64>() / self.plan_times.len() as f64
        }
    }

    pub fn max_plan_time(&self) -> f64 {
        self.plan_times.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}

/// Closest distance from `p` to any real pedestrian.
pub fn nearest_pedestrian(crowd: &CrowdSnapshot, p: Point2) -> f64 {
    crowd
        .pedestrians
        .iter()
        .filter(|q| !is_virtual(q.id))
        .map(|q| q.position.dist(p))
        .fold(f64::INFINITY, f64::min)
}

/// One control decision of `kind` for the robot in `visible`.
pub fn decide(
    kind: PlannerKind,
    state: &CarState,
    visible: &CrowdSnapshot,
    scenario: &Scenario,
    cfg: &SimConfig,
    seed: u64,
) -> ControlInput {
    let goal = scenario.goal;
    match kind {
        PlannerKind::DynamicChannels => {
            let ws = scenario.dataset.workspace;
            let crowd = with_virtual_corners(visible, &[state.pos, goal, ws.min, ws.max], cfg.corner_margin);
            let p = plan(&crowd, state.pos, goal, &cfg.planner);
            let samples = sample_path(&p.path, cfg.track_spacing);
            let u = pure_pursuit(state, &samples, cfg.planner.lookahead, cfg.planner.goal_radius, &cfg.car);
            let u = if p.kind == PlanKind::Straight && wait_and_go(state, visible, goal, &cfg.wait, &cfg.car).speed == 0.0 {
                ControlInput { speed: 0.0, ..u }
            } else {
                u
            };
            guard_control(state, u, visible, &cfg.guard, &cfg.car)
        }
        PlannerKind::Gvo => gvo_plan(state, visible, goal, &cfg.gvo, &cfg.car, seed),
        PlannerKind::WaitAndGo => wait_and_go(state, visible, goal, &cfg.wait, &cfg.car),
    }
}

/// Runs one trial at fixed `cfg.dt`, re-planning every step against the
/// sensed crowd and stepping the car against the true crowd. A collision
/// fails the trial but the run continues, so the travel time always covers
/// the whole trial up to the goal or the timeout.
pub fn run_trial(scenario: &Scenario, kind: PlannerKind, cfg: &SimConfig, seed: u64) -> Result<TrialResult, SimError> {
    if scenario.dataset.frames.is_empty() {
        return Err(SimError::InvalidScenario("dataset has no frames"));
    }
    let dist = scenario.start.dist(scenario.goal);
    if !(dist > 0.0) || !scenario.start.is_finite() || !scenario.goal.is_finite() {
        return Err(SimError::InvalidScenario("start and goal must be distinct finite points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_time = cfg.timeout_factor * dist / cfg.car.v_max;
    let mut state = CarState::new(scenario.start, (scenario.goal - scenario.start).angle());
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut plan_times = Vec::new();
    let mut visible_total = 0usize;
    let mut min_clearance = nearest_pedestrian(&scenario.crowd_at(0.0), state.pos);
    let outcome = loop {
        let truth = scenario.crowd_at(t);
        let visible = sensing_filter(&truth, state.pos, scenario.sensing_range);
        visible_total += visible.len();
        let step_seed = rng.gen::<u64>();
        let clock = Instant::now();
        let u = decide(kind, &state, &visible, scenario, cfg, step_seed);
        plan_times.push(if cfg.timing { clock.elapsed().as_secs_f64() } else { 0.0 });
        state = step_car(state, u, &cfg.car, cfg.dt);
        steps += 1;
        t = steps as f64 * cfg.dt;
        min_clearance = min_clearance.min(nearest_pedestrian(&scenario.crowd_at(t), state.pos));
        let collided = min_clearance < cfg.collision_distance;
        if state.pos.dist(scenario.goal) <= cfg.planner.goal_radius {
            break if collided { Outcome::Collision } else { Outcome::Success };
        }
        if t >= max_time - 1e-9 {
            break if collided { Outcome::Collision } else { Outcome::Timeout };
        }
    };
    Ok(TrialResult {
        outcome,
        travel_time: t,
        plan_times,
        min_clearance,
        visible_mean: visible_total as f64 / steps as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn straight_step() {
        let car = CarParams::default();
        let s = CarState { pos: v(1.0, 2.0), heading: FRAC_PI_2, speed: 1.2 };
        let n = step_car(s, ControlInput { speed: 1.2, steering: 0.0 }, &car, 1.0);
        assert!(n.pos.dist(v(1.0, 3.2)) < 1e-12 && n.heading == FRAC_PI_2);
        let still = CarState::new(v(1.0, 2.0), 0.3);
        assert_eq!(step_car(still, ControlInput::STOP, &car, 0.5), still);
    }

    #[test]
    fn speed_is_rate_limited_and_capped() {
        let car = CarParams::default();
        let s = step_car(CarState::new(Vec2::ZERO, 0.0), ControlInput { speed: 5.0, steering: 0.0 }, &car, 0.1);
        assert!((s.speed - 0.2).abs() < 1e-12 && (s.pos.x - 0.01).abs() < 1e-12);
        let s = step_car(s, ControlInput { speed: 5.0, steering: 0.0 }, &car, 10.0);
        assert_eq!(s.speed, 1.2);
    }

    #[test]
    fn steps_compose() {
        let car = CarParams::default();
        let s = CarState { pos: v(0.3, -0.2), heading: 1.0, speed: 0.4 };
        let u = ControlInput { speed: 1.1, steering: -0.45 };
        let one = step_car(s, u, &car, 0.7);
        let two = step_car(step_car(s, u, &car, 0.25), u, &car, 0.45);
        assert!(one.pos.dist(two.pos) < 1e-12 && (one.heading - two.heading).abs() < 1e-12);
    }

    #[test]
    fn pursuit_aligned_and_lateral() {
        let car = CarParams::default();
        let s = CarState::new(Vec2::ZERO, 0.0);
        let path: Vec<Point2> = (0..=100).map(|i| v(i as f64 * 0.1, 0.0)).collect();
        let u = pure_pursuit(&s, &path, 1.0, 0.5, &car);
        assert_eq!(u.steering, 0.0);
        assert_eq!(u.speed, car.v_max);
        // target 90 degrees to the left at distance 2
        let wide = CarParams { steering_max: 1.5, ..car };
        let delta = steer_toward(&s, v(0.0, 2.0), &wide);
        assert!((delta - (2.0 * wide.wheelbase / 2.0f64).atan()).abs() < 1e-12);
        let near_end = CarState::new(v(9.8, 0.0), 0.0);
        assert!(pure_pursuit(&near_end, &path, 1.0, 0.5, &car).speed < car.v_max);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }
}
