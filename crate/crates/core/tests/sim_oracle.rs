use dynchan::baselines::*;
use dynchan::crowd::{feasible_intervals, CrowdSnapshot, Pedestrian};
use dynchan::datasets::{Scenario, TrajectoryDataset, Workspace};
use dynchan::geom::Vec2;
use dynchan::sim::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn static_scenario(peds: Vec<Pedestrian>, start: Vec2, goal: Vec2) -> Scenario {
    let ws = Workspace::new(v(start.x.min(goal.x), start.y.min(goal.y) - 2.0), v(start.x.max(goal.x), start.y.max(goal.y) + 2.0));
    let frames = vec![CrowdSnapshot::new(0.0, peds.clone()), CrowdSnapshot::new(0.1, peds)];
    let dataset = Arc::new(TrajectoryDataset { name: "static".into(), dt: 0.1, frames, workspace: ws });
    Scenario { dataset, start, goal, start_frame: 0, sensing_range: None }
}

fn circumradius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let (ab, bc, ca) = (a.dist(b), b.dist(c), c.dist(a));
    let area2 = ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
    ab * bc * ca / (2.0 * area2)
}

#[test]
fn constant_steering_traces_the_bicycle_circle() {
    let car = CarParams::default();
    for &delta in &[0.1, -0.3, 0.55] {
        let u = ControlInput { speed: 1.0, steering: delta };
        let mut s = CarState { pos: v(2.0, -1.0), heading: 0.4, speed: 1.0 };
        let mut pts = vec![s.pos];
        for _ in 0..2000 {
            s = step_car(s, u, &car, 0.002);
            pts.push(s.pos);
        }
        let want = car.wheelbase / f64::tan(delta.abs());
        for k in [0usize, 500, 1000] {
            let r = circumradius(pts[k], pts[k + 400], pts[k + 900]);
            assert!((r - want).abs() < 1e-6 * want, "radius {r} want {want}");
        }
    }
}

/// Straight-line run integrated with a fine explicit step; the speed command
/// is held for `dt` and, with `ramp`, follows the tracker's slow-down law.
fn straight_run_time(length: f64, car: &CarParams, goal_radius: f64, dt: f64, ramp: bool) -> f64 {
    let (mut x, mut vel, mut t) = (0.0f64, 0.0f64, 0.0f64);
    let h = 1e-4;
    let mut cmd = 0.0;
    let mut next_cmd = 0.0;
    while length - x > goal_radius {
        if t >= next_cmd - 1e-12 {
            cmd = if ramp { car.v_max * ((length - x) / (3.0 * goal_radius)).min(1.0) } else { car.v_max };
            next_cmd += dt;
        }
        let dv = (cmd - vel).clamp(-car.a_max * h, car.a_max * h);
        x += (vel + 0.5 * dv) * h;
        vel += dv;
        t += h;
    }
    t
}

#[test]
fn empty_crowd_straight_run_matches_kinematics() {
    let cfg = SimConfig { timing: false, ..Default::default() };
    let sc = static_scenario(vec![], v(0.0, 0.0), v(10.0, 0.0));
    for kind in PlannerKind::ALL {
        let r = run_trial(&sc, kind, &cfg, 3).unwrap();
        assert_eq!(r.outcome, Outcome::Success, "{kind:?}");
        let ramp = kind == PlannerKind::DynamicChannels;
        let want = straight_run_time(10.0, &cfg.car, cfg.planner.goal_radius, cfg.dt, ramp);
        assert!(r.travel_time > (10.0 - cfg.planner.goal_radius) / 1.2);
        assert!((r.travel_time - want).abs() <= cfg.dt + 1e-9, "{kind:?}: {} vs {want}", r.travel_time);
    }
}

#[test]
fn pedestrian_parked_on_goal_prevents_success() {
    let cfg = SimConfig { timing: false, timeout_factor: 3.0, ..Default::default() };
    let sc = static_scenario(vec![Pedestrian::new(0, v(8.3, 0.2), Vec2::ZERO)], v(0.0, 0.0), v(8.0, 0.0));
    for kind in PlannerKind::ALL {
        let r = run_trial(&sc, kind, &cfg, 5).unwrap();
        assert_ne!(r.outcome, Outcome::Success, "{kind:?}");
    }
}

#[test]
fn invalid_scenarios_are_rejected() {
    let sc = static_scenario(vec![], v(1.0, 1.0), v(1.0, 1.0));
    assert!(matches!(run_trial(&sc, PlannerKind::Gvo, &SimConfig::default(), 0), Err(SimError::InvalidScenario(_))));
}

fn crossing_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.gen_range(3..10);
    let frames: Vec<CrowdSnapshot> = {
        let peds: Vec<Pedestrian> = (0..n)
            .map(|i| {
                let p = v(rng.gen_range(2.0..10.0), rng.gen_range(-4.0..4.0));
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Pedestrian::new(i, p, v(a.cos(), a.sin()) * rng.gen_range(0.0..1.2))
            })
            .collect();
        (0..400)
            .map(|k| {
                let t = k as f64 * 0.1;
                let moved = peds.iter().map(|p| Pedestrian { position: p.position_at(t), ..*p }).collect();
                CrowdSnapshot::new(t, moved)
            })
            .collect()
    };
    let dataset = Arc::new(TrajectoryDataset::new("cross", 0.1, frames).unwrap());
    Scenario { dataset, start: v(0.0, 0.0), goal: v(12.0, 0.0), start_frame: 0, sensing_range: None }
}

#[test]
fn trials_are_deterministic_and_collisions_match_clearance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = SimConfig { timing: false, ..Default::default() };
    for i in 0..8 {
        let sc = crossing_scenario(&mut rng);
        for kind in PlannerKind::ALL {
            let a = run_trial(&sc, kind, &cfg, i).unwrap();
            let b = run_trial(&sc, kind, &cfg, i).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.outcome == Outcome::Collision, a.min_clearance < cfg.collision_distance);
            assert!(a.travel_time > 0.0);
        }
    }
}

#[test]
fn pursuit_converges_onto_a_straight_path() {
    let car = CarParams::default();
    let path: Vec<Vec2> = (0..=400).map(|i| v(i as f64 * 0.1, 0.0)).collect();
    let mut s = CarState { pos: v(0.0, 1.0), heading: 0.0, speed: 1.2 };
    let mut errs = Vec::new();
    for _ in 0..500 {
        let u = pure_pursuit(&s, &path, 1.0, 0.5, &car);
        s = step_car(s, u, &car, 0.05);
        errs.push(s.pos.y.abs());
    }
    let settle = errs.iter().position(|&e| e < 0.05).expect("never got within 5 cm");
    assert!(errs[settle..].windows(2).all(|w| w[1] <= w[0] + 1e-12 || w[1] < 0.05));
    assert!(errs[settle..].iter().all(|&e| e < 0.05));
}

proptest! {
    #[test]
    fn speed_stays_within_limits(controls in prop::collection::vec((-1.0f64..3.0, -2.0f64..2.0, 0.001f64..0.5), 1..60)) {
        let car = CarParams::default();
        let mut s = CarState::new(Vec2::ZERO, 0.0);
        for (speed, steering, dt) in controls {
            s = step_car(s, ControlInput { speed, steering }, &car, dt);
            prop_assert!(s.speed >= 0.0 && s.speed <= car.v_max + 1e-12);
        }
    }

    #[test]
    fn vo_matches_dense_sampling(
        rx in -5.0f64..5.0, ry in -5.0f64..5.0, rvx in -1.5f64..1.5, rvy in -1.5f64..1.5,
        px in -5.0f64..5.0, py in -5.0f64..5.0, pvx in -1.5f64..1.5, pvy in -1.5f64..1.5,
        horizon in 0.5f64..10.0, radius in 0.2f64..2.0,
    ) {
        let ped = Pedestrian::new(0, v(px, py), v(pvx, pvy));
        let (rp, rv) = (v(rx, ry), v(rvx, rvy));
        let n = (horizon / 1e-3).round() as usize;
        let dist = |tau: f64| (rp + rv * tau).dist(ped.position_at(tau));
        let dense_min = (0..=n).map(|k| dist(horizon * k as f64 / n as f64)).fold(f64::INFINITY, f64::min);
        // skip configurations whose minimum sits within sampling error of the radius
        let slack = (rv - ped.velocity).norm() * 1e-3 + 1e-9;
        prop_assume!((dense_min - radius).abs() > slack);
        prop_assert_eq!(velocity_obstacle_collision(rp, rv, &ped, horizon, radius), dense_min < radius);
        // robot as a second pedestrian: collision iff the pair's feasible set misses part of the horizon
        let robot = Pedestrian::new(1, rp, rv);
        let iv = feasible_intervals(&robot, &ped, radius, horizon);
        let covered = iv.intervals.len() == 1 && iv.intervals[0].0 <= 1e-9 && iv.intervals[0].1 >= horizon - 1e-9;
        prop_assert_eq!(velocity_obstacle_collision(rp, rv, &ped, horizon, radius), !covered);
    }
}

#[test]
fn gvo_choice_is_clear_under_fine_integration() {
    let car = CarParams::default();
    let cfg = GvoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut moving = 0;
    for trial in 0..200 {
        let s = CarState { pos: Vec2::ZERO, heading: rng.gen_range(-0.5..0.5), speed: rng.gen_range(0.0..1.2) };
        let start = v(rng.gen_range(2.0..6.0), rng.gen_range(-4.0..-1.5));
        let ped = Pedestrian::new(0, start, v(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..1.5)));
        let crowd = CrowdSnapshot::new(0.0, vec![ped]);
        let u = gvo_plan(&s, &crowd, v(10.0, 0.0), &cfg, &car, trial);
        if u == ControlInput::STOP {
            continue;
        }
        moving += 1;
        let mut st = s;
        for k in 1..=3500 {
            st = step_car(st, u, &car, 0.001);
            if k % 100 == 0 {
                let tau = k as f64 * 0.001;
                assert!(st.pos.dist(ped.position_at(tau)) >= cfg.radius - 1e-9, "trial {trial} at {tau}");
            }
        }
    }
    assert!(moving > 150);
}

#[test]
fn gvo_is_a_pure_function_of_its_seed() {
    let car = CarParams::default();
    let cfg = GvoConfig::default();
    let s = CarState { pos: Vec2::ZERO, heading: 0.0, speed: 1.0 };
    let crowd = CrowdSnapshot::new(0.0, vec![Pedestrian::new(0, v(3.0, -0.5), v(0.0, 0.4))]);
    let a = gvo_plan(&s, &crowd, v(10.0, 0.0), &cfg, &car, 99);
    assert_eq!(a, gvo_plan(&s, &crowd, v(10.0, 0.0), &cfg, &car, 99));
}

/// Velocity obstacle cone: the relative velocity points within the cone of
/// half-angle asin(r / |p|) around the pedestrian, and contact happens
/// within the horizon.
fn in_vo_cone(robot: Vec2, robot_vel: Vec2, ped: &Pedestrian, horizon: f64, r: f64) -> bool {
    let p = ped.position - robot;
    let w = robot_vel - ped.velocity;
    if p.norm() < r {
        return true;
    }
    if w.norm() == 0.0 || w.dot(p) <= 0.0 {
        return false;
    }
    let half = (r / p.norm()).asin();
    let angle = (w.dot(p) / (w.norm() * p.norm())).clamp(-1.0, 1.0).acos();
    if angle >= half {
        return false;
    }
    // distance travelled along w before touching the disc, by the law of cosines
    let along = p.norm() * angle.cos() - (r * r - (p.norm() * angle.sin()).powi(2)).sqrt();
    along / w.norm() <= horizon
}

#[test]
fn wait_and_go_stops_exactly_inside_the_cone() {
    let car = CarParams::default();
    let cfg = WaitAndGoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let goal = v(20.0, 0.0);
    let (mut stops, mut goes) = (0, 0);
    for _ in 0..5000 {
        let p = v(rng.gen_range(-2.0..8.0), rng.gen_range(-6.0..6.0));
        let ped = Pedestrian::new(0, p, v(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)));
        let s = CarState::new(Vec2::ZERO, 0.0);
        let crowd = CrowdSnapshot::new(0.0, vec![ped]);
        let want_stop = p.norm() < cfg.stop_distance || in_vo_cone(Vec2::ZERO, v(car.v_max, 0.0), &ped, cfg.vo_horizon, cfg.radius);
        let u = wait_and_go(&s, &crowd, goal, &cfg, &car);
        assert_eq!(u.speed == 0.0, want_stop, "{ped:?}");
        if want_stop {
            stops += 1;
        } else {
            goes += 1;
        }
    }
    assert!(stops > 200 && goes > 200);
}

#[test]
fn wait_and_go_resumes_after_a_crosser_passes() {
    let car = CarParams::default();
    let cfg = WaitAndGoConfig::default();
    let ped = Pedestrian::new(0, v(3.0, -4.0), v(0.0, 1.0));
    let s = CarState::new(Vec2::ZERO, 0.0);
    let speeds: Vec<f64> = (0..120)
        .map(|k| {
            let t = k as f64 * 0.1;
            let crowd = CrowdSnapshot::new(t, vec![Pedestrian { position: ped.position_at(t), ..ped }]);
            wait_and_go(&s, &crowd, v(20.0, 0.0), &cfg, &car).speed
        })
        .collect();
    let first_stop = speeds.iter().position(|&x| x == 0.0).expect("never stopped");
    let resume = speeds[first_stop..].iter().position(|&x| x > 0.0).expect("never resumed") + first_stop;
    assert!(speeds[resume..].iter().all(|&x| x > 0.0));
}

#[test]
fn guard_keeps_clear_controls_and_reacts_to_threats() {
    let car = CarParams::default();
    let cfg = GuardConfig::default();
    let s = CarState { pos: Vec2::ZERO, heading: 0.0, speed: 1.2 };
    let u = ControlInput { speed: 1.2, steering: 0.0 };
    assert_eq!(guard_control(&s, u, &CrowdSnapshot::default(), &cfg, &car), u);
    let threat = CrowdSnapshot::new(0.0, vec![Pedestrian::new(0, v(3.0, 0.0), v(-1.2, 0.0))]);
    let g = guard_control(&s, u, &threat, &cfg, &car);
    assert_ne!(g, u);
    let before = predicted_clearance(&s, u, &threat, &car, cfg.horizon, cfg.check_dt);
    let after = predicted_clearance(&s, g, &threat, &car, cfg.horizon, cfg.check_dt);
    assert!(after > before);
}
