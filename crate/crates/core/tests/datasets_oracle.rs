use dynchan::crowd::{CrowdSnapshot, Pedestrian};
use dynchan::datasets::*;
use dynchan::geom::Vec2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = if ab.norm_sq() > 0.0 { ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + ab * t)
}

/// Random raw text: tracks with random gaps in frame numbers.
fn random_raw(rng: &mut ChaCha8Rng) -> (String, BTreeMap<i64, Vec<(i64, Vec2)>>) {
    let mut tracks = BTreeMap::new();
    let mut text = String::new();
    for id in 0..rng.gen_range(1..8) {
        let mut frame = rng.gen_range(0..40i64);
        let mut pts = Vec::new();
        for _ in 0..rng.gen_range(1..12) {
            let p = v(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            pts.push((frame, p));
            text.push_str(&format!("{frame} {id} {:.17e} {:.17e}\n", p.x, p.y));
            frame += rng.gen_range(1..15);
        }
        tracks.insert(id, pts);
    }
    (text, tracks)
}

#[test]
fn interpolated_positions_lie_on_the_original_tracks() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let opts = LoadOptions { frame_period: 0.04, ..Default::default() };
    for _ in 0..300 {
        let (text, tracks) = random_raw(&mut rng);
        let raw = parse_raw("r", &text, &opts).unwrap();
        let up = interpolate(&raw, 0.1);
        for f in &up.frames {
            for p in &f.pedestrians {
                let pts = &tracks[&p.id];
                let t = |fr: i64| fr as f64 * 0.04;
                if pts.len() == 1 {
                    let nearest = up.frames.iter().map(|g| (g.time - t(pts[0].0)).abs()).fold(f64::INFINITY, f64::min);
                    assert!((f.time - t(pts[0].0)).abs() <= nearest + 1e-9);
                } else {
                    assert!(f.time >= t(pts[0].0) - 1e-9 && f.time <= t(pts[pts.len() - 1].0) + 1e-9);
                }
                let d = if pts.len() == 1 {
                    p.position.dist(pts[0].1)
                } else {
                    pts.windows(2).map(|w| on_segment(p.position, w[0].1, w[1].1)).fold(f64::INFINITY, f64::min)
                };
                assert!(d < 1e-9, "{:?} off track by {d}", p.position);
                assert!(up.workspace.contains(p.position));
            }
        }
    }
}

#[test]
fn interpolating_a_uniform_dataset_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..100 {
        let (text, _) = random_raw(&mut rng);
        let once = interpolate(&parse_raw("r", &text, &LoadOptions::default()).unwrap(), 0.1);
        let twice = interpolate(&once, 0.1);
        assert_eq!(once.frames.len(), twice.frames.len());
        for (a, b) in once.frames.iter().zip(&twice.frames) {
            assert_eq!(a.pedestrians.len(), b.pedestrians.len());
            for (p, q) in a.pedestrians.iter().zip(&b.pedestrians) {
                assert_eq!(p.id, q.id);
                assert!(p.position.dist(q.position) < 1e-9 && p.velocity.dist(q.velocity) < 1e-6);
            }
        }
    }
}

#[test]
fn raw_workspace_bounds_every_position() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..100 {
        let (text, _) = random_raw(&mut rng);
        let ds = parse_raw("r", &text, &LoadOptions::default()).unwrap();
        let all: Vec<Vec2> = ds.frames.iter().flat_map(|f| f.positions()).collect();
        assert!(all.iter().all(|&p| ds.workspace.contains(p)));
        assert!(all.iter().any(|p| p.x == ds.workspace.min.x) && all.iter().any(|p| p.y == ds.workspace.max.y));
    }
}

#[test]
fn canonical_csv_round_trips() {
    let ds = synth_crowd(&SyntheticConfig { duration: 20.0, seed: 9, ..Default::default() });
    let csv = ds.to_csv();
    assert!(csv.starts_with("frame,ped_id,x,y\n"));
    let opts = LoadOptions { format: RawFormat::Canonical, frame_period: ds.dt, ..Default::default() };
    let back = parse_raw("synthetic", &csv, &opts).unwrap();
    assert_eq!(back.to_csv(), csv);
}

#[test]
fn trial_counts_follow_the_span() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..50 {
        let frames_n = rng.gen_range(2..400);
        let frames = (0..frames_n)
            .map(|k| CrowdSnapshot::new(k as f64 * 0.1, vec![Pedestrian::new(0, v(k as f64, (k % 7) as f64), Vec2::ZERO)]))
            .collect();
        let ds = Arc::new(TrajectoryDataset::new("t", 0.1, frames).unwrap());
        let interval = rng.gen_range(0.5..5.0);
        let trials = make_trials(&ds, interval);
        assert_eq!(trials.len(), 4 * (ds.span() / interval + 1e-9).floor() as usize);
        for s in &trials {
            assert_ne!(s.start, s.goal);
        }
    }
}

#[test]
fn synthetic_population_stays_bounded() {
    for seed in 0..5 {
        let cfg = SyntheticConfig { duration: 200.0, seed, ..Default::default() };
        let ds = synth_crowd(&cfg);
        let mut first = BTreeMap::new();
        let mut last = BTreeMap::new();
        for f in &ds.frames {
            for p in &f.pedestrians {
                first.entry(p.id).or_insert(f.time);
                last.insert(p.id, f.time);
                assert!(ds.workspace.contains(p.position));
            }
        }
        let max_life = first.iter().map(|(id, t0)| last[id] - t0).fold(0.0, f64::max) + cfg.dt;
        let bound = cfg.spawn_count as f64 * max_life / cfg.spawn_period + cfg.spawn_count as f64;
        assert!(ds.frames.iter().all(|f| f.len() as f64 <= bound));
        let ids: BTreeSet<i64> = first.keys().copied().collect();
        assert_eq!(ids.len(), cfg.spawn_count * (cfg.duration / cfg.spawn_period).ceil() as usize);
    }
}

#[test]
fn dense_fixture_has_about_thirty_pedestrians() {
    let ds = synth_crowd(&SyntheticConfig::dense(1));
    let warm = (20.0 / ds.dt) as usize;
    let counts: Vec<f64> = ds.frames[warm..].iter().map(|f| f.len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    assert!((25.0..=38.0).contains(&mean), "mean {mean}");
}

proptest! {
    #[test]
    fn sensing_matches_brute_force(
        pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 0..40),
        rx in -20.0f64..20.0, ry in -20.0f64..20.0, range in 0.01f64..30.0,
    ) {
        let frame = CrowdSnapshot::new(0.0, pts.iter().enumerate().map(|(i, &(x, y))| Pedestrian::new(i as i64, v(x, y), Vec2::ZERO)).collect());
        let robot = v(rx, ry);
        let got: BTreeSet<i64> = sensing_filter(&frame, robot, Some(range)).pedestrians.iter().map(|p| p.id).collect();
        let want: BTreeSet<i64> = pts.iter().enumerate()
            .filter(|(_, &(x, y))| ((x - rx).powi(2) + (y - ry).powi(2)).sqrt() <= range)
            .map(|(i, _)| i as i64).collect();
        prop_assert_eq!(got, want);
    }
}
