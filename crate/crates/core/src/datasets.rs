//! Trajectory datasets: ETH/UCY ingestion, resampling, trial schedules,
//! synthetic crowds and sensing-range filtering.

use crate::crowd::{CrowdSnapshot, Pedestrian};
use crate::geom::{Point2, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("projection requested but no homography was given")]
    MissingHomography,
    #[error("homography must have 9 numbers, found {0}")]
    BadHomography(usize),
    #[error("dataset has no observations")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Workspace {
    pub min: Point2,
    pub max: Point2,
}

impl Workspace {
    pub fn new(min: Point2, max: Point2) -> Self {
        Workspace { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }

    /// Midpoints of the bottom, right, top and left sides.
    pub fn side_midpoints(&self) -> [Point2; 4] {
        let c = self.min.lerp(self.max, 0.5);
        [
            Vec2::new(c.x, self.min.y),
            Vec2::new(self.max.x, c.y),
            Vec2::new(c.x, self.max.y),
            Vec2::new(self.min.x, c.y),
        ]
    }

    fn bounding(points: impl Iterator<Item = Point2>) -> Option<Self> {
        let mut ws: Option<Workspace> = None;
        for p in points {
            ws = Some(match ws {
                None => Workspace::new(p, p),
                Some(w) => Workspace::new(
                    Vec2::new(w.min.x.min(p.x), w.min.y.min(p.y)),
                    Vec2::new(w.max.x.max(p.x), w.max.y.max(p.y)),
                ),
            });
        }
        ws
    }
}

/// Time-ordered crowd snapshots. After [`interpolate`] the frames sit on a
/// uniform grid of spacing `dt`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryDataset {
    pub name: String,
    pub dt: f64,
    pub frames: Vec<CrowdSnapshot>,
    pub workspace: Workspace,
}

impl TrajectoryDataset {
    /// Builds a dataset and sets the workspace to the bounding box of every
    /// position.
    pub fn new(name: impl Into<String>, dt: f64, frames: Vec<CrowdSnapshot>) -> Result<Self, DatasetError> {
        let workspace = Workspace::bounding(frames.iter().flat_map(|f| f.pedestrians.iter().map(|p| p.position)))
            .ok_or(DatasetError::Empty)?;
        Ok(TrajectoryDataset { name: name.into(), dt, frames, workspace })
    }

    pub fn span(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    /// Canonical CSV `frame,ped_id,x,y` with 6 fractional digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,ped_id,x,y\n");
        for (k, f) in self.frames.iter().enumerate() {
            for p in &f.pedestrians {
                writeln!(out, "{k},{},{:.6},{:.6}", p.id, p.position.x, p.position.y).unwrap();
            }
        }
        out
    }
}

/// Column layout of a raw trajectory file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawFormat {
    /// `frame ped_id x y`, comma or whitespace separated, optional header.
    Canonical,
    /// ETH `obsmat.txt`: `frame ped_id pos_x pos_z pos_y v_x v_z v_y`.
    Obsmat,
    /// Obsmat when a line has 8 columns, canonical otherwise.
    Auto,
}

/// Row-major 3x3 projective transform from image to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(pub [f64; 9]);

impl Homography {
    pub const IDENTITY: Homography = Homography([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let nums: Vec<f64> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| DatasetError::Parse { line: 0, msg: e.to_string() }))
            .collect::<Result<_, _>>()?;
        let arr: [f64; 9] = nums.as_slice().try_into().map_err(|_| DatasetError::BadHomography(nums.len()))?;
        Ok(Homography(arr))
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let h = &self.0;
        let w = h[6] * p.x + h[7] * p.y + h[8];
        Vec2::new((h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w)
    }
}

/// Options for [`load_raw`].
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub format: RawFormat,
    /// Seconds per unit of the frame column.
    pub frame_period: f64,
    pub project: bool,
    pub homography: Option<Homography>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { format: RawFormat::Auto, frame_period: 0.04, project: false, homography: None }
    }
}

/// Parses raw observations and groups them per frame. Velocities are left
/// at zero; [`interpolate`] fills them in.
pub fn parse_raw(name: &str, text: &str, opts: &LoadOptions) -> Result<TrajectoryDataset, DatasetError> {
    let h = if opts.project { Some(opts.homography.ok_or(DatasetError::MissingHomography)?) } else { None };
    let mut frames: BTreeMap<i64, Vec<Pedestrian>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        let nums: Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
        let Ok(nums) = nums else {
            if frames.is_empty() && i == 0 {
                continue; // header
            }
            return Err(DatasetError::Parse { line: i + 1, msg: format!("non-numeric field in {line:?}") });
        };
        let obsmat = match opts.format {
            RawFormat::Obsmat => true,
            RawFormat::Canonical => false,
            RawFormat::Auto => nums.len() == 8,
        };
        let need = if obsmat { 8 } else { 4 };
        if nums.len() < need {
            return Err(DatasetError::Parse { line: i + 1, msg: format!("expected {need} columns, found {}", nums.len()) });
        }
        let (x, y) = if obsmat { (nums[2], nums[4]) } else { (nums[2], nums[3]) };
        let mut p = Vec2::new(x, y);
        if let Some(h) = h {
            p = h.apply(p);
        }
        if !p.is_finite() {
            return Err(DatasetError::Parse { line: i + 1, msg: "non-finite position".into() });
        }
        let frame = nums[0].round() as i64;
        frames.entry(frame).or_default().push(Pedestrian::new(nums[1].round() as i64, p, Vec2::ZERO));
    }
    let mut snaps: Vec<CrowdSnapshot> =
        frames.into_iter().map(|(f, peds)| CrowdSnapshot::new(f as f64 * opts.frame_period, peds)).collect();
    for s in &mut snaps {
        s.pedestrians.sort_by_key(|p| p.id);
        s.pedestrians.dedup_by_key(|p| p.id);
    }
    let dt = snaps.windows(2).map(|w| w[1].time - w[0].time).fold(f64::INFINITY, f64::min);
    TrajectoryDataset::new(name, if dt.is_finite() { dt } else { opts.frame_period }, snaps)
}

/// Reads a raw trajectory file; the dataset is named after the file stem.
pub fn load_raw(path: &Path, opts: &LoadOptions) -> Result<TrajectoryDataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_raw(&name, &text, opts)
}

/// Resamples every track onto a uniform grid of spacing `dt` starting at the
/// first frame. A pedestrian is present at grid times within its observed
/// span; a single observation lands on the nearest grid frame. Velocities
/// are backward differences between grid frames.
pub fn interpolate(dataset: &TrajectoryDataset, dt: f64) -> TrajectoryDataset {
    assert!(dt > 0.0, "dt must be positive");
    let mut tracks: BTreeMap<i64, Vec<(f64, Point2)>> = BTreeMap::new();
    for f in &dataset.frames {
        for p in &f.pedestrians {
            tracks.entry(p.id).or_default().push((f.time, p.position));
        }
    }
    let t0 = dataset.frames.first().map_or(0.0, |f| f.time);
    let count = (dataset.span() / dt + 1e-9).floor() as usize + 1;
    let grid = |k: usize| t0 + k as f64 * dt;
    let mut frames: Vec<CrowdSnapshot> = (0..count).map(|k| CrowdSnapshot::new(grid(k), Vec::new())).collect();
    for (&id, obs) in &tracks {
        if obs.len() == 1 {
            let k = (((obs[0].0 - t0) / dt).round().max(0.0) as usize).min(count - 1);
            frames[k].pedestrians.push(Pedestrian::new(id, obs[0].1, Vec2::ZERO));
            continue;
        }
        let (first, last) = (obs[0].0, obs[obs.len() - 1].0);
        let k0 = ((first - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        let mut j = 0;
        for (k, frame) in frames.iter_mut().enumerate().skip(k0) {
            let t = grid(k);
            if t > last + 1e-9 {
                break;
            }
            while j + 2 < obs.len() && obs[j + 1].0 <= t {
                j += 1;
            }
            let ((ta, pa), (tb, pb)) = (obs[j], obs[j + 1]);
            let s = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            frame.pedestrians.push(Pedestrian::new(id, pa.lerp(pb, s), Vec2::ZERO));
        }
    }
    for k in 1..frames.len() {
        let prev: BTreeMap<i64, Point2> = frames[k - 1].pedestrians.iter().map(|p| (p.id, p.position)).collect();
        for p in &mut frames[k].pedestrians {
            if let Some(q) = prev.get(&p.id) {
                p.velocity = (p.position - *q) * (1.0 / dt);
            }
        }
    }
    TrajectoryDataset {
        name: dataset.name.clone(),
        dt,
        workspace: Workspace::bounding(frames.iter().flat_map(|f| f.pedestrians.iter().map(|p| p.position)))
            .unwrap_or(dataset.workspace),
        frames,
    }
}

/// One navigation task over a (cycled) dataset.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub dataset: Arc<TrajectoryDataset>,
    pub start: Point2,
    pub goal: Point2,
    pub start_frame: usize,
    /// `None` for unlimited sensing.
    pub sensing_range: Option<f64>,
}

impl Scenario {
    pub fn start_offset(&self) -> f64 {
        self.start_frame as f64 * self.dataset.dt
    }

    /// Ground-truth crowd `t` seconds into the trial: positions interpolated
    /// between frames, velocities as stored in the frame. The last frame is
    /// followed by the first.
    pub fn crowd_at(&self, t: f64) -> CrowdSnapshot {
        let ds = &self.dataset;
        let n = ds.frames.len();
        let steps = t / ds.dt;
        let k = steps.floor() as usize;
        let frac = steps - k as f64;
        let a = &ds.frames[(self.start_frame + k) % n];
        let b = &ds.frames[(self.start_frame + k + 1) % n];
        let pedestrians = a
            .pedestrians
            .iter()
            .map(|p| match b.get(p.id) {
                Some(q) if !(self.start_frame + k + 1).is_multiple_of(n) => Pedestrian { position: p.position.lerp(q.position, frac), ..*p },
                _ => *p,
            })
            .collect();
        CrowdSnapshot::new(t, pedestrians)
    }
}

/// Four opposite-side start/goal pairs at every multiple of `interval`
/// within the dataset span: `4 * floor(span / interval)` scenarios.
pub fn make_trials(dataset: &Arc<TrajectoryDataset>, interval: f64) -> Vec<Scenario> {
    assert!(interval > 0.0, "interval must be positive");
    let offsets = (dataset.span() / interval + 1e-9).floor() as usize;
    let mids = dataset.workspace.side_midpoints();
    let mut out = Vec::with_capacity(4 * offsets);
    for k in 0..offsets {
        let start_frame = ((k as f64 * interval) / dataset.dt).round() as usize;
        for (i, &start) in mids.iter().enumerate() {
            out.push(Scenario {
                dataset: Arc::clone(dataset),
                start,
                goal: mids[(i + 2) % 4],
                start_frame,
                sensing_range: None,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticConfig {
    pub spawn_period: f64,
    /// Pedestrians per spawn event, split between the left and right sides.
    pub spawn_count: usize,
    pub retarget_period: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub workspace: Workspace,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            spawn_period: 5.0,
            spawn_count: 2,
            retarget_period: 3.0,
            speed_min: 0.5,
            speed_max: 1.5,
            workspace: Workspace::new(Vec2::ZERO, Vec2::new(30.0, 30.0)),
            duration: 120.0,
            dt: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// The bundled dense benchmark crowd: about 30 pedestrians per frame
    /// once the flow has built up.
    pub fn dense(seed: u64) -> Self {
        SyntheticConfig {
            spawn_period: 2.5,
            spawn_count: 2,
            workspace: Workspace::new(Vec2::ZERO, Vec2::new(30.0, 20.0)),
            duration: 300.0,
            seed,
            ..Default::default()
        }
    }
}

struct Walker {
    id: i64,
    pos: Point2,
    goal: Point2,
    speed: f64,
    to_right: bool,
}

/// Two-sided pedestrian flow: `spawn_count` pedestrians every
/// `spawn_period`, each heading for a random point on the far side at a
/// random speed, with goal and speed redrawn every `retarget_period`.
/// Pedestrians leave on arrival.
pub fn synth_crowd(cfg: &SyntheticConfig) -> TrajectoryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ws = cfg.workspace;
    let far_goal = |rng: &mut ChaCha8Rng, to_right: bool| {
        Vec2::new(if to_right { ws.max.x } else { ws.min.x }, rng.gen_range(ws.min.y..=ws.max.y))
    };
    let steps = (cfg.duration / cfg.dt + 1e-9).floor() as usize;
    let spawn_every = (cfg.spawn_period / cfg.dt).round().max(1.0) as usize;
    let retarget_every = (cfg.retarget_period / cfg.dt).round().max(1.0) as usize;
    let mut walkers: Vec<Walker> = Vec::new();
    let mut next_id = 0i64;
    let mut frames = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 && k % retarget_every == 0 {
            for w in &mut walkers {
                w.goal = far_goal(&mut rng, w.to_right);
                w.speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);
            }
        }
        if k % spawn_every == 0 {
            for j in 0..cfg.spawn_count {
                let to_right = j % 2 == 0;
                let x = if to_right { ws.min.x } else { ws.max.x };
                let pos = Vec2::new(x, rng.gen_range(ws.min.y..=ws.max.y));
                let goal = far_goal(&mut rng, to_right);
                let speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);
                walkers.push(Walker { id: next_id, pos, goal, speed, to_right });
                next_id += 1;
            }
        }
        let peds = walkers
            .iter()
            .map(|w| Pedestrian::new(w.id, w.pos, (w.goal - w.pos).normalized() * w.speed))
            .collect();
        frames.push(CrowdSnapshot::new(k as f64 * cfg.dt, peds));
        for w in &mut walkers {
            let step = w.speed * cfg.dt;
            let d = w.goal - w.pos;
            w.pos = if d.norm() <= step { w.goal } else { w.pos + d.normalized() * step };
        }
        walkers.retain(|w| w.pos.dist(w.goal) > 1e-9);
    }
    TrajectoryDataset { name: "synthetic".into(), dt: cfg.dt, frames, workspace: ws }
}

/// `trials` robot tasks on a synthetic crowd, alternating between the lower
/// right to upper left diagonal and its reverse, starting after `warmup`
/// seconds and spaced `interval` apart (wrapping around the dataset).
pub fn synthetic_trials(
    dataset: &Arc<TrajectoryDataset>,
    trials: usize,
    warmup: f64,
    interval: f64,
    sensing_range: Option<f64>,
) -> Vec<Scenario> {
    let ws = dataset.workspace;
    let (lr, ul) = (Vec2::new(ws.max.x, ws.min.y), Vec2::new(ws.min.x, ws.max.y));
    let n = dataset.frames.len();
    (0..trials)
        .map(|k| {
            let (start, goal) = if k % 2 == 0 { (lr, ul) } else { (ul, lr) };
            let start_frame = (((warmup + k as f64 * interval) / dataset.dt).round() as usize) % n;
            Scenario { dataset: Arc::clone(dataset), start, goal, start_frame, sensing_range }
        })
        .collect()
}

/// Pedestrians within `range` of the robot (all of them when `None`).
pub fn sensing_filter(frame: &CrowdSnapshot, robot: Point2, range: Option<f64>) -> CrowdSnapshot {
    match range {
        None => frame.clone(),
        Some(r) => CrowdSnapshot::new(
            frame.time,
            frame.pedestrians.iter().filter(|p| p.position.dist(robot) <= r).copied().collect(),
        ),
    }
}
