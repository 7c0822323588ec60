//! Timed A* over the dual graph: finds a loop-free channel whose gates are
//! wide enough at the moment the robot is expected to cross them.

use crate::crowd::{d_thresh, feasible_intervals, CrowdSnapshot, FeasibleIntervals, Pedestrian};
use crate::funnel::{clearance_radius, funnel_shortest, portals, ClearanceAssignment, FunnelError, SmoothPath};
use crate::geom::{triangulate, DualGraph, Face, Point2, TriMesh, Vec2};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannerConfig {
    pub v_max: f64,
    pub r_obs: f64,
    pub s_safe: f64,
    pub horizon: f64,
    pub k_clearance: f64,
    pub goal_radius: f64,
    pub lookahead: f64,
    /// Search budget in node expansions.
    pub max_expansions: usize,
    /// Expansions allowed per face before further arrivals are dropped.
    pub max_face_visits: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            v_max: 1.2,
            r_obs: 0.8,
            s_safe: 0.2,
            horizon: 60.0,
            k_clearance: 0.5,
            goal_radius: 0.5,
            lookahead: 1.0,
            max_expansions: 3000,
            max_face_visits: 24,
        }
    }
}

impl PlannerConfig {
    pub fn d_thresh(&self) -> f64 {
        d_thresh(self.r_obs, self.s_safe)
    }

    /// Radius of a clearance circle around a pedestrian with no approach speed.
    pub fn r_base(&self) -> f64 {
        self.r_obs + self.s_safe
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no feasible channel")]
    NoPath,
    #[error("gate of length {length} cannot fit clearance {clearance} on both ends")]
    GateTooNarrow { length: f64, clearance: f64 },
    #[error("robot lies outside the triangulated region")]
    RobotOutsideHull,
    #[error("goal lies outside the triangulated region")]
    GoalOutsideHull,
}

/// One step of a search branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchNode {
    pub face: Face,
    pub entry_gate: Option<usize>,
    pub placed: Point2,
    pub tau_eta: f64,
    pub g: f64,
    pub h: f64,
    pub parent: Option<usize>,
    /// Unit direction of arrival at `placed`.
    pub heading: Option<Vec2>,
}

/// Triangle sequence of a loop-free dual walk with the gates between
/// consecutive faces. `points[0]` is the start; `points[k + 1]` and `etas[k]`
/// are the placed node and arrival time on gate `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Channel {
    pub faces: Vec<usize>,
    pub gates: Vec<usize>,
    pub points: Vec<Point2>,
    pub etas: Vec<f64>,
}

impl Channel {
    pub fn new(faces: Vec<usize>, gates: Vec<usize>) -> Self {
        Channel { faces, gates, points: Vec::new(), etas: Vec::new() }
    }

    pub fn is_loop_free(&self) -> bool {
        let mut seen = HashSet::new();
        self.faces.iter().all(|f| seen.insert(*f))
    }
}

/// Point on `gate` closest to the segment `from`-`target`, kept at least
/// `clearance` from both gate ends.
pub fn place_node(gate: (Point2, Point2), from: Point2, target: Point2, clearance: f64) -> Result<Point2, PlanError> {
    let (a, b) = gate;
    let len = a.dist(b);
    if len <= 2.0 * clearance {
        return Err(PlanError::GateTooNarrow { length: len, clearance });
    }
    let u = (b - a) * (1.0 / len);
    let (lo, hi) = (clearance, len - clearance);
    let at = |s: f64| a + u * s.clamp(lo, hi);

    let mut cands = vec![lo, hi, (from - a).dot(u), (target - a).dot(u)];
    let d = target - from;
    let denom = u.cross(d);
    if denom.abs() > 1e-15 {
        // a + u s = from + d t
        let s = (from - a).cross(d) / denom;
        cands.push(s);
    }
    let mut best = at(cands[0]);
    let mut best_d = segment_point_distance(from, target, best);
    for &s in &cands[1..] {
        let q = at(s);
        let dq = segment_point_distance(from, target, q);
        if dq < best_d {
            best = q;
            best_d = dq;
        }
    }
    Ok(best)
}

pub(crate) fn segment_point_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return a.dist(p);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    (a + ab * t).dist(p)
}

/// Mean velocity of the three vertices of triangle `face`.
pub fn interpolate_velocity(face: usize, mesh: &TriMesh, crowd: &CrowdSnapshot) -> Vec2 {
    let [a, b, c] = mesh.triangle(face);
    let v = crowd.pedestrians[a].velocity + crowd.pedestrians[b].velocity + crowd.pedestrians[c].velocity;
    v * (1.0 / 3.0)
}

/// Speed factor for a heading change of `theta` radians.
pub fn turn_factor(theta: f64) -> f64 {
    (theta.abs() * 0.5).cos().max(0.25)
}

pub fn travel_time(distance: f64, v_max: f64, factor: f64) -> f64 {
    distance / (v_max * factor)
}

/// Arrival time at `placed` when continuing from `parent`.
pub fn eta(parent: &SearchNode, placed: Point2, config: &PlannerConfig) -> f64 {
    let step = placed - parent.placed;
    let dist = step.norm();
    if dist == 0.0 {
        return parent.tau_eta;
    }
    let factor = match parent.heading {
        Some(h) => turn_factor(h.cross(step).atan2(h.dot(step))),
        None => 1.0,
    };
    parent.tau_eta + travel_time(dist, config.v_max, factor)
}

/// Circumcircle of the triangle containing `robot`: a disc with no
/// pedestrian strictly inside.
pub fn local_clearance(mesh: &TriMesh, robot: Point2) -> Result<(Point2, f64), PlanError> {
    match mesh.locate(robot) {
        Face::Triangle(t) => Ok(mesh.circumcircle(t)),
        Face::Outer => Err(PlanError::RobotOutsideHull),
    }
}

/// Lower bound on the length of any path from `s` to `g` crossing the gate
/// segment `a`-`b`.
fn gate_lower_bound(s: Point2, g: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    let f = |t: f64| {
        let x = a + ab * t;
        s.dist(x) + x.dist(g)
    };
    if l2 == 0.0 {
        return f(0.0);
    }
    let n = ab.perp_left() * (1.0 / l2.sqrt());
    let ds = (s - a).dot(n);
    let dg = (g - a).dot(n);
    let proj = |p: Point2| (p - a).dot(ab) / l2;
    let t = if ds == 0.0 && dg == 0.0 {
        proj(s)
    } else {
        // reflect g when on the same side so the minimizer is a crossing
        let g_eff = if ds * dg > 0.0 { g - n * (2.0 * dg) } else { g };
        let dge = (g_eff - a).dot(n);
        proj(s + (g_eff - s) * (ds / (ds - dge)))
    };
    f(t.clamp(0.0, 1.0))
}

/// Lazily computed per-edge feasibility.
struct GateCache<'a> {
    mesh: &'a TriMesh,
    crowd: &'a CrowdSnapshot,
    d_th: f64,
    horizon: f64,
    cache: Vec<Option<FeasibleIntervals>>,
}

impl<'a> GateCache<'a> {
    fn new(mesh: &'a TriMesh, crowd: &'a CrowdSnapshot, config: &PlannerConfig) -> Self {
        GateCache {
            mesh,
            crowd,
            d_th: config.d_thresh(),
            horizon: config.horizon,
            cache: vec![None; mesh.edges().len()],
        }
    }

    fn passable(&mut self, e: usize, tau: f64) -> bool {
        if tau > self.horizon {
            return true;
        }
        let (mesh, crowd, d_th, horizon) = (self.mesh, self.crowd, self.d_th, self.horizon);
        self.cache[e]
            .get_or_insert_with(|| {
                let ed = mesh.edge(e);
                feasible_intervals(&crowd.pedestrians[ed.a], &crowd.pedestrians[ed.b], d_th, horizon)
            })
            .contains(tau)
    }
}

/// Node reached by crossing `gate` into triangle `face` from `parent`.
fn advance(
    parent: &SearchNode,
    parent_idx: Option<usize>,
    gate: usize,
    face: usize,
    mesh: &TriMesh,
    crowd: &CrowdSnapshot,
    goal: Point2,
    config: &PlannerConfig,
) -> SearchNode {
    let ends = mesh.edge_points(gate);
    let q0 = place_node(ends, parent.placed, goal, config.r_base())
        .unwrap_or_else(|_| ends.0.lerp(ends.1, 0.5));
    let v = interpolate_velocity(face, mesh, crowd);
    let guess = eta(parent, q0, config);
    let placed = q0 + v * guess;
    let tau = eta(parent, placed, config).max(parent.tau_eta);
    let step = placed - parent.placed;
    let heading = if step.norm_sq() > 0.0 { Some(step.normalized()) } else { parent.heading };
    SearchNode {
        face: Face::Triangle(face),
        entry_gate: Some(gate),
        placed,
        tau_eta: tau,
        g: tau,
        h: placed.dist(goal) / config.v_max,
        parent: parent_idx,
        heading,
    }
}

fn start_node(start: Point2, face: usize, goal: Point2, config: &PlannerConfig) -> SearchNode {
    SearchNode {
        face: Face::Triangle(face),
        entry_gate: None,
        placed: start,
        tau_eta: 0.0,
        g: 0.0,
        h: start.dist(goal) / config.v_max,
        parent: None,
        heading: None,
    }
}

#[derive(Clone, Copy, Debug)]
struct OpenEntry {
    f: f64,
    h: f64,
    face: usize,
    seq: usize,
    node: usize,
    goal: bool,
}

impl PartialEq for OpenEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OpenEntry {
    // reversed for a min-heap
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.h.total_cmp(&self.h))
            .then(o.face.cmp(&self.face))
            .then(o.seq.cmp(&self.seq))
    }
}

/// Gate-feasible loop-free channel from the face of `start` to the face of
/// `goal`. Equivalent to [`timed_astar_blocking`] with no blocked gates.
pub fn timed_astar(
    mesh: &TriMesh,
    dual: &DualGraph,
    crowd: &CrowdSnapshot,
    start: Point2,
    goal: Point2,
    config: &PlannerConfig,
) -> Result<Channel, PlanError> {
    timed_astar_blocking(mesh, dual, crowd, start, goal, config, &HashSet::new())
}

/// Timed A* that never crosses an edge in `blocked`.
///
/// Branches are ordered by `f = g + h` in seconds. After the first branch
/// reaches the goal face the search keeps going while some open branch could
/// still yield a shorter channel, judged by the point-funnel length of each
/// complete channel against a per-gate lower bound.
pub fn timed_astar_blocking(
    mesh: &TriMesh,
    dual: &DualGraph,
    crowd: &CrowdSnapshot,
    start: Point2,
    goal: Point2,
    config: &PlannerConfig,
    blocked: &HashSet<usize>,
) -> Result<Channel, PlanError> {
    assert_eq!(crowd.len(), mesh.vertices().len(), "mesh vertices must match crowd order");
    let Face::Triangle(f0) = mesh.locate(start) else {
        return Err(PlanError::RobotOutsideHull);
    };
    let Face::Triangle(f_goal) = mesh.locate(goal) else {
        return Err(PlanError::GoalOutsideHull);
    };

    let outer = dual.outer();
    let mut gates = GateCache::new(mesh, crowd, config);
    let mut nodes: Vec<SearchNode> = vec![start_node(start, f0, goal, config)];
    let mut bounds: Vec<f64> = vec![start.dist(goal)];
    let mut open = BinaryHeap::new();
    let mut seq = 0usize;
    open.push(OpenEntry { f: nodes[0].h, h: nodes[0].h, face: f0, seq, node: 0, goal: false });
    let mut visits = vec![0usize; dual.node_count()];
    let mut best: Option<(f64, Channel)> = None;
    let mut expansions = 0usize;

    let zero = ClearanceAssignment::zeros(mesh.vertices().len());

    while let Some(entry) = open.pop() {
        let best_len = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if bounds[entry.node] >= best_len - 1e-9 {
            continue;
        }
        if entry.goal {
            let ch = extract_channel(&nodes, entry.node);
            let len = funnel_shortest(&ch, mesh, start, goal, &zero).map_or(f64::INFINITY, |p| p.length);
            if len < best_len {
                best = Some((len, ch));
            }
            continue;
        }
        if expansions >= config.max_expansions {
            break;
        }
        let Face::Triangle(face) = nodes[entry.node].face else { continue };
        if visits[face] >= config.max_face_visits {
            continue;
        }
        visits[face] += 1;
        expansions += 1;

        let parent = nodes[entry.node];
        if face == f_goal {
            let tau = eta(&parent, goal, config).max(parent.tau_eta);
            let step = goal - parent.placed;
            nodes.push(SearchNode {
                placed: goal,
                tau_eta: tau,
                g: tau,
                h: 0.0,
                parent: Some(entry.node),
                entry_gate: None,
                heading: if step.norm_sq() > 0.0 { Some(step.normalized()) } else { parent.heading },
                face: parent.face,
            });
            bounds.push(bounds[entry.node]);
            seq += 1;
            open.push(OpenEntry { f: tau, h: 0.0, face, seq, node: nodes.len() - 1, goal: true });
            continue;
        }

        for &(next, e) in dual.neighbors(face) {
            if next == outer || blocked.contains(&e) || on_branch(&nodes, entry.node, next) {
                continue;
            }
            let child = advance(&parent, Some(entry.node), e, next, mesh, crowd, goal, config);
            if !gates.passable(e, child.tau_eta) {
                continue;
            }
            let (a, b) = mesh.edge_points(e);
            let lb = bounds[entry.node].max(gate_lower_bound(start, goal, a, b));
            if lb >= best_len - 1e-9 {
                continue;
            }
            nodes.push(child);
            bounds.push(lb);
            seq += 1;
            open.push(OpenEntry { f: child.g + child.h, h: child.h, face: next, seq, node: nodes.len() - 1, goal: false });
        }
    }
    best.map(|b| b.1).ok_or(PlanError::NoPath)
}

fn on_branch(nodes: &[SearchNode], mut idx: usize, face: usize) -> bool {
    loop {
        if nodes[idx].face == Face::Triangle(face) {
            return true;
        }
        match nodes[idx].parent {
            Some(p) => idx = p,
            None => return false,
        }
    }
}

fn extract_channel(nodes: &[SearchNode], goal_node: usize) -> Channel {
    let mut chain = Vec::new();
    let mut idx = nodes[goal_node].parent;
    while let Some(i) = idx {
        chain.push(nodes[i]);
        idx = nodes[i].parent;
    }
    chain.reverse();
    let face_id = |n: &SearchNode| match n.face {
        Face::Triangle(t) => t,
        Face::Outer => unreachable!("outer face never enters a branch"),
    };
    Channel {
        faces: chain.iter().map(face_id).collect(),
        gates: chain.iter().filter_map(|n| n.entry_gate).collect(),
        points: chain.iter().map(|n| n.placed).collect(),
        etas: chain.iter().skip(1).map(|n| n.tau_eta).collect(),
    }
}

/// Recomputes arrival times along `channel` and checks every gate against
/// its feasible intervals (gates reached after the horizon are accepted).
pub fn validate_channel(
    channel: &Channel,
    mesh: &TriMesh,
    crowd: &CrowdSnapshot,
    start: Point2,
    goal: Point2,
    config: &PlannerConfig,
) -> bool {
    if channel.gates.is_empty() {
        return true;
    }
    let mut gates = GateCache::new(mesh, crowd, config);
    let mut node = start_node(start, channel.faces[0], goal, config);
    for (k, &e) in channel.gates.iter().enumerate() {
        node = advance(&node, None, e, channel.faces[k + 1], mesh, crowd, goal, config);
        if !gates.passable(e, node.tau_eta) {
            return false;
        }
    }
    true
}

/// Per-vertex clearance radii for `channel`: each gate endpoint gets the
/// velocity-scaled radius towards the opposite endpoint, the largest over
/// all its gates. Radii are capped so start and goal stay outside.
pub fn channel_clearance(
    channel: &Channel,
    mesh: &TriMesh,
    crowd: &CrowdSnapshot,
    start: Point2,
    goal: Point2,
    config: &PlannerConfig,
) -> ClearanceAssignment {
    let mut radii = ClearanceAssignment::zeros(mesh.vertices().len());
    let r_base = config.r_base();
    for p in portals(channel, mesh) {
        for (v, other) in [(p.left, p.right), (p.right, p.left)] {
            let r = clearance_radius(&crowd.pedestrians[v], mesh.vertex(other), config.k_clearance, r_base);
            let cap = 0.95 * mesh.vertex(v).dist(start).min(mesh.vertex(v).dist(goal));
            radii.set(v, radii.radius(v).max(r).min(cap));
        }
    }
    radii
}

/// How a plan was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PlanKind {
    /// Funnel path through a feasible channel.
    Channel,
    /// No feasible channel; heading for the centre of the local clearance disc.
    LocalClearance,
    /// Too few points to triangulate; straight line to the goal.
    Straight,
}

#[derive(Clone, Debug, Serialize)]
pub struct Plan {
    pub kind: PlanKind,
    pub path: SmoothPath,
    pub channel: Option<Channel>,
}

const MAX_REPLANS: usize = 3;

/// Full planning cycle on a crowd that already contains any virtual corners:
/// triangulate, search, assign clearance and extract the funnel path.
pub fn plan(crowd: &CrowdSnapshot, start: Point2, goal: Point2, config: &PlannerConfig) -> Plan {
    let straight = || Plan { kind: PlanKind::Straight, path: SmoothPath::straight(start, goal), channel: None };
    let Ok(mesh) = triangulate(&crowd.positions()) else {
        return straight();
    };
    let dual = DualGraph::new(&mesh);
    let mut blocked = HashSet::new();
    let mut last: Option<Channel> = None;
    for _ in 0..=MAX_REPLANS {
        let channel = match timed_astar_blocking(&mesh, &dual, crowd, start, goal, config, &blocked) {
            Ok(c) => c,
            Err(PlanError::NoPath) => break,
            Err(_) => return straight(),
        };
        let radii = channel_clearance(&channel, &mesh, crowd, start, goal, config);
        match funnel_shortest(&channel, &mesh, start, goal, &radii) {
            Ok(path) => return Plan { kind: PlanKind::Channel, path, channel: Some(channel) },
            Err(FunnelError::ChannelPinched { gate }) => {
                blocked.insert(channel.gates[gate]);
                last = Some(channel);
            }
            Err(_) => {
                last = Some(channel);
                break;
            }
        }
    }
    if let Some(channel) = last {
        if let Some(path) = shrunk_funnel(&channel, &mesh, crowd, start, goal, config) {
            return Plan { kind: PlanKind::Channel, path, channel: Some(channel) };
        }
    }
    match local_clearance(&mesh, start) {
        Ok((center, _)) => {
            Plan { kind: PlanKind::LocalClearance, path: SmoothPath::straight(start, center), channel: None }
        }
        Err(_) => straight(),
    }
}

/// Funnel with radii scaled down until every gate has positive width.
fn shrunk_funnel(
    channel: &Channel,
    mesh: &TriMesh,
    crowd: &CrowdSnapshot,
    start: Point2,
    goal: Point2,
    config: &PlannerConfig,
) -> Option<SmoothPath> {
    let full = channel_clearance(channel, mesh, crowd, start, goal, config);
    let mut scale = 1.0f64;
    for p in portals(channel, mesh) {
        let sum = full.radius(p.left) + full.radius(p.right);
        if sum > 0.0 {
            scale = scale.min(0.99 * mesh.vertex(p.left).dist(mesh.vertex(p.right)) / sum);
        }
    }
    let mut radii = ClearanceAssignment::zeros(mesh.vertices().len());
    for (v, r) in full.as_slice().iter().enumerate() {
        radii.set(v, r * scale);
    }
    funnel_shortest(channel, mesh, start, goal, &radii)
        .or_else(|_| funnel_shortest(channel, mesh, start, goal, &ClearanceAssignment::zeros(mesh.vertices().len())))
        .ok()
}

/// Identifier range used for virtual corner points.
pub fn is_virtual(id: i64) -> bool {
    id < 0
}

/// Four static points at the corners of the box `[min, max]` grown by
/// `margin`, with ids -1 to -4.
pub fn virtual_corners(min: Point2, max: Point2, margin: f64) -> Vec<Pedestrian> {
    let (x0, y0, x1, y1) = (min.x - margin, min.y - margin, max.x + margin, max.y + margin);
    [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Pedestrian::new(-(i as i64) - 1, Vec2::new(x, y), Vec2::ZERO))
        .collect()
}

/// `crowd` plus virtual corners bounding it together with `extra` points.
pub fn with_virtual_corners(crowd: &CrowdSnapshot, extra: &[Point2], margin: f64) -> CrowdSnapshot {
    let pts = crowd.pedestrians.iter().map(|p| p.position).chain(extra.iter().copied());
    let (mut min, mut max) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in pts {
        min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
        max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
    }
    if !min.is_finite() {
        min = Vec2::ZERO;
        max = Vec2::ZERO;
    }
    let mut pedestrians: Vec<Pedestrian> = crowd.pedestrians.iter().filter(|p| !is_virtual(p.id)).copied().collect();
    pedestrians.extend(virtual_corners(min, max, margin));
    CrowdSnapshot { time: crowd.time, pedestrians }
}
