//! Shortest segment-arc path through a channel with a clearance circle at
//! every channel vertex.
//!
//! This is the funnel (string pulling) algorithm where funnel legs are
//! tangent lines between circles instead of lines between points. With all
//! radii zero it reduces to the classic point funnel.

use crate::crowd::Pedestrian;
use crate::geom::{Point2, TriMesh, Vec2, EPS_GEO};
use crate::planner::Channel;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunnelError {
    #[error("gate {gate} of the channel has no usable width")]
    ChannelPinched { gate: usize },
    #[error("{0} lies inside the clearance circle of vertex {1}")]
    InsideClearance(&'static str, usize),
    #[error("channel has {faces} faces but {gates} gates")]
    Malformed { faces: usize, gates: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PathElement {
    Segment {
        start: Point2,
        end: Point2,
    },
    /// Circular arc; angles are unwrapped so `end_angle - start_angle` is the
    /// signed sweep (positive for counterclockwise).
    Arc {
        center: Point2,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
        ccw: bool,
    },
}

impl PathElement {
    pub fn length(&self) -> f64 {
        match *self {
            PathElement::Segment { start, end } => start.dist(end),
            PathElement::Arc { radius, start_angle, end_angle, .. } => radius * (end_angle - start_angle).abs(),
        }
    }

    pub fn start_point(&self) -> Point2 {
        self.point_at(0.0)
    }

    pub fn end_point(&self) -> Point2 {
        self.point_at(1.0)
    }

    /// Point at fraction `s` in `[0, 1]` of the element's length.
    pub fn point_at(&self, s: f64) -> Point2 {
        match *self {
            PathElement::Segment { start, end } => start.lerp(end, s),
            PathElement::Arc { center, radius, start_angle, end_angle, .. } => {
                let a = start_angle + (end_angle - start_angle) * s;
                center + Vec2::new(a.cos(), a.sin()) * radius
            }
        }
    }
}

/// Alternating straight segments and arcs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SmoothPath {
    pub elements: Vec<PathElement>,
    pub length: f64,
}

impl SmoothPath {
    pub fn from_elements(elements: Vec<PathElement>) -> Self {
        let length = elements.iter().map(PathElement::length).sum();
        SmoothPath { elements, length }
    }

    pub fn straight(start: Point2, goal: Point2) -> Self {
        Self::from_elements(vec![PathElement::Segment { start, end: goal }])
    }

    pub fn start(&self) -> Option<Point2> {
        self.elements.first().map(PathElement::start_point)
    }

    pub fn end(&self) -> Option<Point2> {
        self.elements.last().map(PathElement::end_point)
    }
}

/// Clearance radius per mesh vertex (zero for vertices not on the channel).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClearanceAssignment {
    radii: Vec<f64>,
}

impl ClearanceAssignment {
    pub fn zeros(vertex_count: usize) -> Self {
        ClearanceAssignment { radii: vec![0.0; vertex_count] }
    }

    pub fn uniform(vertex_count: usize, r: f64) -> Self {
        ClearanceAssignment { radii: vec![r; vertex_count] }
    }

    pub fn radius(&self, v: usize) -> f64 {
        self.radii[v]
    }

    pub fn set(&mut self, v: usize, r: f64) {
        self.radii[v] = r;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.radii
    }
}

/// Clearance for `ped` when the path crosses its gate towards `gate_other_end`.
/// Pedestrians moving towards the other end of the gate would walk into the
/// robot's path, so they get `k` extra meters per m/s of that motion.
pub fn clearance_radius(ped: &Pedestrian, gate_other_end: Point2, k: f64, r_base: f64) -> f64 {
    let e = (gate_other_end - ped.position).normalized();
    let v_proj = ped.velocity.dot(e);
    if v_proj > 0.0 {
        r_base + k * v_proj
    } else {
        r_base
    }
}

/// One side of a gate, oriented along the direction of travel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Portal {
    pub left: usize,
    pub right: usize,
}

/// Gate endpoints of `channel` labelled left/right relative to travel.
pub fn portals(channel: &Channel, mesh: &TriMesh) -> Vec<Portal> {
    channel
        .gates
        .iter()
        .zip(&channel.faces)
        .map(|(&g, &f)| {
            let tri = mesh.triangle(f);
            let ed = mesh.edge(g);
            let i = (0..3)
                .find(|&i| {
                    let (u, w) = (tri[i], tri[(i + 1) % 3]);
                    (u == ed.a && w == ed.b) || (u == ed.b && w == ed.a)
                })
                .expect("gate is an edge of its face");
            Portal { left: tri[(i + 1) % 3], right: tri[i] }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug)]
struct Anchor {
    center: Point2,
    radius: f64,
    side: Side,
    /// Mesh vertex, or `None` for the start/goal points.
    vertex: Option<usize>,
    /// First and last portal (start = 0, goal = portals + 1) this anchor bounds.
    lo: usize,
    hi: usize,
}

impl Anchor {
    fn point(p: Point2, k: usize) -> Self {
        Anchor { center: p, radius: 0.0, side: Side::Left, vertex: None, lo: k, hi: k }
    }

    fn same(&self, o: &Anchor) -> bool {
        self.vertex == o.vertex && (self.vertex.is_some() || self.lo == o.lo)
    }

    fn signed_radius(&self) -> f64 {
        match self.side {
            Side::Left => self.radius,
            Side::Right => -self.radius,
        }
    }
}

/// Tangent segment leaving `a` and arriving at `b`, with each circle on the
/// side its anchor requires. `None` if the circles overlap so that no such
/// tangent exists.
fn tangent(a: &Anchor, b: &Anchor) -> Option<(Point2, Point2, Vec2)> {
    let d = b.center - a.center;
    let k = b.signed_radius() - a.signed_radius();
    let dd = d.norm_sq();
    if dd <= k * k || dd == 0.0 {
        return None;
    }
    let lambda = (dd - k * k).sqrt();
    let dir = (d * (1.0 / dd.sqrt())).rotated(-k.atan2(lambda));
    let n = dir.perp_right();
    let pa = a.center + n * a.signed_radius();
    let pb = b.center + n * b.signed_radius();
    Some((pa, pb, dir))
}

/// Shortest path from `start` to `goal` through `channel`, keeping at least
/// `radii` from every channel vertex.
pub fn funnel_shortest(
    channel: &Channel,
    mesh: &TriMesh,
    start: Point2,
    goal: Point2,
    radii: &ClearanceAssignment,
) -> Result<SmoothPath, FunnelError> {
    if channel.faces.len() != channel.gates.len() + 1 {
        return Err(FunnelError::Malformed { faces: channel.faces.len(), gates: channel.gates.len() });
    }
    let ports = portals(channel, mesh);
    for (k, p) in ports.iter().enumerate() {
        let width = mesh.vertex(p.left).dist(mesh.vertex(p.right)) - radii.radius(p.left) - radii.radius(p.right);
        if width <= 0.0 {
            return Err(FunnelError::ChannelPinched { gate: k });
        }
    }
    for p in &ports {
        for v in [p.left, p.right] {
            if start.dist(mesh.vertex(v)) < radii.radius(v) {
                return Err(FunnelError::InsideClearance("start", v));
            }
            if goal.dist(mesh.vertex(v)) < radii.radius(v) {
                return Err(FunnelError::InsideClearance("goal", v));
            }
        }
    }

    // Bends of the point funnel fix the homotopy; circles then replace the
    // bend points. Each anchor remembers the run of portals it bounds so a
    // tangent can be checked against every portal it must still cross.
    let point = |v: usize, side: Side, k: usize| Anchor {
        center: mesh.vertex(v),
        radius: 0.0,
        side,
        vertex: Some(v),
        lo: k,
        hi: k,
    };
    let last = ports.len() + 1;
    let mut sides: Vec<(Anchor, Anchor)> = Vec::with_capacity(ports.len() + 2);
    sides.push((Anchor::point(start, 0), Anchor::point(start, 0)));
    sides.extend(ports.iter().enumerate().map(|(k, p)| (point(p.left, Side::Left, k + 1), point(p.right, Side::Right, k + 1))));
    sides.push((Anchor::point(goal, last), Anchor::point(goal, last)));

    let run = |v: usize, side: Side, k: usize| {
        let on = |j: usize| {
            let (l, r) = &sides[j];
            match side {
                Side::Left => l.vertex == Some(v),
                Side::Right => r.vertex == Some(v),
            }
        };
        let (mut lo, mut hi) = (k, k);
        while lo > 1 && on(lo - 1) {
            lo -= 1;
        }
        while hi < last - 1 && on(hi + 1) {
            hi += 1;
        }
        (lo, hi)
    };
    let circle = |v: usize, side: Side, (lo, hi): (usize, usize)| Anchor {
        center: mesh.vertex(v),
        radius: radii.radius(v),
        side,
        vertex: Some(v),
        lo,
        hi,
    };
    let mut anchors: Vec<Anchor> = pull_string(&sides)
        .into_iter()
        .map(|a| match a.vertex {
            Some(v) => circle(v, a.side, run(v, a.side, a.lo)),
            None => a,
        })
        .collect();

    let mut circles: Vec<usize> =
        channel.faces.iter().flat_map(|&f| mesh.triangle(f)).filter(|&v| radii.radius(v) > 0.0).collect();
    circles.sort_unstable();
    circles.dedup();
    let pinched_at = |v: Option<usize>| {
        let gate = ports.iter().position(|p| Some(p.left) == v || Some(p.right) == v).unwrap_or(0);
        FunnelError::ChannelPinched { gate }
    };
    // Deepest portal vertex the tangent from `a` to `b` passes on the wrong
    // side of.
    let wrong_side = |a: &Anchor, b: &Anchor, pa: Point2, dir: Vec2| {
        let mut worst: Option<(Anchor, f64)> = None;
        for j in a.hi + 1..b.lo {
            let (l, r) = &sides[j];
            for (p, sign) in [(l, 1.0), (r, -1.0)] {
                let v = p.vertex.expect("portal sides are vertices");
                if a.vertex == Some(v) || b.vertex == Some(v) {
                    continue;
                }
                let off = sign * dir.cross(p.center - pa);
                if off < -EPS_GEO && worst.as_ref().is_none_or(|w| radii.radius(v) - off > w.1) {
                    worst = Some((circle(v, p.side, run(v, p.side, j)), radii.radius(v) - off));
                }
            }
        }
        worst
    };

    let rounds = 4 * (circles.len() + ports.len()) + 4;
    for _ in 0..rounds {
        if let Some(k) = redundant_bend(&anchors, |a, b, pa, dir| wrong_side(a, b, pa, dir).is_none()) {
            anchors.remove(k);
            continue;
        }
        let mut hit: Option<(usize, Anchor, f64)> = None;
        for k in 0..anchors.len() - 1 {
            let (a, b) = (&anchors[k], &anchors[k + 1]);
            let (pa, pb, dir) = tangent(a, b).ok_or_else(|| pinched_at(b.vertex.or(a.vertex)))?;
            if let Some((anchor, depth)) = wrong_side(a, b, pa, dir) {
                hit = Some((k + 1, anchor, depth));
            }
            for &v in &circles {
                if a.vertex == Some(v) || b.vertex == Some(v) {
                    continue;
                }
                let c = mesh.vertex(v);
                let depth = radii.radius(v) - segment_distance(pa, pb, c);
                if depth > EPS_GEO && hit.as_ref().is_none_or(|h| depth > h.2) {
                    let bound = (a.hi..=b.lo).find_map(|j| {
                        let (l, r) = &sides[j];
                        [l, r].into_iter().find(|p| p.vertex == Some(v)).map(|p| (p.side, j))
                    });
                    let anchor = match bound {
                        Some((side, j)) => circle(v, side, run(v, side, j)),
                        None => {
                            let side = if dir.cross(c - pa) > 0.0 { Side::Left } else { Side::Right };
                            circle(v, side, (a.hi, a.hi))
                        }
                    };
                    hit = Some((k + 1, anchor, depth));
                }
            }
            if hit.is_some() {
                break;
            }
        }
        match hit {
            Some((at, anchor, _)) => anchors.insert(at, anchor),
            None => break,
        }
    }
    for w in anchors.windows(2) {
        if tangent(&w[0], &w[1]).is_none() {
            return Err(pinched_at(w[1].vertex.or(w[0].vertex)));
        }
    }
    Ok(build_path(&anchors))
}

/// An intermediate bend whose circle the tangent between its neighbours
/// already clears on the required side, without leaving the sleeve.
fn redundant_bend(anchors: &[Anchor], in_sleeve: impl Fn(&Anchor, &Anchor, Point2, Vec2) -> bool) -> Option<usize> {
    (1..anchors.len().saturating_sub(1)).find(|&k| {
        let b = &anchors[k];
        let Some((pa, pc, dir)) = tangent(&anchors[k - 1], &anchors[k + 1]) else {
            return false;
        };
        let side = dir.cross(b.center - pa);
        let correct = match b.side {
            Side::Left => side > 0.0,
            Side::Right => side < 0.0,
        };
        correct && segment_distance(pa, pc, b.center) >= b.radius && in_sleeve(&anchors[k - 1], &anchors[k + 1], pa, dir)
    })
}

fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return a.dist(p);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    (a + ab * t).dist(p)
}

/// Simple stupid funnel over point portals; returns the bend sequence from
/// start to goal.
fn pull_string(sides: &[(Anchor, Anchor)]) -> Vec<Anchor> {
    let dir = |from: &Anchor, to: &Anchor| to.center - from.center;

    let mut apex = sides[0].0;
    let (mut left, mut right) = (apex, apex);
    let (mut left_idx, mut right_idx) = (0usize, 0usize);
    let mut out = vec![apex];

    let mut i = 1;
    while i < sides.len() {
        let (nl, nr) = sides[i];

        if !nr.same(&right) {
            let d_new = dir(&apex, &nr);
            if right.same(&apex) || dir(&apex, &right).cross(d_new) >= 0.0 {
                if left.same(&apex) || nr.same(&apex) || dir(&apex, &left).cross(d_new) < 0.0 {
                    right = nr;
                    right_idx = i;
                } else {
                    apex = left;
                    out.push(apex);
                    right = apex;
                    right_idx = left_idx;
                    i = left_idx + 1;
                    continue;
                }
            }
        }

        if !nl.same(&left) {
            let d_new = dir(&apex, &nl);
            if left.same(&apex) || dir(&apex, &left).cross(d_new) <= 0.0 {
                if right.same(&apex) || nl.same(&apex) || dir(&apex, &right).cross(d_new) > 0.0 {
                    left = nl;
                    left_idx = i;
                } else {
                    apex = right;
                    out.push(apex);
                    left = apex;
                    left_idx = right_idx;
                    i = right_idx + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    let goal = sides[sides.len() - 1].0;
    if !out.last().is_some_and(|a| a.same(&goal)) {
        out.push(goal);
    }
    out
}

fn build_path(anchors: &[Anchor]) -> SmoothPath {
    let mut elements = Vec::with_capacity(2 * anchors.len());
    let mut arrival: Option<Point2> = None;
    for (k, w) in anchors.windows(2).enumerate() {
        let (pa, pb, _) = tangent(&w[0], &w[1]).expect("checked in pull_string");
        let a = &w[0];
        if k > 0 && a.radius > 0.0 {
            let from = arrival.expect("arrival set after first segment");
            let a0 = (from - a.center).angle();
            let a1 = (pa - a.center).angle();
            let ccw = a.side == Side::Left;
            let mut sweep = if ccw { (a1 - a0).rem_euclid(TAU) } else { (a0 - a1).rem_euclid(TAU) };
            if sweep > TAU - 1e-9 {
                sweep = 0.0;
            }
            if sweep > 0.0 {
                let end_angle = if ccw { a0 + sweep } else { a0 - sweep };
                elements.push(PathElement::Arc { center: a.center, radius: a.radius, start_angle: a0, end_angle, ccw });
            }
        }
        if pa.dist(pb) > 0.0 {
            elements.push(PathElement::Segment { start: pa, end: pb });
        }
        arrival = Some(pb);
    }
    SmoothPath::from_elements(elements)
}

/// Total length: segment lengths plus `radius * |sweep|` for arcs.
pub fn path_length(path: &SmoothPath) -> f64 {
    path.elements.iter().map(PathElement::length).sum()
}

/// Points along `path` at arc-length steps of at most `spacing`, including
/// both endpoints.
pub fn sample_path(path: &SmoothPath, spacing: f64) -> Vec<Point2> {
    assert!(spacing > 0.0, "spacing must be positive");
    let mut out = Vec::new();
    if let Some(p) = path.start() {
        out.push(p);
    }
    for el in &path.elements {
        let len = el.length();
        if len <= 0.0 {
            continue;
        }
        let n = (len / spacing).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|j| el.point_at(j as f64 / n as f64)));
    }
    out
}
