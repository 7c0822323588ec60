//! Paths as walks on the dual graph.
//!
//! A path through the triangulated plane is recorded as the sequence of
//! triangulation edges it crosses. Cancelling back-and-forth crossings of the
//! same edge gives a reduced walk, and two paths with shared endpoints are
//! homotopic exactly when their reduced walks agree.

use crate::geom::{orient2d, DualGraph, Face, Point2, TriMesh, EPS_GEO};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotopyError {
    #[error("path passes through or ends on the mesh skeleton near ({}, {})", .at.x, .at.y)]
    DegenerateCrossing { at: Point2 },
    #[error("walk is not a loop-free cycle through the outer face")]
    NotACycle,
    #[error("path has no points")]
    EmptyPath,
}

/// Alternating dual nodes and the gates crossed between them:
/// `nodes.len() == gates.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Walk {
    pub nodes: Vec<usize>,
    pub gates: Vec<usize>,
}

impl Walk {
    pub fn single(node: usize) -> Self {
        Walk { nodes: vec![node], gates: Vec::new() }
    }

    pub fn push(&mut self, gate: usize, node: usize) {
        self.gates.push(gate);
        self.nodes.push(node);
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        *self.nodes.last().expect("walk has a node")
    }
}

/// Vertex bipartition induced by a closed walk through the outer face.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cut {
    /// `true` for vertices on the `+` side: the side on the left when the
    /// walk crosses its first gate.
    pub positive: Vec<bool>,
    /// Edges with endpoints on different sides, sorted.
    pub cut_set: Vec<usize>,
    /// The walk crossed nothing; every vertex is on the `-` side.
    pub trivial: bool,
}

/// First proper crossing of `p`-`q` with a candidate edge after parameter
/// `after`, skipping `skip`.
fn next_crossing(
    mesh: &TriMesh,
    candidates: impl Iterator<Item = usize>,
    skip: Option<usize>,
    p: Point2,
    q: Point2,
    after: f64,
) -> Result<Option<(usize, f64)>, HomotopyError> {
    let len = p.dist(q);
    let mut best: Option<(usize, f64)> = None;
    for e in candidates {
        if Some(e) == skip {
            continue;
        }
        let (a, b) = mesh.edge_points(e);
        let ab = a.dist(b);
        let o1 = orient2d(a, b, p) / ab;
        let o2 = orient2d(a, b, q) / ab;
        let o3 = orient2d(p, q, a) / len;
        let o4 = orient2d(p, q, b) / len;
        let straddles = (o3 > 0.0) != (o4 > 0.0);
        if o2.abs() < EPS_GEO && (o3.abs() < EPS_GEO || o4.abs() < EPS_GEO || straddles) {
            // segment ends on this edge
            return Err(HomotopyError::DegenerateCrossing { at: q });
        }
        if (o1 > 0.0) == (o2 > 0.0) || o1.abs() < EPS_GEO && o2.abs() < EPS_GEO {
            continue;
        }
        let t = o1 / (o1 - o2);
        if t <= after {
            continue;
        }
        if o3.abs() < EPS_GEO || o4.abs() < EPS_GEO {
            return Err(HomotopyError::DegenerateCrossing { at: p.lerp(q, t) });
        }
        if straddles && best.is_none_or(|(_, bt)| t < bt) {
            best = Some((e, t));
        }
    }
    Ok(best)
}

/// Walk traced by a polyline: the face holding its first point, then every
/// triangulation edge it crosses in order.
pub fn path_to_walk(polyline: &[Point2], mesh: &TriMesh, dual: &DualGraph) -> Result<Walk, HomotopyError> {
    let first = *polyline.first().ok_or(HomotopyError::EmptyPath)?;
    let mut face = mesh.locate(first);
    if let Face::Triangle(t) = face {
        for e in mesh.triangle_edges(t) {
            let (a, b) = mesh.edge_points(e);
            if orient2d(a, b, first).abs() / a.dist(b) < EPS_GEO {
                return Err(HomotopyError::DegenerateCrossing { at: first });
            }
        }
    }
    let hull_edges: Vec<usize> = (0..mesh.edges().len()).filter(|&e| mesh.edge(e).is_hull()).collect();
    let mut walk = Walk::single(dual.node_of(face));
    for w in polyline.windows(2) {
        let (p, q) = (w[0], w[1]);
        if p.dist(q) == 0.0 {
            continue;
        }
        let (mut t, mut entered) = (0.0, None);
        loop {
            let hit = match face {
                Face::Triangle(f) => next_crossing(mesh, mesh.triangle_edges(f).into_iter(), entered, p, q, t)?,
                Face::Outer => next_crossing(mesh, hull_edges.iter().copied(), entered, p, q, t)?,
            };
            let Some((e, te)) = hit else { break };
            face = mesh.edge(e).other_face(face);
            walk.push(e, dual.node_of(face));
            t = te;
            entered = Some(e);
        }
    }
    Ok(walk)
}

/// Cancels consecutive crossings of the same gate until none remain.
pub fn reduce_walk(walk: &Walk) -> Walk {
    let mut out = Walk::single(walk.start());
    for (&g, &n) in walk.gates.iter().zip(&walk.nodes[1..]) {
        if out.gates.last() == Some(&g) {
            out.gates.pop();
            out.nodes.pop();
        } else {
            out.push(g, n);
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Vertex partition separated by a loop-free closed walk that starts and
/// ends at the outer node; its cut-set is exactly the set of gates crossed.
pub fn walk_to_cut(walk: &Walk, mesh: &TriMesh, dual: &DualGraph) -> Result<Cut, HomotopyError> {
    let outer = dual.outer();
    if walk.start() != outer || walk.end() != outer || reduce_walk(walk) != *walk {
        return Err(HomotopyError::NotACycle);
    }
    let inner = &walk.nodes[1..walk.nodes.len().max(2) - 1];
    let mut seen = vec![false; dual.node_count()];
    for &n in inner {
        if n == outer || std::mem::replace(&mut seen[n], true) {
            return Err(HomotopyError::NotACycle);
        }
    }
    let nv = mesh.vertices().len();
    let Some(&first) = walk.gates.first() else {
        return Ok(Cut { positive: vec![false; nv], cut_set: Vec::new(), trivial: true });
    };

    let mut crossed = vec![false; mesh.edges().len()];
    for &g in &walk.gates {
        crossed[g] = true;
    }
    let mut parent: Vec<usize> = (0..nv).collect();
    for (e, ed) in mesh.edges().iter().enumerate() {
        if !crossed[e] {
            let (ra, rb) = (find(&mut parent, ed.a), find(&mut parent, ed.b));
            parent[ra] = rb;
        }
    }
    let ed = mesh.edge(first);
    let into_left_face = ed.faces[0].map(|f| dual.node_of(Face::Triangle(f))) == Some(walk.nodes[1]);
    let left_end = if into_left_face { ed.a } else { ed.b };
    let (pos_root, other_root) = (find(&mut parent, left_end), find(&mut parent, ed.a ^ ed.b ^ left_end));
    if pos_root == other_root {
        return Err(HomotopyError::NotACycle);
    }
    let mut positive = vec![false; nv];
    for (v, flag) in positive.iter_mut().enumerate() {
        let r = find(&mut parent, v);
        if r != pos_root && r != other_root {
            return Err(HomotopyError::NotACycle);
        }
        *flag = r == pos_root;
    }
    let mut cut_set: Vec<usize> =
        mesh.edges().iter().enumerate().filter(|(_, ed)| positive[ed.a] != positive[ed.b]).map(|(e, _)| e).collect();
    cut_set.sort_unstable();
    Ok(Cut { positive, cut_set, trivial: false })
}

/// Whether two polylines with shared endpoints are homotopic in the plane
/// punctured at the mesh vertices.
pub fn homotopic(p1: &[Point2], p2: &[Point2], mesh: &TriMesh, dual: &DualGraph) -> Result<bool, HomotopyError> {
    let w1 = reduce_walk(&path_to_walk(p1, mesh, dual)?);
    let w2 = reduce_walk(&path_to_walk(p2, mesh, dual)?);
    Ok(w1 == w2)
}
