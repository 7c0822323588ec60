//! Planar primitives, Delaunay triangulation of point sets and the
//! face-adjacency dual graph used for channel search.

use serde::Serialize;
use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use thiserror::Error;

/// Tolerance for orientation / containment tests (squared-length units).
pub const EPS_GEO: f64 = 1e-9;
/// Two input points closer than this are considered duplicates.
pub const EPS_DUP: f64 = 1e-6;

const NONE: usize = usize::MAX;

/// A 2D vector, used both for positions (m) and velocities (m/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub type Point2 = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is
    /// counterclockwise of `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Vec2) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector, or zero for a zero-length input.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Rotated +90 degrees.
    pub fn perp_left(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotated -90 degrees.
    pub fn perp_right(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Twice the signed area of `abc`; positive for counterclockwise order.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    (a.x - c.x) * (b.y - c.y) - (a.y - c.y) * (b.x - c.x)
}

/// In-circle determinant: positive when `d` lies strictly inside the
/// circumcircle of the counterclockwise triangle `abc`.
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    incircle_with_permanent(a, b, c, d).0
}

/// In-circle determinant together with its permanent (the same sum with
/// absolute values), which bounds the floating point error.
fn incircle_with_permanent(a: Point2, b: Point2, c: Point2, d: Point2) -> (f64, f64) {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let (bc1, bc2) = (bdx * cdy, bdy * cdx);
    let (ca1, ca2) = (cdx * ady, cdy * adx);
    let (ab1, ab2) = (adx * bdy, ady * bdx);
    let det = alift * (bc1 - bc2) + blift * (ca1 - ca2) + clift * (ab1 - ab2);
    let perm = alift * (bc1.abs() + bc2.abs())
        + blift * (ca1.abs() + ca2.abs())
        + clift * (ab1.abs() + ab2.abs());
    (det, perm)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("triangulation needs at least three points, got {0}")]
    FewerThanThreePoints(usize),
    #[error("all points are collinear")]
    AllCollinear,
    #[error("points {0} and {1} are duplicates")]
    DuplicatePoints(usize, usize),
    #[error("point {0} is not finite")]
    NonFinite(usize),
    #[error("degenerate triangle")]
    DegenerateTriangle,
}

/// Center and radius of the circle through `a`, `b` and `c`.
pub fn circumcircle(a: Point2, b: Point2, c: Point2) -> Result<(Point2, f64), GeomError> {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() <= EPS_GEO * (bx.abs() + by.abs()).max(cx.abs() + cy.abs()).max(1e-300) {
        return Err(GeomError::DegenerateTriangle);
    }
    let bl = bx * bx + by * by;
    let cl = cx * cx + cy * cy;
    let ux = (cy * bl - by * cl) / d;
    let uy = (bx * cl - cx * bl) / d;
    let center = Vec2::new(a.x + ux, a.y + uy);
    Ok((center, ux.hypot(uy)))
}

/// A face of a triangulation: one of its triangles or the unbounded outer face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Face {
    Triangle(usize),
    Outer,
}

/// An undirected triangulation edge. `faces[0]` is the triangle in which the
/// edge runs `a -> b` counterclockwise; `faces[1]` is the triangle on the
/// other side, or `None` on the convex hull.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub faces: [Option<usize>; 2],
}

impl Edge {
    pub fn is_hull(&self) -> bool {
        self.faces[1].is_none()
    }

    /// The face on the other side of this edge, seen from `from`.
    pub fn other_face(&self, from: Face) -> Face {
        let left = Face::Triangle(self.faces[0].expect("edge without faces"));
        let right = self.faces[1].map_or(Face::Outer, Face::Triangle);
        if from == left {
            right
        } else {
            left
        }
    }
}

/// Delaunay triangulation of a point set with edge adjacency and hull.
#[derive(Clone, Debug, Serialize)]
pub struct TriMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    tri_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    hull: Vec<usize>,
}

impl TriMesh {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    /// Counterclockwise vertex triples.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Edge ids of triangle `t`; entry `k` joins vertices `k` and `k + 1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_points(&self, e: usize) -> (Point2, Point2) {
        let ed = &self.edges[e];
        (self.vertices[ed.a], self.vertices[ed.b])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_points(e);
        a.dist(b)
    }

    /// Convex-hull vertex indices in counterclockwise order, starting at the
    /// lowest index. Collinear boundary vertices are included.
    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangle_points(t);
        Vec2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn circumcircle(&self, t: usize) -> (Point2, f64) {
        let [a, b, c] = self.triangle_points(t);
        circumcircle(a, b, c).expect("mesh triangles are non-degenerate")
    }

    /// The edge shared by triangles `t` and `u`, if they are adjacent.
    pub fn shared_edge(&self, t: usize, u: usize) -> Option<usize> {
        self.tri_edges[t].iter().copied().find(|&e| {
            let f = self.edges[e].faces;
            f[0] == Some(u) || f[1] == Some(u)
        })
    }

    /// Whether `p` lies in the closed triangle `t` (tolerance [`EPS_GEO`]).
    pub fn contains(&self, t: usize, p: Point2) -> bool {
        let [a, b, c] = self.triangle_points(t);
        orient2d(a, b, p) >= -EPS_GEO && orient2d(b, c, p) >= -EPS_GEO && orient2d(c, a, p) >= -EPS_GEO
    }

    /// The triangle containing `p` (boundary inclusive, lowest index on ties),
    /// or [`Face::Outer`] when `p` lies outside the hull.
    pub fn locate(&self, p: Point2) -> Face {
        (0..self.triangles.len())
            .find(|&t| self.contains(t, p))
            .map_or(Face::Outer, Face::Triangle)
    }

    /// Triangles incident to vertex `v`.
    pub fn incident_triangles(&self, v: usize) -> Vec<usize> {
        (0..self.triangles.len()).filter(|&t| self.triangles[t].contains(&v)).collect()
    }
}

/// Free-function form of [`TriMesh::locate`].
pub fn locate_point(mesh: &TriMesh, p: Point2) -> Face {
    mesh.locate(p)
}

/// Delaunay triangulation by sorted incremental insertion with Lawson flips.
///
/// Points are inserted in lexicographic `(x, y)` order, so every new point
/// lies outside the current hull and is joined to the hull edges it sees.
/// Output numbering depends only on the input order.
pub fn triangulate(points: &[Point2]) -> Result<TriMesh, GeomError> {
    let n = points.len();
    if n < 3 {
        return Err(GeomError::FewerThanThreePoints(n));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(GeomError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lex_cmp(points[i], points[j]).then(i.cmp(&j)));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x > EPS_DUP {
                break;
            }
            if points[i].dist(points[j]) <= EPS_DUP {
                return Err(GeomError::DuplicatePoints(i.min(j), i.max(j)));
            }
        }
    }
    let mut b = Builder::new(points);
    b.run(&order)?;
    Ok(b.finish())
}

fn lex_cmp(a: Point2, b: Point2) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

struct Builder<'a> {
    pts: &'a [Point2],
    tris: Vec<[usize; 3]>,
    twin: Vec<usize>,
    hull_next: Vec<usize>,
    hull_prev: Vec<usize>,
    hull_edge: Vec<usize>,
    stack: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [Point2]) -> Self {
        let n = pts.len();
        Builder {
            pts,
            tris: Vec::with_capacity(2 * n),
            twin: Vec::with_capacity(6 * n),
            hull_next: vec![NONE; n],
            hull_prev: vec![NONE; n],
            hull_edge: vec![NONE; n],
            stack: Vec::new(),
        }
    }

    fn add_tri(&mut self, v: [usize; 3]) -> usize {
        self.tris.push(v);
        self.twin.extend([NONE; 3]);
        self.tris.len() - 1
    }

    fn origin(&self, h: usize) -> usize {
        self.tris[h / 3][h % 3]
    }

    fn link(&mut self, h: usize, other: usize) {
        self.twin[h] = other;
        if other != NONE {
            self.twin[other] = h;
        } else {
            let o = self.origin(h);
            self.hull_edge[o] = h;
        }
    }

    fn set_hull(&mut self, from: usize, to: usize, h: usize) {
        self.hull_next[from] = to;
        self.hull_prev[to] = from;
        self.hull_edge[from] = h;
    }

    fn visible(&self, a: usize, b: usize, p: usize) -> bool {
        orient2d(self.pts[a], self.pts[b], self.pts[p]) < 0.0
    }

    fn run(&mut self, order: &[usize]) -> Result<(), GeomError> {
        let (p0, p1) = (self.pts[order[0]], self.pts[order[1]]);
        let k = (2..order.len())
            .find(|&k| orient2d(p0, p1, self.pts[order[k]]) != 0.0)
            .ok_or(GeomError::AllCollinear)?;
        let chain = &order[..k];
        let apex = order[k];
        let ccw = orient2d(p0, p1, self.pts[apex]) > 0.0;
        for w in chain.windows(2) {
            let t = if ccw {
                self.add_tri([w[0], w[1], apex])
            } else {
                self.add_tri([w[1], w[0], apex])
            };
            if t > 0 {
                // shared edge apex <-> w[0] with the previous fan triangle
                if ccw {
                    self.link(3 * (t - 1) + 1, 3 * t + 2);
                } else {
                    self.link(3 * (t - 1) + 2, 3 * t + 1);
                }
            }
        }
        let last = chain.len() - 2;
        if ccw {
            for (i, w) in chain.windows(2).enumerate() {
                self.set_hull(w[0], w[1], 3 * i);
            }
            self.set_hull(chain[k - 1], apex, 3 * last + 1);
            self.set_hull(apex, chain[0], 2);
        } else {
            for (i, w) in chain.windows(2).enumerate() {
                self.set_hull(w[1], w[0], 3 * i);
            }
            self.set_hull(chain[0], apex, 1);
            self.set_hull(apex, chain[k - 1], 3 * last + 2);
        }

        let mut newest = apex;
        for &p in &order[k + 1..] {
            self.insert(p, newest);
            newest = p;
        }
        Ok(())
    }

    fn find_visible(&self, p: usize, hint: usize) -> usize {
        if self.visible(hint, self.hull_next[hint], p) {
            return hint;
        }
        let prev = self.hull_prev[hint];
        if self.visible(prev, hint, p) {
            return prev;
        }
        let mut v = self.hull_next[hint];
        while v != hint {
            if self.visible(v, self.hull_next[v], p) {
                return v;
            }
            v = self.hull_next[v];
        }
        // Unreachable for points outside a hull with positive area; fall back
        // to the edge with the most negative orientation.
        let mut best = hint;
        let mut best_o = f64::INFINITY;
        let mut v = hint;
        loop {
            let o = orient2d(self.pts[v], self.pts[self.hull_next[v]], self.pts[p]);
            if o < best_o {
                best_o = o;
                best = v;
            }
            v = self.hull_next[v];
            if v == hint {
                break;
            }
        }
        best
    }

    fn insert(&mut self, p: usize, hint: usize) {
        let e = self.find_visible(p, hint);
        let mut s = e;
        while self.hull_prev[s] != e && self.visible(self.hull_prev[s], s, p) {
            s = self.hull_prev[s];
        }
        let mut t = self.hull_next[e];
        while t != s && self.visible(t, self.hull_next[t], p) {
            t = self.hull_next[t];
        }

        let mut v = s;
        let mut prev_tri = NONE;
        let mut first_tri = NONE;
        let mut new_tris = Vec::new();
        while v != t {
            let w = self.hull_next[v];
            let he = self.hull_edge[v];
            let nt = self.add_tri([w, v, p]);
            self.link(3 * nt, he);
            if prev_tri != NONE {
                self.link(3 * prev_tri + 2, 3 * nt + 1);
            }
            if first_tri == NONE {
                first_tri = nt;
            }
            prev_tri = nt;
            new_tris.push(nt);
            v = w;
        }
        let mut v = self.hull_next[s];
        while v != t {
            let nx = self.hull_next[v];
            self.hull_next[v] = NONE;
            self.hull_prev[v] = NONE;
            self.hull_edge[v] = NONE;
            v = nx;
        }
        self.set_hull(s, p, 3 * first_tri + 1);
        self.set_hull(p, t, 3 * prev_tri + 2);

        self.stack.clear();
        self.stack.extend(new_tris.iter().map(|&nt| 3 * nt));
        while let Some(h) = self.stack.pop() {
            self.legalize(h);
        }
    }

    /// Flips half-edge `h` if the vertex across it lies inside the
    /// circumcircle of `h`'s triangle, queueing the two edges that become
    /// opposite the same apex.
    fn legalize(&mut self, h: usize) {
        let h2 = self.twin[h];
        if h2 == NONE {
            return;
        }
        let (t1, i) = (h / 3, h % 3);
        let (t2, j) = (h2 / 3, h2 % 3);
        let tri1 = self.tris[t1];
        let tri2 = self.tris[t2];
        let (u, v, w1) = (tri1[i], tri1[(i + 1) % 3], tri1[(i + 2) % 3]);
        let w2 = tri2[(j + 2) % 3];
        let (det, perm) = incircle_with_permanent(self.pts[u], self.pts[v], self.pts[w1], self.pts[w2]);
        if det <= 1e-12 * perm {
            return;
        }
        let d = self.twin[3 * t1 + (i + 2) % 3];
        let c = self.twin[3 * t1 + (i + 1) % 3];
        let a = self.twin[3 * t2 + (j + 1) % 3];
        let b = self.twin[3 * t2 + (j + 2) % 3];
        self.tris[t1] = [w1, u, w2];
        self.tris[t2] = [w1, w2, v];
        self.link(3 * t1, d);
        self.link(3 * t1 + 1, a);
        self.link(3 * t1 + 2, 3 * t2);
        self.link(3 * t2 + 1, b);
        self.link(3 * t2 + 2, c);
        self.stack.push(3 * t1 + 1);
        self.stack.push(3 * t2 + 1);
    }

    fn finish(self) -> TriMesh {
        let nt = self.tris.len();
        let mut tri_edges = vec![[NONE; 3]; nt];
        let mut edges = Vec::with_capacity(3 * nt / 2 + 3);
        for t in 0..nt {
            for k in 0..3 {
                let h = 3 * t + k;
                let tw = self.twin[h];
                if tw == NONE || h < tw {
                    let id = edges.len();
                    edges.push(Edge {
                        a: self.tris[t][k],
                        b: self.tris[t][(k + 1) % 3],
                        faces: [Some(t), (tw != NONE).then_some(tw / 3)],
                    });
                    tri_edges[t][k] = id;
                    if tw != NONE {
                        tri_edges[tw / 3][tw % 3] = id;
                    }
                }
            }
        }
        let start = (0..self.pts.len())
            .find(|&v| self.hull_next[v] != NONE)
            .expect("hull is non-empty");
        let mut hull = vec![start];
        let mut v = self.hull_next[start];
        while v != start {
            hull.push(v);
            v = self.hull_next[v];
        }
        TriMesh {
            vertices: self.pts.to_vec(),
            triangles: self.tris,
            tri_edges,
            edges,
            hull,
        }
    }
}

/// Face-adjacency dual of a [`TriMesh`]: one node per triangle plus the outer
/// node, one dual edge per triangulation edge. Dual edge ids equal the ids of
/// the triangulation edges they cross (the gates).
#[derive(Clone, Debug)]
pub struct DualGraph {
    triangle_count: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
    endpoints: Vec<(usize, usize)>,
}

impl DualGraph {
    pub fn new(mesh: &TriMesh) -> Self {
        let nt = mesh.triangles().len();
        let mut adjacency = vec![Vec::new(); nt + 1];
        let mut endpoints = Vec::with_capacity(mesh.edges().len());
        for (e, ed) in mesh.edges().iter().enumerate() {
            let a = ed.faces[0].expect("edge has a left face");
            let b = ed.faces[1].unwrap_or(nt);
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
            endpoints.push((a, b));
        }
        DualGraph { triangle_count: nt, adjacency, endpoints }
    }

    /// Node index of the outer face.
    pub fn outer(&self) -> usize {
        self.triangle_count
    }

    pub fn node_count(&self) -> usize {
        self.triangle_count + 1
    }

    pub fn edge_count(&self) -> usize {
        self.endpoints.len()
    }

    pub fn node_of(&self, face: Face) -> usize {
        match face {
            Face::Triangle(t) => t,
            Face::Outer => self.triangle_count,
        }
    }

    pub fn face_of(&self, node: usize) -> Face {
        if node == self.triangle_count {
            Face::Outer
        } else {
            Face::Triangle(node)
        }
    }

    /// `(neighbor node, gate edge id)` pairs.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// The two dual nodes joined by dual edge `e`.
    pub fn edge_nodes(&self, e: usize) -> (usize, usize) {
        self.endpoints[e]
    }

    /// Triangulation edge crossed by dual edge `e`.
    pub fn gate(&self, e: usize) -> usize {
        e
    }
}

pub fn dual_graph(mesh: &TriMesh) -> DualGraph {
    DualGraph::new(mesh)
}
