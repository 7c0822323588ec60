#![allow(dead_code)]

use dynchan::geom::{dual_graph, orient2d, triangulate, DualGraph, Point2, TriMesh, Vec2};
use dynchan::planner::Channel;
use rand::Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, w: f64, h: f64) -> Vec<Point2> {
    (0..n).map(|_| v(rng.gen_range(0.0..w), rng.gen_range(0.0..h))).collect()
}

pub fn random_in_triangle<R: Rng>(rng: &mut R, tri: [Point2; 3]) -> Point2 {
    let (mut a, mut b): (f64, f64) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
    if a + b > 0.95 {
        a = 0.95 - a * 0.9;
        b = 0.95 - b * 0.9;
        if a + b > 0.95 {
            a *= 0.5;
            b *= 0.5;
        }
    }
    let [p, q, r] = tri;
    p + (q - p) * a + (r - p) * b
}

/// Random loop-free dual walk of up to `max_len` triangles with a start and
/// goal inside its first and last triangle.
pub fn random_channel<R: Rng>(rng: &mut R, mesh: &TriMesh, max_len: usize) -> (Channel, Point2, Point2) {
    let dual = dual_graph(mesh);
    let nt = mesh.triangles().len();
    let mut faces = vec![rng.gen_range(0..nt)];
    let mut gates = Vec::new();
    let target = rng.gen_range(1..=max_len);
    while faces.len() < target {
        let cur = *faces.last().unwrap();
        let opts: Vec<(usize, usize)> = dual
            .neighbors(cur)
            .iter()
            .copied()
            .filter(|&(n, _)| n != dual.outer() && !faces.contains(&n))
            .collect();
        if opts.is_empty() {
            break;
        }
        let (n, e) = opts[rng.gen_range(0..opts.len())];
        faces.push(n);
        gates.push(e);
    }
    let s = random_in_triangle(rng, mesh.triangle_points(faces[0]));
    let g = random_in_triangle(rng, mesh.triangle_points(*faces.last().unwrap()));
    (Channel::new(faces, gates), s, g)
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

fn dijkstra(n: usize, src: usize, dst: usize, adj: &[Vec<(usize, f64)>]) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, src)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == dst {
            return Some(d);
        }
        for &(w, c) in &adj[u] {
            if d + c < dist[w] {
                dist[w] = d + c;
                heap.push(Item(d + c, w));
            }
        }
    }
    None
}

/// Parameter along `p`-`q` where it meets the closed segment `a`-`b`.
fn crossing_param(p: Point2, q: Point2, a: Point2, b: Point2) -> Option<f64> {
    let r = q - p;
    let s = b - a;
    let den = r.cross(s);
    if den.abs() < 1e-14 {
        return None;
    }
    let t = (a - p).cross(s) / den;
    let u = (a - p).cross(r) / den;
    let eps = 1e-9;
    ((-eps..=1.0 + eps).contains(&t) && (-eps..=1.0 + eps).contains(&u)).then_some(t)
}

/// Shortest path from `s` to `g` inside the channel polygon, by Dijkstra on
/// the visibility graph of vertex occurrences along the channel.
pub fn channel_shortest_oracle(mesh: &TriMesh, ch: &Channel, s: Point2, g: Point2) -> f64 {
    let m = ch.faces.len();
    // (point, first face index, last face index)
    let mut nodes: Vec<(Point2, usize, usize)> = vec![(s, 0, 0), (g, m - 1, m - 1)];
    for vtx in 0..mesh.vertices().len() {
        let mut k = 0;
        while k < m {
            if mesh.triangle(ch.faces[k]).contains(&vtx) {
                let a = k;
                while k + 1 < m && mesh.triangle(ch.faces[k + 1]).contains(&vtx) {
                    k += 1;
                }
                nodes.push((mesh.vertex(vtx), a, k));
            }
            k += 1;
        }
    }
    let n = nodes.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (p, a1, b1) = nodes[i];
            let (q, a2, b2) = nodes[j];
            let ok = if a2 <= b1 && a1 <= b2 {
                true
            } else if b1 < a2 {
                let mut last = -1.0;
                (b1..a2).all(|k| {
                    let (ga, gb) = mesh.edge_points(ch.gates[k]);
                    match crossing_param(p, q, ga, gb) {
                        Some(t) if t >= last - 1e-9 => {
                            last = t;
                            true
                        }
                        _ => false,
                    }
                })
            } else {
                false
            };
            if ok {
                adj[i].push((j, p.dist(q)));
            }
        }
    }
    dijkstra(n, 0, 1, &adj).expect("channel is connected")
}

/// Whether `p` lies in the closed union of the channel's triangles.
pub fn in_channel(mesh: &TriMesh, ch: &Channel, p: Point2, tol: f64) -> bool {
    ch.faces.iter().any(|&f| {
        let [a, b, c] = mesh.triangle_points(f);
        let e = |x: Point2, y: Point2| orient2d(x, y, p) / x.dist(y) >= -tol;
        e(a, b) && e(b, c) && e(c, a)
    })
}

fn properly_crosses(p: Point2, q: Point2, a: Point2, b: Point2) -> bool {
    let eps = 1e-12;
    let d1 = orient2d(a, b, p);
    let d2 = orient2d(a, b, q);
    let d3 = orient2d(p, q, a);
    let d4 = orient2d(p, q, b);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

/// Whether direction `d` lies strictly inside the sector swept from `from`
/// to `to`, counterclockwise when `ccw`, clockwise otherwise.
fn in_sector(from: Vec2, to: Vec2, d: Vec2, ccw: bool) -> bool {
    let ang = |x: Vec2| {
        let a = if ccw { from.cross(x).atan2(from.dot(x)) } else { x.cross(from).atan2(x.dot(from)) };
        a.rem_euclid(std::f64::consts::TAU)
    };
    let (at, ad) = (ang(to), ang(d));
    ad > 1e-12 && ad < at - 1e-12
}

/// Shortest path from `s` to `g` in the plane without crossing any mesh
/// edge with length below `d_th` or leaving the hull. Paths may bend at
/// mesh vertices as long as no blocking edge sits on the outside of the
/// bend. Returns `None` when the blocking edges separate `s` from `g`.
pub fn global_shortest_oracle(mesh: &TriMesh, d_th: f64, s: Point2, g: Point2) -> Option<f64> {
    let walls: Vec<(usize, usize)> = mesh
        .edges()
        .iter()
        .enumerate()
        .filter(|(e, ed)| ed.is_hull() || mesh.edge_length(*e) < d_th)
        .map(|(_, ed)| (ed.a, ed.b))
        .collect();
    let nv = mesh.vertices().len();
    let pts: Vec<Point2> = mesh.vertices().iter().copied().chain([s, g]).collect();
    let (si, gi) = (nv, nv + 1);
    let n = pts.len();
    let visible = |i: usize, j: usize| {
        walls.iter().all(|&(a, b)| !properly_crosses(pts[i], pts[j], mesh.vertex(a), mesh.vertex(b)))
    };
    let vis: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i != j && visible(i, j)).collect()).collect();
    let wall_dirs = |vtx: usize| -> Vec<Vec2> {
        walls
            .iter()
            .filter_map(|&(a, b)| {
                if a == vtx {
                    Some(mesh.vertex(b) - mesh.vertex(a))
                } else if b == vtx {
                    Some(mesh.vertex(a) - mesh.vertex(b))
                } else {
                    None
                }
            })
            .collect()
    };
    let dirs: Vec<Vec<Vec2>> = (0..nv).map(wall_dirs).collect();

    // states are directed visibility edges (i -> j), indexed i * n + j
    let idx = |i: usize, j: usize| i * n + j;
    let total = n * n + 1;
    let sink = n * n;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
    let src = idx(si, si);
    for j in 0..n {
        if vis[si][j] {
            adj[src].push((idx(si, j), pts[si].dist(pts[j])));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !vis[i][j] {
                continue;
            }
            if j == gi {
                adj[idx(i, j)].push((sink, 0.0));
                continue;
            }
            if j >= nv {
                continue;
            }
            let back = pts[i] - pts[j];
            for k in 0..n {
                if k == j || !vis[j][k] {
                    continue;
                }
                let fwd = pts[k] - pts[j];
                let turn = (pts[j] - pts[i]).cross(fwd);
                let ccw = turn > 0.0;
                if dirs[j].iter().any(|&d| in_sector(back, fwd, d, ccw)) {
                    continue;
                }
                adj[idx(i, j)].push((idx(j, k), pts[j].dist(pts[k])));
            }
        }
    }
    dijkstra(total, src, sink, &adj)
}

pub fn mesh_of(points: &[Point2]) -> Option<TriMesh> {
    triangulate(points).ok()
}

pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    (a + ab * t).dist(p)
}

/// Polyline realising a dual walk from `s` to `t`: each gate is crossed near
/// its midpoint and stretches in the outer face loop counterclockwise around
/// a circle enclosing the mesh.
pub fn representative(mesh: &TriMesh, nodes: &[usize], gates: &[usize], outer: usize, s: Point2, t: Point2) -> Vec<Point2> {
    let (c, r) = enclosing_circle(mesh);
    let mut out = vec![s];
    for (k, &e) in gates.iter().enumerate() {
        let (u, w) = (nodes[k], nodes[k + 1]);
        let (a, b) = mesh.edge_points(e);
        let m = a.lerp(b, 0.5);
        let mut n = (b - a).perp_left().normalized();
        let toward_w = if w == outer { m - mesh.centroid(u) } else { mesh.centroid(w) - m };
        if n.dot(toward_w) < 0.0 {
            n = n * -1.0;
        }
        let delta = 1e-3 * a.dist(b);
        let (p_in, p_out) = (m - n * delta, m + n * delta);
        if u == outer && k > 0 {
            let last = *out.last().unwrap();
            out.extend(outer_route(last, p_in, c, r));
        }
        out.push(p_in);
        out.push(p_out);
    }
    out.push(t);
    out
}

fn enclosing_circle(mesh: &TriMesh) -> (Point2, f64) {
    let n = mesh.vertices().len() as f64;
    let c = mesh.vertices().iter().fold(v(0.0, 0.0), |acc, &p| acc + p) * (1.0 / n);
    let r = mesh.vertices().iter().map(|p| p.dist(c)).fold(0.0, f64::max);
    (c, 3.0 * r + 1.0)
}

/// Points leading from just outside one hull edge to just outside another,
/// staying outside the hull: straight out to the circle, counterclockwise
/// along it, and straight back in.
fn outer_route(from: Point2, to: Point2, c: Point2, r: f64) -> Vec<Point2> {
    let out_to_circle = |p: Point2, dir: Vec2| {
        // p + dir * x on the circle, x > 0
        let d = dir.normalized();
        let f = p - c;
        let b = f.dot(d);
        let x = -b + (b * b - f.norm_sq() + r * r).sqrt();
        p + d * x
    };
    let hull_normal = |p: Point2| (p - c).normalized();
    let x1 = out_to_circle(from, hull_normal(from));
    let x2 = out_to_circle(to, hull_normal(to));
    let (a1, a2) = ((x1 - c).angle(), (x2 - c).angle());
    let sweep = (a2 - a1).rem_euclid(std::f64::consts::TAU);
    let steps = (sweep / (std::f64::consts::TAU / 128.0)).ceil() as usize;
    let mut pts = vec![x1];
    for j in 1..steps {
        let a = a1 + sweep * j as f64 / steps as f64;
        pts.push(c + v(a.cos(), a.sin()) * r);
    }
    pts.push(x2);
    pts
}

/// Reduced free-group word of a polyline in the plane punctured at `punctures`,
/// read off its crossings with the upward vertical ray of every puncture.
pub fn ray_word(polyline: &[Point2], punctures: &[Point2]) -> Vec<(usize, i8)> {
    let mut word: Vec<(usize, i8)> = Vec::new();
    for w in polyline.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mut hits: Vec<(f64, usize, i8)> = punctures
            .iter()
            .enumerate()
            .filter(|(_, c)| (p.x < c.x) != (q.x < c.x))
            .filter_map(|(i, c)| {
                let t = (c.x - p.x) / (q.x - p.x);
                let y = p.y + t * (q.y - p.y);
                (y > c.y).then_some((t, i, if q.x > p.x { 1 } else { -1 }))
            })
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, i, sgn) in hits {
            if word.last() == Some(&(i, -sgn)) {
                word.pop();
            } else {
                word.push((i, sgn));
            }
        }
    }
    word
}

/// Winding number of the closed polyline `ring` around `p`.
pub fn winding(ring: &[Point2], p: Point2) -> i32 {
    let mut w = 0;
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        if a.y <= p.y {
            if b.y > p.y && orient2d(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && orient2d(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Closed polyline for a loop-free dual cycle that starts and ends at the
/// outer node.
pub fn cycle_ring(mesh: &TriMesh, nodes: &[usize], gates: &[usize], outer: usize) -> Vec<Point2> {
    let (c, r) = enclosing_circle(mesh);
    let dummy = mesh.vertex(0);
    let mut path = representative(mesh, nodes, gates, outer, dummy, dummy);
    path.remove(0);
    path.pop();
    let (first, last) = (path[0], *path.last().unwrap());
    path.extend(outer_route(last, first, c, r));
    path
}

/// Every loop-free dual walk from node `from` to node `to`, up to `cap`.
pub fn loop_free_walks(dual: &DualGraph, from: usize, to: usize, cap: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    fn go(
        dual: &DualGraph,
        to: usize,
        nodes: &mut Vec<usize>,
        gates: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, Vec<usize>)>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        let cur = *nodes.last().unwrap();
        if cur == to {
            out.push((nodes.clone(), gates.clone()));
            return;
        }
        for &(n, e) in dual.neighbors(cur) {
            if !nodes.contains(&n) {
                nodes.push(n);
                gates.push(e);
                go(dual, to, nodes, gates, out, cap);
                nodes.pop();
                gates.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(dual, to, &mut vec![from], &mut Vec::new(), &mut out, cap);
    out
}

/// Every loop-free dual cycle through the outer node with at least two
/// gates, up to `cap`.
pub fn outer_cycles(dual: &DualGraph, cap: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let outer = dual.outer();
    let mut out = Vec::new();
    for &(first, e0) in dual.neighbors(outer) {
        for &(last, e1) in dual.neighbors(outer) {
            if e1 == e0 || out.len() >= cap {
                continue;
            }
            for (mut nodes, mut gates) in loop_free_walks(dual, first, last, cap - out.len()) {
                if nodes.contains(&outer) {
                    continue;
                }
                nodes.insert(0, outer);
                gates.insert(0, e0);
                nodes.push(outer);
                gates.push(e1);
                out.push((nodes, gates));
            }
        }
    }
    out
}

/// Gates crossed by `polyline`, by intersecting each segment with every
/// mesh edge.
pub fn brute_crossings(mesh: &TriMesh, polyline: &[Point2]) -> Vec<usize> {
    let mut out = Vec::new();
    for w in polyline.windows(2) {
        let mut hits: Vec<(f64, usize)> = (0..mesh.edges().len())
            .filter_map(|e| {
                let (a, b) = mesh.edge_points(e);
                properly_crosses(w[0], w[1], a, b).then(|| (crossing_param(w[0], w[1], a, b).unwrap(), e))
            })
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(hits.into_iter().map(|h| h.1));
    }
    out
}

/// Normal form of `ray_word` in the sphere punctured at `punctures`, where a
/// loop around every puncture is contractible. The last generator met by a
/// large counterclockwise circle is eliminated with that relation.
pub fn sphere_word(polyline: &[Point2], punctures: &[Point2]) -> Vec<(usize, i8)> {
    let c = punctures.iter().fold(v(0.0, 0.0), |acc, &p| acc + p) * (1.0 / punctures.len() as f64);
    let r = 3.0 * punctures.iter().map(|p| p.dist(c)).fold(0.0, f64::max) + 1.0;
    let circle: Vec<Point2> = (0..=256)
        .map(|k| {
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 256.0;
            c + v(a.cos(), a.sin()) * r
        })
        .collect();
    let mut rel = ray_word(&circle, punctures);
    let (g, eps) = rel.pop().expect("at least one puncture");
    // g^eps = inverse of the rest
    let inv: Vec<(usize, i8)> = rel.iter().rev().map(|&(i, s)| (i, -s)).collect();
    let mut out: Vec<(usize, i8)> = Vec::new();
    let push = |l: (usize, i8), out: &mut Vec<(usize, i8)>| {
        if out.last() == Some(&(l.0, -l.1)) {
            out.pop();
        } else {
            out.push(l);
        }
    };
    for (i, s) in ray_word(polyline, punctures) {
        if i != g {
            push((i, s), &mut out);
        } else if s == eps {
            for &l in &inv {
                push(l, &mut out);
            }
        } else {
            for &l in &rel {
                push(l, &mut out);
            }
        }
    }
    out
}
