//! Browser bindings. Every entry point takes a scene as JSON and returns JSON:
//!
//! ```json
//! { "pedestrians": [{ "id": 0, "x": 1.0, "y": 2.0, "vx": 0.5, "vy": 0.0 }],
//!   "start": [0.0, 0.0], "goal": [8.0, 3.0] }
//! ```
//!
//! Virtual corners are added around the scene before triangulating, so
//! vertex indices in the output refer to the augmented crowd.

use dynchan::crowd::{feasible_intervals, gate_distance, CrowdSnapshot, Pedestrian};
use dynchan::funnel::sample_path;
use dynchan::geom::{triangulate, Vec2};
use dynchan::planner::{plan, with_virtual_corners, PlanKind, PlannerConfig};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const CORNER_MARGIN: f64 = 1.0;

#[derive(Deserialize)]
struct PedIn {
    id: i64,
    x: f64,
    y: f64,
    #[serde(default)]
    vx: f64,
    #[serde(default)]
    vy: f64,
}

#[derive(Deserialize)]
struct SceneIn {
    pedestrians: Vec<PedIn>,
    start: [f64; 2],
    goal: [f64; 2],
}

struct Scene {
    crowd: CrowdSnapshot,
    start: Vec2,
    goal: Vec2,
}

fn scene(text: &str) -> Result<Scene, String> {
    let s: SceneIn = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if let Some(p) = s.pedestrians.iter().find(|p| p.id < 0) {
        return Err(format!("pedestrian id {} is negative", p.id));
    }
    let peds = s.pedestrians.iter().map(|p| Pedestrian::new(p.id, Vec2::new(p.x, p.y), Vec2::new(p.vx, p.vy))).collect();
    let (start, goal) = (Vec2::new(s.start[0], s.start[1]), Vec2::new(s.goal[0], s.goal[1]));
    let crowd = with_virtual_corners(&CrowdSnapshot::new(0.0, peds), &[start, goal], CORNER_MARGIN);
    Ok(Scene { crowd, start, goal })
}

/// Delaunay mesh of the scene. Each edge reports whether its gate is
/// passable right now.
pub fn triangulate_scene(text: &str) -> Result<String, String> {
    let s = scene(text)?;
    let mesh = triangulate(&s.crowd.positions()).map_err(|e| e.to_string())?;
    let cfg = PlannerConfig::default();
    let ped = &s.crowd.pedestrians;
    let doc = json!({
        "vertices": ped.iter().map(|p| json!({ "id": p.id, "x": p.position.x, "y": p.position.y })).collect::<Vec<_>>(),
        "triangles": mesh.triangles(),
        "edges": mesh.edges().iter().map(|e| json!({
            "a": e.a,
            "b": e.b,
            "open": feasible_intervals(&ped[e.a], &ped[e.b], cfg.d_thresh(), cfg.horizon).contains(0.0),
        })).collect::<Vec<_>>(),
    });
    Ok(doc.to_string())
}

/// One planning cycle from `start` to `goal`.
pub fn plan_scene(text: &str) -> Result<String, String> {
    let s = scene(text)?;
    let cfg = PlannerConfig::default();
    let p = plan(&s.crowd, s.start, s.goal, &cfg);
    let mut gates = Vec::new();
    if let (Some(ch), Ok(mesh)) = (&p.channel, triangulate(&s.crowd.positions())) {
        for (k, &g) in ch.gates.iter().enumerate() {
            let e = mesh.edge(g);
            gates.push(json!({ "a": e.a, "b": e.b, "eta": ch.etas.get(k) }));
        }
    }
    let kind = match p.kind {
        PlanKind::Channel => "channel",
        PlanKind::LocalClearance => "local-clearance",
        PlanKind::Straight => "straight",
    };
    let samples: Vec<[f64; 2]> = sample_path(&p.path, 0.05).iter().map(|q| [q.x, q.y]).collect();
    let doc = json!({
        "kind": kind,
        "length": p.path.length,
        "samples": samples,
        "faces": p.channel.as_ref().map(|c| c.faces.clone()).unwrap_or_default(),
        "gates": gates,
    });
    Ok(doc.to_string())
}

/// Feasible crossing intervals of the gate between vertices `a` and `b`,
/// plus the gate width sampled over the planning horizon.
pub fn gate_scene(text: &str, a: usize, b: usize) -> Result<String, String> {
    let s = scene(text)?;
    let ped = &s.crowd.pedestrians;
    let (pa, pb) = match (ped.get(a), ped.get(b)) {
        (Some(pa), Some(pb)) if a != b => (pa, pb),
        _ => return Err(format!("no gate between vertices {a} and {b}")),
    };
    let cfg = PlannerConfig::default();
    let iv = feasible_intervals(pa, pb, cfg.d_thresh(), cfg.horizon);
    let width: Vec<[f64; 2]> = (0..=300)
        .map(|k| {
            let t = cfg.horizon * k as f64 / 300.0;
            [t, gate_distance(pa, pb, t)]
        })
        .collect();
    let intervals: Vec<Value> = iv
        .intervals
        .iter()
        .map(|&(lo, hi)| json!([lo, if hi.is_finite() { Some(hi) } else { None }]))
        .collect();
    let doc = json!({
        "ids": [pa.id, pb.id],
        "threshold": cfg.d_thresh(),
        "horizon": cfg.horizon,
        "intervals": intervals,
        "width": width,
    });
    Ok(doc.to_string())
}

#[wasm_bindgen]
pub fn triangulate_json(scene: &str) -> Result<String, JsError> {
    triangulate_scene(scene).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn plan_json(scene: &str) -> Result<String, JsError> {
    plan_scene(scene).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gate_json(scene: &str, a: usize, b: usize) -> Result<String, JsError> {
    gate_scene(scene, a, b).map_err(|e| JsError::new(&e))
}
