//! Flat `key = value` configuration covering every tunable parameter.
//!
//! ```text
//! # comment
//! planner.k_clearance = 0.8
//! gvo.samples = 60
//! synth.spawn_period = 5
//! ```

use crate::bench::DenseFixture;
use crate::datasets::LoadOptions;
use crate::sim::SimConfig;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
}

/// Everything a CLI run can be configured with.
#[derive(Clone, Debug)]
pub struct Settings {
    pub sim: SimConfig,
    pub fixture: DenseFixture,
    pub load: LoadOptions,
    /// Resampling step for recorded datasets, seconds.
    pub interp_dt: f64,
    /// Spacing of trial start offsets on recorded datasets, seconds.
    pub trial_interval: f64,
    /// `None` is unlimited.
    pub sensing_range: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            sim: SimConfig::default(),
            fixture: DenseFixture::new(1),
            load: LoadOptions::default(),
            interp_dt: 0.1,
            trial_interval: 3.0,
            sensing_range: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

fn parse_range(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    match value {
        "inf" | "none" | "unlimited" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}

impl Settings {
    /// Sets one parameter by its dotted name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let s = &mut self.sim;
        let fx = &mut self.fixture;
        let ws = &mut fx.crowd.workspace;
        match key {
            "sim.dt" => s.dt = parse(key, value)?,
            "sim.collision_distance" => s.collision_distance = parse(key, value)?,
            "sim.timeout_factor" => s.timeout_factor = parse(key, value)?,
            "sim.corner_margin" => s.corner_margin = parse(key, value)?,
            "sim.track_spacing" => s.track_spacing = parse(key, value)?,
            "sim.timing" => s.timing = parse(key, value)?,
            "sim.sensing_range" => self.sensing_range = parse_range(key, value)?,
            "car.wheelbase" => s.car.wheelbase = parse(key, value)?,
            "car.v_max" => s.car.v_max = parse(key, value)?,
            "car.a_max" => s.car.a_max = parse(key, value)?,
            "car.steering_max" => s.car.steering_max = parse(key, value)?,
            "planner.v_max" => s.planner.v_max = parse(key, value)?,
            "planner.r_obs" => s.planner.r_obs = parse(key, value)?,
            "planner.s_safe" => s.planner.s_safe = parse(key, value)?,
            "planner.horizon" => s.planner.horizon = parse(key, value)?,
            "planner.k_clearance" => s.planner.k_clearance = parse(key, value)?,
            "planner.goal_radius" => s.planner.goal_radius = parse(key, value)?,
            "planner.lookahead" => s.planner.lookahead = parse(key, value)?,
            "planner.max_expansions" => s.planner.max_expansions = parse(key, value)?,
            "planner.max_face_visits" => s.planner.max_face_visits = parse(key, value)?,
            "gvo.time_horizon" => s.gvo.time_horizon = parse(key, value)?,
            "gvo.samples" => s.gvo.samples = parse(key, value)?,
            "gvo.check_rate" => s.gvo.check_rate = parse(key, value)?,
            "gvo.wheelbase" => s.gvo.wheelbase = parse(key, value)?,
            "gvo.radius" => s.gvo.radius = parse(key, value)?,
            "wait.stop_distance" => s.wait.stop_distance = parse(key, value)?,
            "wait.vo_horizon" => s.wait.vo_horizon = parse(key, value)?,
            "wait.radius" => s.wait.radius = parse(key, value)?,
            "guard.enabled" => s.guard.enabled = parse(key, value)?,
            "guard.horizon" => s.guard.horizon = parse(key, value)?,
            "guard.check_dt" => s.guard.check_dt = parse(key, value)?,
            "guard.radius" => s.guard.radius = parse(key, value)?,
            "guard.speed_levels" => s.guard.speed_levels = parse(key, value)?,
            "guard.steering_levels" => s.guard.steering_levels = parse(key, value)?,
            "synth.spawn_period" => fx.crowd.spawn_period = parse(key, value)?,
            "synth.spawn_count" => fx.crowd.spawn_count = parse(key, value)?,
            "synth.retarget_period" => fx.crowd.retarget_period = parse(key, value)?,
            "synth.speed_min" => fx.crowd.speed_min = parse(key, value)?,
            "synth.speed_max" => fx.crowd.speed_max = parse(key, value)?,
            "synth.width" => ws.max.x = ws.min.x + parse::<f64>(key, value)?,
            "synth.height" => ws.max.y = ws.min.y + parse::<f64>(key, value)?,
            "synth.duration" => fx.crowd.duration = parse(key, value)?,
            "synth.dt" => fx.crowd.dt = parse(key, value)?,
            "synth.seed" => fx.crowd.seed = parse(key, value)?,
            "synth.trials" => fx.trials = parse(key, value)?,
            "synth.warmup" => fx.warmup = parse(key, value)?,
            "synth.interval" => fx.interval = parse(key, value)?,
            "dataset.frame_period" => self.load.frame_period = parse(key, value)?,
            "dataset.interp_dt" => self.interp_dt = parse(key, value)?,
            "dataset.trial_interval" => self.trial_interval = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every assignment in `text`; `#` starts a comment.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }
}
