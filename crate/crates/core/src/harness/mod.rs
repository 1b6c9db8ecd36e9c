//! Batch experiments: seeded corpora, per-trial runs of both methods, and the
//! aggregated time-to-door report.

mod svg;

pub use svg::{emit_trajectory_svg, trajectory_svg};

use crate::baseline::{frontier_explore_to_door, FrontierConfig};
use crate::descent::{run_descent, CameraModel, DeliveryTarget, DescentConfig, DescentStatus};
use crate::geometry::Vec2;
use crate::navigation::{deliver_to_front_door, orient_ring_frontward, DeliveryStatus, MissionConfig};
use crate::occupancy::extract_footprint_ring;
use crate::simworld::{generate_world, DoorDetector, DoorMode, DronePose, Flight, GeneratorParams, TimedPose, WorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const TRIAL_SCHEMA: &str = "doorstep.trial.v1";
pub const REPORT_SCHEMA: &str = "doorstep.report.v1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot parse config {path}: {source}")]
    ConfigParse { path: PathBuf, source: toml::de::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    TrialLog {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("trial has an empty trajectory")]
    EmptyTrajectory,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] crate::simworld::WorldError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Frontier,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Frontier => "frontier",
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "frontier" => Ok(Method::Frontier),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

/// Outcome of one trial, merging descent and delivery outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Delivered,
    DoorNotFound,
    Timeout,
    Stuck,
    NoRoofVisible,
    NoFrontPavedArea,
    NoSafeSpot,
    WrongRoof,
    GenerationFailed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Delivered => "delivered",
            TrialStatus::DoorNotFound => "door_not_found",
            TrialStatus::Timeout => "timeout",
            TrialStatus::Stuck => "stuck",
            TrialStatus::NoRoofVisible => "no_roof_visible",
            TrialStatus::NoFrontPavedArea => "no_front_paved_area",
            TrialStatus::NoSafeSpot => "no_safe_spot",
            TrialStatus::WrongRoof => "wrong_roof",
            TrialStatus::GenerationFailed => "generation_failed",
        }
    }
}

impl From<DeliveryStatus> for TrialStatus {
    fn from(s: DeliveryStatus) -> Self {
        match s {
            DeliveryStatus::Delivered => TrialStatus::Delivered,
            DeliveryStatus::DoorNotFound => TrialStatus::DoorNotFound,
            DeliveryStatus::Timeout => TrialStatus::Timeout,
            DeliveryStatus::Stuck => TrialStatus::Stuck,
        }
    }
}

impl From<DescentStatus> for TrialStatus {
    fn from(s: DescentStatus) -> Self {
        match s {
            DescentStatus::Success => TrialStatus::Delivered,
            DescentStatus::NoRoofVisible => TrialStatus::NoRoofVisible,
            DescentStatus::NoFrontPavedArea => TrialStatus::NoFrontPavedArea,
            DescentStatus::NoSafeSpot => TrialStatus::NoSafeSpot,
            DescentStatus::WrongRoof => TrialStatus::WrongRoof,
            DescentStatus::Timeout => TrialStatus::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 160,
            height: 160,
            focal: 80.0,
        }
    }
}

impl CameraConfig {
    pub fn model(&self) -> CameraModel {
        CameraModel::centered(self.width, self.height, self.focal, self.focal)
    }
}

/// Everything that determines a corpus run. Serialised as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub master_seed: u64,
    pub corpus_size: usize,
    /// Door modes assigned to houses in turn.
    pub door_modes: Vec<DoorMode>,
    /// Targets run with the proposed method only, besides the front door.
    pub extra_targets: Vec<DeliveryTarget>,
    pub dt: f64,
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    pub camera: CameraConfig,
    pub generator: GeneratorParams,
    pub descent: DescentConfig,
    pub mission: MissionConfig,
    pub frontier: FrontierConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            master_seed: 20_240_611,
            corpus_size: 20,
            door_modes: vec![DoorMode::Open, DoorMode::Recessed],
            extra_targets: vec![DeliveryTarget::FrontPavedArea, DeliveryTarget::FrontYard, DeliveryTarget::BackYard],
            dt: 0.1,
            max_speed: 0.5,
            max_yaw_rate: PI / 4.0,
            camera: CameraConfig::default(),
            generator: GeneratorParams::default(),
            descent: DescentConfig::default(),
            mission: MissionConfig::default(),
            frontier: FrontierConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = Self::from_toml(&text).map_err(|source| HarnessError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.corpus_size == 0 {
            return bad("corpus_size must be at least 1");
        }
        if self.door_modes.is_empty() {
            return bad("door_modes must not be empty");
        }
        if !(self.dt > 0.0) || !(self.max_speed > 0.0) || !(self.max_yaw_rate > 0.0) {
            return bad("dt, max_speed and max_yaw_rate must be positive");
        }
        if self.camera.width == 0 || self.camera.height == 0 || !(self.camera.focal > 0.0) {
            return bad("camera needs a positive size and focal length");
        }
        if self.extra_targets.contains(&DeliveryTarget::FrontDoor) {
            return bad("front_door is always run and cannot be an extra target");
        }
        self.generator.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(noise) = &self.descent.noise {
            noise.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Houses of the corpus; seeds are drawn from the master seed.
    pub fn houses(&self) -> Vec<HouseSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        (0..self.corpus_size)
            .map(|index| HouseSpec {
                index,
                seed: rng.random(),
                door_mode: self.door_modes[index % self.door_modes.len()],
            })
            .collect()
    }

    pub fn world_params(&self, house: &HouseSpec) -> GeneratorParams {
        GeneratorParams {
            seed: house.seed,
            door_mode: house.door_mode,
            ..self.generator.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseSpec {
    pub index: usize,
    pub seed: u64,
    pub door_mode: DoorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub schema: String,
    pub house: usize,
    pub seed: u64,
    pub door_mode: DoorMode,
    pub method: Method,
    pub target: DeliveryTarget,
    pub status: TrialStatus,
    /// Simulated seconds from the top-of-house start.
    pub elapsed: f64,
    pub path_length: f64,
    pub descent_point: Option<Vec2>,
    pub approach_point: Option<Vec2>,
    pub approach_fallback: bool,
    pub final_pose: Option<DronePose>,
    pub trajectory: Vec<TimedPose>,
}

fn start_flight(world: &WorldModel, cfg: &HarnessConfig) -> Flight {
    let pose = DronePose::new(world.gps_start.x, world.gps_start.y, world.start_altitude, world.start_yaw);
    Flight::new(pose, cfg.dt, cfg.max_speed, cfg.max_yaw_rate)
}

/// Generate the house and run one method for one target on it.
pub fn run_trial(house: &HouseSpec, method: Method, target: DeliveryTarget, cfg: &HarnessConfig) -> TrialResult {
    match generate_world(&cfg.world_params(house)) {
        Ok(world) => run_trial_on(&world, house, method, target, cfg),
        Err(_) => TrialResult {
            schema: TRIAL_SCHEMA.to_string(),
            house: house.index,
            seed: house.seed,
            door_mode: house.door_mode,
            method,
            target,
            status: TrialStatus::GenerationFailed,
            elapsed: 0.0,
            path_length: 0.0,
            descent_point: None,
            approach_point: None,
            approach_fallback: false,
            final_pose: None,
            trajectory: Vec::new(),
        },
    }
}

/// Run one method for one target on an already generated world.
pub fn run_trial_on(
    world: &WorldModel,
    house: &HouseSpec,
    method: Method,
    target: DeliveryTarget,
    cfg: &HarnessConfig,
) -> TrialResult {
    let mut flight = start_flight(world, cfg);
    let mut detector = DoorDetector::new(cfg.mission.detector, house.seed ^ 0x5eed_d00d);
    let (status, elapsed, descent_point, approach) = match method {
        Method::Proposed => proposed(&mut flight, world, target, cfg, &mut detector),
        Method::Frontier => {
            let out = frontier_explore_to_door(&mut flight, world, &cfg.frontier, &cfg.mission, &mut detector, house.seed);
            let d = out.delivery;
            (
                d.status.into(),
                d.elapsed,
                out.descent_point,
                d.approach_point.map(|p| (p, d.approach_fallback)),
            )
        }
    };
    TrialResult {
        schema: TRIAL_SCHEMA.to_string(),
        house: house.index,
        seed: house.seed,
        door_mode: house.door_mode,
        method,
        target,
        status,
        elapsed,
        path_length: flight.path_length(),
        descent_point,
        approach_point: approach.map(|a| a.0),
        approach_fallback: approach.is_some_and(|a| a.1),
        final_pose: Some(flight.pose()),
        trajectory: flight.into_trajectory(),
    }
}

type Finished = (TrialStatus, f64, Option<Vec2>, Option<(Vec2, bool)>);

fn proposed(
    flight: &mut Flight,
    world: &WorldModel,
    target: DeliveryTarget,
    cfg: &HarnessConfig,
    detector: &mut DoorDetector,
) -> Finished {
    let cam = cfg.camera.model();
    let cap = cfg.descent.time_cap;
    let desc = run_descent(flight, world, target, &cam, &cfg.descent);
    let spot = desc.descent_point;
    match desc.status {
        DescentStatus::Success => {}
        DescentStatus::Timeout => return (TrialStatus::Timeout, cap, spot, None),
        other => return (other.into(), flight.time(), spot, None),
    }
    let spot_v = spot.expect("successful descent has a descent point");
    if target != DeliveryTarget::FrontDoor {
        // the paved-area drop lands from hover height
        while !flight.step_toward(spot_v, 0.0, None) {
            if flight.time() >= cap {
                return (TrialStatus::Timeout, cap, spot, None);
            }
        }
        return (TrialStatus::Delivered, flight.time(), spot, None);
    }
    let (Some(occ), Some(roof)) = (desc.occupancy.as_ref(), desc.capture_roof.as_ref()) else {
        return (TrialStatus::NoRoofVisible, flight.time(), spot, None);
    };
    let ring = extract_footprint_ring(occ, roof, cfg.mission.ring_standoff, cfg.mission.inflation, spot_v)
        .ok()
        .map(|r| match &desc.house {
            Some(h) => orient_ring_frontward(&r, h.c_roof_world, h.v_front),
            None => r,
        });
    let roof_points = roof.pixels.iter().map(|p| occ.frame.to_world((p.x, p.y))).collect();
    let mission = MissionConfig {
        time_cap: cap,
        ..cfg.mission.clone()
    };
    let out = deliver_to_front_door(flight, world, occ, ring.as_ref(), roof_points, detector, &mission);
    (
        out.status.into(),
        out.elapsed,
        spot,
        out.approach_point.map(|p| (p, out.approach_fallback)),
    )
}

/// Every trial of a corpus run: both methods on the front door, the proposed
/// method alone on the extra targets.
pub fn trial_plan(cfg: &HarnessConfig) -> Vec<(HouseSpec, Method, DeliveryTarget)> {
    let mut plan = Vec::new();
    for h in cfg.houses() {
        plan.push((h, Method::Proposed, DeliveryTarget::FrontDoor));
        plan.push((h, Method::Frontier, DeliveryTarget::FrontDoor));
        for &t in &cfg.extra_targets {
            plan.push((h, Method::Proposed, t));
        }
    }
    plan
}

/// Run the whole corpus in parallel; results come back in plan order.
pub fn run_trials(cfg: &HarnessConfig) -> Vec<TrialResult> {
    let plan = trial_plan(cfg);
    let worlds: Vec<_> = cfg
        .houses()
        .par_iter()
        .map(|h| generate_world(&cfg.world_params(h)).ok())
        .collect();
    plan.par_iter()
        .map(|(h, m, t)| match &worlds[h.index] {
            Some(w) => run_trial_on(w, h, *m, *t, cfg),
            None => run_trial(h, *m, *t, cfg),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub trials: usize,
    pub delivered: usize,
    pub success_rate: f64,
    pub mean_elapsed: f64,
    pub std_elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub target: DeliveryTarget,
    pub trials: usize,
    pub delivered: usize,
    pub success_rate: f64,
    pub mean_elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub house: usize,
    pub seed: u64,
    pub door_mode: DoorMode,
    pub method: Method,
    pub target: DeliveryTarget,
    pub status: TrialStatus,
    pub elapsed: f64,
    pub path_length: f64,
    pub descent_x: Option<f64>,
    pub descent_y: Option<f64>,
}

impl From<&TrialResult> for ReportRow {
    fn from(t: &TrialResult) -> Self {
        Self {
            house: t.house,
            seed: t.seed,
            door_mode: t.door_mode,
            method: t.method,
            target: t.target,
            status: t.status,
            elapsed: t.elapsed,
            path_length: t.path_length,
            descent_x: t.descent_point.map(|p| p.x),
            descent_y: t.descent_point.map(|p| p.y),
        }
    }
}

/// Front-door statistics per method, plus proposed-only extra targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub methods: Vec<MethodStats>,
    pub extra_targets: Vec<TargetStats>,
    /// Frontier mean over proposed mean on the front door.
    pub ratio: f64,
    /// `100 (ratio - 1)`: how much longer the frontier method takes.
    pub percent_slower: f64,
    pub rows: Vec<ReportRow>,
}

/// Mean and sample standard deviation (`n - 1`); the deviation is 0 below two
/// values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate trial results. Failed trials count with their elapsed time.
pub fn build_report(trials: &[TrialResult]) -> Report {
    let mut rows: Vec<ReportRow> = trials.iter().map(ReportRow::from).collect();
    rows.sort_by(|a, b| (a.house, a.target.as_str(), a.method).cmp(&(b.house, b.target.as_str(), b.method)));
    let mut methods = Vec::new();
    for m in [Method::Proposed, Method::Frontier] {
        let sel: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.method == m && r.target == DeliveryTarget::FrontDoor)
            .collect();
        if sel.is_empty() {
            continue;
        }
        let times: Vec<f64> = sel.iter().map(|r| r.elapsed).collect();
        let (mean, std) = mean_std(&times);
        let delivered = sel.iter().filter(|r| r.status == TrialStatus::Delivered).count();
        methods.push(MethodStats {
            method: m,
            trials: sel.len(),
            delivered,
            success_rate: delivered as f64 / sel.len() as f64,
            mean_elapsed: mean,
            std_elapsed: std,
        });
    }
    let mut extra_targets = Vec::new();
    for t in DeliveryTarget::ALL {
        if t == DeliveryTarget::FrontDoor {
            continue;
        }
        let sel: Vec<&ReportRow> = rows.iter().filter(|r| r.target == t).collect();
        if sel.is_empty() {
            continue;
        }
        let delivered = sel.iter().filter(|r| r.status == TrialStatus::Delivered).count();
        let times: Vec<f64> = sel.iter().map(|r| r.elapsed).collect();
        extra_targets.push(TargetStats {
            target: t,
            trials: sel.len(),
            delivered,
            success_rate: delivered as f64 / sel.len() as f64,
            mean_elapsed: mean_std(&times).0,
        });
    }
    let mean_of = |m: Method| methods.iter().find(|s| s.method == m).map(|s| s.mean_elapsed);
    let ratio = match (mean_of(Method::Frontier), mean_of(Method::Proposed)) {
        (Some(f), Some(p)) if p > 0.0 => f / p,
        _ => f64::NAN,
    };
    Report {
        schema: REPORT_SCHEMA.to_string(),
        methods,
        extra_targets,
        ratio,
        percent_slower: 100.0 * (ratio - 1.0),
        rows,
    }
}

impl Report {
    pub fn method(&self, m: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("house,seed,door_mode,method,target,status,elapsed,path_length,descent_x,descent_y\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.house,
                r.seed,
                r.door_mode.as_str(),
                r.method.as_str(),
                r.target.as_str(),
                r.status.as_str(),
                r.elapsed,
                r.path_length,
                opt(r.descent_x),
                opt(r.descent_y)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for m in &self.methods {
            s.push_str(&format!(
                "{:<9} front door: mean {:.2} s, std {:.2} s, delivered {}/{}\n",
                m.method.as_str(),
                m.mean_elapsed,
                m.std_elapsed,
                m.delivered,
                m.trials
            ));
        }
        for t in &self.extra_targets {
            s.push_str(&format!(
                "proposed  {}: delivered {}/{}, mean {:.2} s\n",
                t.target.as_str(),
                t.delivered,
                t.trials,
                t.mean_elapsed
            ));
        }
        s.push_str(&format!(
            "frontier/proposed time ratio {:.3} (frontier {:.1}% slower)\n",
            self.ratio, self.percent_slower
        ));
        s
    }
}

pub fn write_trials(path: &Path, trials: &[TrialResult]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    for t in trials {
        let line = serde_json::to_string(t)?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|source| HarnessError::TrialLog {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Write `report.csv` and `report.json` into `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join("report.csv");
    fs::write(&csv, report.to_csv()).map_err(io_err(&csv))?;
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()).map_err(io_err(&json))?;
    Ok(())
}

/// Run the corpus and write `trials.jsonl`, `report.csv` and `report.json`
/// into `dir`.
pub fn run_corpus(cfg: &HarnessConfig, dir: &Path) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let trials = run_trials(cfg);
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_trials(&dir.join("trials.jsonl"), &trials)?;
    let report = build_report(&trials);
    write_report(dir, &report)?;
    Ok(report)
}
