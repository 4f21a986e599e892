//! Scenario files: schema, defaults and validation.
//!
//! Scenarios are JSON documents. Units in the file are meters, nanometers,
//! watts, seconds, degrees and bit/s. Loading reports every problem found,
//! not just the first one.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::channel::AtmosphereSpec;
use crate::datalink::{BufferSpec, Duplex};
use crate::geometry::{OrbitSpec, StaticPlatformSpec, Trajectory, Waypoint};
use crate::pat::{DisturbanceSpec, PatConfig, ReacquirePolicy};
use crate::terminal::{builtin_profile, duplex_plan_check, DuplexPolicy, TerminalProfile};

use super::EngineError;

/// One problem found while loading a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    /// `line L, column C` for syntax and type errors, a JSON path otherwise.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlatformKind {
    Ground,
    Haps,
    Drone,
    Satellite,
}

/// Reference axis of a terminal gimbal. Field-of-regard elevation is the
/// angle above the plane perpendicular to this axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountAxis {
    LocalVertical,
    OrbitNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t0_s: f64,
    pub t1_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    #[serde(default)]
    pub raan_deg: f64,
    #[serde(default)]
    pub initial_phase_deg: f64,
    #[serde(default)]
    pub epoch_s: f64,
}

impl OrbitConfig {
    pub fn to_spec(&self) -> OrbitSpec {
        OrbitSpec {
            altitude_m: self.altitude_m,
            inclination_rad: self.inclination_deg.to_radians(),
            raan_rad: self.raan_deg.to_radians(),
            initial_phase_rad: self.initial_phase_deg.to_radians(),
            epoch_s: self.epoch_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointConfig {
    pub time_s: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_m: f64,
    #[serde(default)]
    pub waypoints: Vec<WaypointConfig>,
}

impl SiteConfig {
    pub fn to_spec(&self) -> StaticPlatformSpec {
        StaticPlatformSpec {
            latitude_rad: self.latitude_deg.to_radians(),
            longitude_rad: self.longitude_deg.to_radians(),
            altitude_m: self.altitude_m,
            waypoints: self
                .waypoints
                .iter()
                .map(|w| Waypoint {
                    time_s: w.time_s,
                    latitude_rad: w.latitude_deg.to_radians(),
                    longitude_rad: w.longitude_deg.to_radians(),
                    altitude_m: w.altitude_m,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub id: String,
    pub kind: PlatformKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<SiteConfig>,
    /// `{"profile": "FX", ...overrides}`; any profile field may be overridden.
    pub terminal: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount: Option<MountAxis>,
    #[serde(default)]
    pub atmosphere: AtmosphereSpec,
    #[serde(default)]
    pub buffer: BufferSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub direction: Duplex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_elevation_a_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_elevation_b_deg: Option<f64>,
}

impl LinkConfig {
    pub fn id(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }
}

/// Scenario-wide acquisition settings. Detector field of view, fine-pointing
/// accuracy and loop bandwidth come from each terminal profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatSettings {
    #[serde(default = "d_gps")]
    pub gps_exchange_duration_s: f64,
    #[serde(default = "d_discovery")]
    pub discovery_timeout_s: f64,
    #[serde(default = "d_dwell")]
    pub scan_dwell_s: f64,
    #[serde(default = "d_uncertainty")]
    pub initial_uncertainty_deg: f64,
    #[serde(default = "d_policy")]
    pub reacquire_policy: ReacquirePolicy,
}

fn d_gps() -> f64 {
    PatConfig::default().gps_exchange_duration_s
}
fn d_discovery() -> f64 {
    PatConfig::default().discovery_timeout_s
}
fn d_dwell() -> f64 {
    PatConfig::default().scan_dwell_s
}
fn d_uncertainty() -> f64 {
    PatConfig::default().initial_uncertainty_deg
}
fn d_policy() -> ReacquirePolicy {
    PatConfig::default().reacquire_policy
}

impl Default for PatSettings {
    fn default() -> Self {
        PatSettings {
            gps_exchange_duration_s: d_gps(),
            discovery_timeout_s: d_discovery(),
            scan_dwell_s: d_dwell(),
            initial_uncertainty_deg: d_uncertainty(),
            reacquire_policy: d_policy(),
        }
    }
}

/// The scenario file as written, with every default filled in after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub time: TimeConfig,
    pub platforms: Vec<PlatformConfig>,
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub pat: PatSettings,
    #[serde(default)]
    pub duplex: DuplexPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Platform {
    pub id: String,
    pub kind: PlatformKind,
    pub trajectory: Trajectory,
    pub terminal: TerminalProfile,
    pub mount: MountAxis,
    pub atmosphere: AtmosphereSpec,
    pub buffer: BufferSpec,
    pub pat: PatConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub a: usize,
    pub b: usize,
    pub direction: Duplex,
    pub min_elevation_a_rad: f64,
    pub min_elevation_b_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Normalized file form, echoed by [`Scenario::to_json`].
    pub file: ScenarioFile,
    pub platforms: Vec<Platform>,
    pub links: Vec<Link>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn t0(&self) -> f64 {
        self.file.time.t0_s
    }

    pub fn t1(&self) -> f64 {
        self.file.time.t1_s
    }

    pub fn dt(&self) -> f64 {
        self.file.time.dt_s
    }

    /// Number of simulation steps; step `k` samples time `t0 + k·dt`.
    pub fn step_count(&self) -> u64 {
        ((self.t1() - self.t0()) / self.dt() - 1e-9).ceil().max(0.0) as u64
    }

    pub fn platform(&self, id: &str) -> Option<&Platform> {
        self.platforms.iter().find(|p| p.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serializes")
    }
}

/// Ground sites need clearance above the horizon; airborne and orbiting ends
/// may look down.
const DEFAULT_GROUND_MIN_ELEVATION_DEG: f64 = 10.0;
const DEFAULT_AIRBORNE_MIN_ELEVATION_DEG: f64 = -90.0;

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            location: location.into(),
            message: message.into(),
        });
    }

    fn extend(&mut self, location: &str, messages: Vec<String>) {
        for m in messages {
            self.push(location, m);
        }
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, EngineError> {
    let mut issues = Issues(Vec::new());
    let mut unknown = Vec::new();

    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: Result<ScenarioFile, _> = {
        let mut note = |path: serde_ignored::Path| unknown.push(path.to_string());
        let ignored = serde_ignored::Deserializer::new(&mut de, &mut note);
        serde_path_to_error::deserialize(ignored)
    };
    let syntax = |e: &serde_json::Error, message: String, issues: &mut Issues| {
        issues.push(format!("line {}, column {}", e.line(), e.column()), message);
    };
    let mut file = match parsed {
        Ok(f) => f,
        Err(e) => {
            let inner = e.inner();
            let path = e.path().to_string();
            let message = if path.is_empty() || path == "." {
                inner.to_string()
            } else {
                format!("{path}: {inner}")
            };
            syntax(inner, message, &mut issues);
            return Err(EngineError::Validation(issues.0));
        }
    };
    if let Err(e) = de.end() {
        syntax(&e, e.to_string(), &mut issues);
        return Err(EngineError::Validation(issues.0));
    }
    for path in unknown {
        issues.push(path, "unknown key");
    }

    let platforms = resolve_platforms(&mut file, &mut issues);
    let links = resolve_links(&mut file, &platforms, &mut issues);
    check_time(&file, &platforms, &links, &mut issues);

    if !issues.0.is_empty() {
        return Err(EngineError::Validation(issues.0));
    }
    Ok(Scenario {
        file,
        platforms: platforms.into_iter().map(|p| p.expect("validated")).collect(),
        links: links.into_iter().map(|l| l.expect("validated")).collect(),
    })
}

fn merge(into: &mut Value, patch: &Value) {
    match (into, patch) {
        (Value::Object(dst), Value::Object(src)) => {
            for (k, v) in src {
                merge(dst.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn resolve_terminal(
    map: &mut Map<String, Value>,
    loc: &str,
    issues: &mut Issues,
) -> Option<TerminalProfile> {
    let mut merged = match map.get("profile") {
        None => Value::Object(Map::new()),
        Some(Value::String(name)) => match builtin_profile(name) {
            Some(p) => serde_json::to_value(p).expect("profile serializes"),
            None => {
                issues.push(
                    format!("{loc}.profile"),
                    format!("unknown built-in profile {name:?} (expected HICALI, FX or ST)"),
                );
                return None;
            }
        },
        Some(_) => {
            issues.push(format!("{loc}.profile"), "profile must be a string");
            return None;
        }
    };
    let mut patch = map.clone();
    patch.remove("profile");
    merge(&mut merged, &Value::Object(patch));

    let mut unknown = Vec::new();
    let result: Result<TerminalProfile, _> = {
        let mut note = |p: serde_ignored::Path| unknown.push(p.to_string());
        let ignored = serde_ignored::Deserializer::new(&merged, &mut note);
        serde_path_to_error::deserialize(ignored)
    };
    for p in unknown {
        issues.push(format!("{loc}.{p}"), "unknown key");
    }
    let profile = match result {
        Ok(p) => p,
        Err(e) => {
            issues.push(format!("{loc}.{}", e.path()), e.inner().to_string());
            return None;
        }
    };
    issues.extend(loc, profile.problems());

    let mut filled = match serde_json::to_value(&profile).expect("profile serializes") {
        Value::Object(m) => m,
        _ => unreachable!("profile is an object"),
    };
    if let Some(name) = map.get("profile") {
        filled.insert("profile".into(), name.clone());
    }
    *map = filled;
    Some(profile)
}

fn resolve_platforms(file: &mut ScenarioFile, issues: &mut Issues) -> Vec<Option<Platform>> {
    let pat = file.pat.clone();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, p) in file.platforms.iter_mut().enumerate() {
        let loc = format!("platforms[{i}]");
        if p.id.is_empty() {
            issues.push(format!("{loc}.id"), "platform id must not be empty");
        } else if !seen.insert(p.id.clone()) {
            issues.push(format!("{loc}.id"), format!("duplicate platform id {:?}", p.id));
        }
        let trajectory = match (p.kind, &p.orbit, &p.site) {
            (PlatformKind::Satellite, Some(o), None) => Some(Trajectory::Orbit(o.to_spec())),
            (PlatformKind::Satellite, _, _) => {
                issues.push(&loc, "a satellite needs an `orbit` block and no `site` block");
                None
            }
            (_, None, Some(s)) => Some(Trajectory::Static(s.to_spec())),
            (_, _, _) => {
                issues.push(&loc, "ground, haps and drone platforms need a `site` block and no `orbit` block");
                None
            }
        };
        if let Some(Err(e)) = trajectory.as_ref().map(Trajectory::validate) {
            issues.push(&loc, e.to_string());
        }
        let mount = *p.mount.get_or_insert(match p.kind {
            PlatformKind::Satellite => MountAxis::OrbitNormal,
            _ => MountAxis::LocalVertical,
        });
        if mount == MountAxis::OrbitNormal && p.kind != PlatformKind::Satellite {
            issues.push(format!("{loc}.mount"), "orbit_normal mount needs an orbiting platform");
        }
        let terminal = resolve_terminal(&mut p.terminal, &format!("{loc}.terminal"), issues);
        issues.extend(&format!("{loc}.atmosphere"), p.atmosphere.problems());
        issues.extend(&format!("{loc}.buffer"), p.buffer.problems());
        issues.extend(&format!("{loc}.disturbance"), p.disturbance.problems());

        let platform = match (trajectory, terminal) {
            (Some(trajectory), Some(terminal)) => {
                let cfg = PatConfig {
                    coarse_fov_full_deg: terminal.coarse_fov_deg,
                    fine_accuracy_urad: terminal.fine_pointing_accuracy_urad,
                    loop_bandwidth_hz: terminal.fine_loop_bandwidth_hz,
                    gps_exchange_duration_s: pat.gps_exchange_duration_s,
                    discovery_timeout_s: pat.discovery_timeout_s,
                    scan_dwell_s: pat.scan_dwell_s,
                    initial_uncertainty_deg: pat.initial_uncertainty_deg,
                    reacquire_policy: pat.reacquire_policy,
                    disturbance: p.disturbance.clone(),
                };
                issues.extend(&loc, cfg.problems());
                Some(Platform {
                    id: p.id.clone(),
                    kind: p.kind,
                    trajectory,
                    terminal,
                    mount,
                    atmosphere: p.atmosphere,
                    buffer: p.buffer.clone(),
                    pat: cfg,
                })
            }
            _ => None,
        };
        out.push(platform);
    }
    out
}

fn resolve_links(
    file: &mut ScenarioFile,
    platforms: &[Option<Platform>],
    issues: &mut Issues,
) -> Vec<Option<Link>> {
    let index_of = |id: &str| file.platforms.iter().position(|p| p.id == id);
    let mut seen = std::collections::HashSet::new();
    let mut resolved = Vec::new();
    let policy = file.duplex;
    let kinds: Vec<PlatformKind> = file.platforms.iter().map(|p| p.kind).collect();
    let indices: Vec<(Option<usize>, Option<usize>)> =
        file.links.iter().map(|l| (index_of(&l.a), index_of(&l.b))).collect();

    for (i, (l, (ia, ib))) in file.links.iter_mut().zip(indices).enumerate() {
        let loc = format!("links[{i}]");
        let id = l.id();
        for (end, name, idx) in [("a", &l.a, ia), ("b", &l.b, ib)] {
            if idx.is_none() {
                issues.push(
                    format!("{loc}.{end}"),
                    format!("link {id} references undeclared platform {name:?}"),
                );
            }
        }
        if l.a == l.b {
            issues.push(&loc, format!("link {id} connects a platform to itself"));
        }
        if !seen.insert(id.clone()) {
            issues.push(&loc, format!("duplicate link {id}"));
        }
        let default_el = |idx: Option<usize>| match idx.map(|k| kinds[k]) {
            Some(PlatformKind::Ground) | None => DEFAULT_GROUND_MIN_ELEVATION_DEG,
            _ => DEFAULT_AIRBORNE_MIN_ELEVATION_DEG,
        };
        let el_a = *l.min_elevation_a_deg.get_or_insert(default_el(ia));
        let el_b = *l.min_elevation_b_deg.get_or_insert(default_el(ib));
        for (end, el) in [("a", el_a), ("b", el_b)] {
            if !(-90.0..=90.0).contains(&el) {
                issues.push(
                    format!("{loc}.min_elevation_{end}_deg"),
                    format!("minimum elevation {el}° outside [-90°, 90°]"),
                );
            }
        }

        let (Some(ia), Some(ib)) = (ia, ib) else {
            resolved.push(None);
            continue;
        };
        let (Some(pa), Some(pb)) = (&platforms[ia], &platforms[ib]) else {
            resolved.push(None);
            continue;
        };
        let report = duplex_plan_check(&pa.terminal, &pb.terminal, &policy);
        for c in report.conflicts {
            issues.push(&loc, format!("duplex plan conflict on link {id}: {c}"));
        }
        if l.direction == Duplex::TwoWay {
            for p in [pa, pb] {
                if p.terminal.modem.duplex != Duplex::TwoWay {
                    issues.push(
                        &loc,
                        format!("two-way link {id} but the modem on {} is one-way", p.id),
                    );
                }
            }
        }
        for (end, p, el) in [("a", pa, el_a), ("b", pb, el_b)] {
            if p.atmosphere.applies && el <= 5.0 {
                issues.push(
                    format!("{loc}.min_elevation_{end}_deg"),
                    format!(
                        "{} has an atmosphere, so its minimum elevation must exceed 5° (got {el}°)",
                        p.id
                    ),
                );
            }
        }
        resolved.push(Some(Link {
            id,
            a: ia,
            b: ib,
            direction: l.direction,
            min_elevation_a_rad: el_a.to_radians(),
            min_elevation_b_rad: el_b.to_radians(),
        }));
    }
    resolved
}

fn check_time(
    file: &ScenarioFile,
    platforms: &[Option<Platform>],
    links: &[Option<Link>],
    issues: &mut Issues,
) {
    let t = &file.time;
    if !(t.t0_s.is_finite() && t.t1_s.is_finite() && t.dt_s.is_finite()) {
        issues.push("time", "times must be finite");
        return;
    }
    if !(t.t1_s > t.t0_s) {
        issues.push("time.t1_s", format!("t1_s ({}) must exceed t0_s ({})", t.t1_s, t.t0_s));
    }
    if !(t.dt_s > 0.0) {
        issues.push("time.dt_s", format!("dt_s must be positive, got {}", t.dt_s));
        return;
    }
    for (i, p) in file.platforms.iter().enumerate() {
        if let Some(o) = &p.orbit {
            if t.t0_s < o.epoch_s {
                issues.push(
                    format!("platforms[{i}].orbit.epoch_s"),
                    format!("orbit epoch {} s is after the scenario start {} s", o.epoch_s, t.t0_s),
                );
            }
        }
    }
    for (i, link) in links.iter().enumerate() {
        let Some(link) = link else { continue };
        for idx in [link.a, link.b] {
            let Some(p) = &platforms[idx] else { continue };
            let tau = p.atmosphere.correlation_time_s;
            if p.atmosphere.applies && t.dt_s > tau / 2.0 {
                issues.push(
                    "time.dt_s",
                    format!(
                        "dt_s = {} s exceeds half the correlation time of {} ({} s / 2) on links[{i}]",
                        t.dt_s, p.id, tau
                    ),
                );
            }
        }
    }
}
