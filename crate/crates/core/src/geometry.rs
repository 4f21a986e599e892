//! Platform kinematics, line-of-sight geometry, pass prediction and point-ahead.
//!
//! The Earth is a rotating sphere. Orbits are circular two-body orbits. The
//! Earth-fixed frame coincides with the inertial frame at `t = 0`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean equatorial Earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Earth gravitational parameter (m^3/s^2).
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Nominal geostationary altitude (m).
pub const GEO_ALTITUDE_M: f64 = 35_786_000.0;

/// Sidereal rotation rate of the Earth (rad/s).
///
/// Pinned to the circular mean motion at [`GEO_ALTITUDE_M`] so that the
/// nominal geostationary orbit is exactly fixed in the Earth frame. This is
/// within 2e-6 relative of the IERS value.
pub fn earth_rotation_rate() -> f64 {
    let a = EARTH_RADIUS_M + GEO_ALTITUDE_M;
    (MU_EARTH / (a * a * a)).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("time {t} s precedes orbit epoch {epoch} s")]
    BeforeEpoch { t: f64, epoch: f64 },
    #[error("platform states are sampled at different times ({a} s vs {b} s)")]
    TimeMismatch { a: f64, b: f64 },
    #[error("platforms are coincident")]
    Coincident,
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Cartesian 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }
    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }
    pub fn dot(&self, o: &Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn unit(&self) -> Vec3 {
        *self * (1.0 / self.norm())
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
    /// Rotation about +z by `angle` radians.
    pub fn rotate_z(&self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3([
            c * self.0[0] - s * self.0[1],
            s * self.0[0] + c * self.0[1],
            self.0[2],
        ])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

fn earth_rotation_vector() -> Vec3 {
    Vec3::new(0.0, 0.0, earth_rotation_rate())
}

/// Circular orbit. Eccentricity is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub altitude_m: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    pub initial_phase_rad: f64,
    pub epoch_s: f64,
}

impl OrbitSpec {
    pub fn new(altitude_m: f64, inclination_rad: f64) -> Self {
        OrbitSpec {
            altitude_m,
            inclination_rad,
            raan_rad: 0.0,
            initial_phase_rad: 0.0,
            epoch_s: 0.0,
        }
    }

    pub fn geostationary(longitude_rad: f64) -> Self {
        OrbitSpec {
            altitude_m: GEO_ALTITUDE_M,
            inclination_rad: 0.0,
            raan_rad: longitude_rad,
            initial_phase_rad: 0.0,
            epoch_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("altitude_m", self.altitude_m),
            ("inclination_rad", self.inclination_rad),
            ("raan_rad", self.raan_rad),
            ("initial_phase_rad", self.initial_phase_rad),
            ("epoch_s", self.epoch_s),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(name));
            }
        }
        if self.altitude_m <= 0.0 {
            return Err(GeometryError::Invalid(format!(
                "orbit altitude must be positive, got {} m",
                self.altitude_m
            )));
        }
        Ok(())
    }

    pub fn semi_major_axis_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_m
    }

    /// Mean motion (rad/s).
    pub fn mean_motion(&self) -> f64 {
        let a = self.semi_major_axis_m();
        (MU_EARTH / (a * a * a)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    /// Position and velocity in the inertial frame.
    pub fn inertial_state(&self, t: f64) -> (Vec3, Vec3) {
        let a = self.semi_major_axis_m();
        let n = self.mean_motion();
        let u = self.initial_phase_rad + n * (t - self.epoch_s);
        let (su, cu) = u.sin_cos();
        let (so, co) = self.raan_rad.sin_cos();
        let (si, ci) = self.inclination_rad.sin_cos();
        let pos = Vec3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si) * a;
        let vel = Vec3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si) * (a * n);
        (pos, vel)
    }

    /// Unit orbit normal in the Earth-fixed frame at time `t`.
    pub fn orbit_normal_ecef(&self, t: f64) -> Vec3 {
        let (pos, vel) = self.inertial_state(t);
        pos.cross(&vel).unit().rotate_z(-earth_rotation_rate() * t)
    }
}

/// Time-tagged waypoint for drones and drifting HAPS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time_s: f64,
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub altitude_m: f64,
}

/// Earth-fixed platform: ground station, HAPS or drone. When waypoints are
/// given, the platform moves piecewise-linearly in latitude, longitude and
/// altitude between them and holds the end points outside their span.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPlatformSpec {
    pub latitude_rad: f64,
    pub longitude_rad: f64,
    pub altitude_m: f64,
    pub waypoints: Vec<Waypoint>,
}

impl StaticPlatformSpec {
    pub fn new(latitude_rad: f64, longitude_rad: f64, altitude_m: f64) -> Self {
        StaticPlatformSpec {
            latitude_rad,
            longitude_rad,
            altitude_m,
            waypoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        check_site(self.latitude_rad, self.longitude_rad, self.altitude_m)?;
        for w in &self.waypoints {
            if !w.time_s.is_finite() {
                return Err(GeometryError::NonFinite("waypoint time_s"));
            }
            check_site(w.latitude_rad, w.longitude_rad, w.altitude_m)?;
        }
        if self.waypoints.windows(2).any(|p| p[1].time_s <= p[0].time_s) {
            return Err(GeometryError::Invalid(
                "waypoint times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Geodetic coordinates and their time derivatives at `t`.
    fn site_at(&self, t: f64) -> ([f64; 3], [f64; 3]) {
        let wp = &self.waypoints;
        if wp.is_empty() {
            return (
                [self.latitude_rad, self.longitude_rad, self.altitude_m],
                [0.0; 3],
            );
        }
        let first = wp[0];
        let last = wp[wp.len() - 1];
        if t <= first.time_s {
            return ([first.latitude_rad, first.longitude_rad, first.altitude_m], [0.0; 3]);
        }
        if t >= last.time_s {
            return ([last.latitude_rad, last.longitude_rad, last.altitude_m], [0.0; 3]);
        }
        let i = wp.partition_point(|w| w.time_s <= t) - 1;
        let (w0, w1) = (wp[i], wp[i + 1]);
        let span = w1.time_s - w0.time_s;
        let f = (t - w0.time_s) / span;
        let lerp = |a: f64, b: f64| a + (b - a) * f;
        (
            [
                lerp(w0.latitude_rad, w1.latitude_rad),
                lerp(w0.longitude_rad, w1.longitude_rad),
                lerp(w0.altitude_m, w1.altitude_m),
            ],
            [
                (w1.latitude_rad - w0.latitude_rad) / span,
                (w1.longitude_rad - w0.longitude_rad) / span,
                (w1.altitude_m - w0.altitude_m) / span,
            ],
        )
    }
}

fn check_site(lat: f64, lon: f64, alt: f64) -> Result<(), GeometryError> {
    if !lat.is_finite() || !lon.is_finite() || !alt.is_finite() {
        return Err(GeometryError::NonFinite("site coordinates"));
    }
    if lat.abs() > FRAC_PI_2 {
        return Err(GeometryError::Invalid(format!(
            "latitude {} rad outside [-pi/2, pi/2]",
            lat
        )));
    }
    if alt < 0.0 {
        return Err(GeometryError::Invalid(format!(
            "altitude {} m is below the surface",
            alt
        )));
    }
    Ok(())
}

/// Earth-fixed position of a point given spherical geodetic coordinates.
pub fn site_position(latitude_rad: f64, longitude_rad: f64, altitude_m: f64) -> Vec3 {
    let r = EARTH_RADIUS_M + altitude_m;
    let (sl, cl) = latitude_rad.sin_cos();
    let (so, co) = longitude_rad.sin_cos();
    Vec3::new(cl * co, cl * so, sl) * r
}

/// How a platform moves.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Orbit(OrbitSpec),
    Static(StaticPlatformSpec),
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Trajectory::Orbit(o) => o.validate(),
            Trajectory::Static(s) => s.validate(),
        }
    }
}

/// Kinematic state in the Earth-fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformState {
    pub position_m: Vec3,
    pub velocity_mps: Vec3,
    pub time_s: f64,
}

impl PlatformState {
    /// Velocity in the inertial frame, expressed along Earth-fixed axes.
    pub fn inertial_velocity(&self) -> Vec3 {
        self.velocity_mps + earth_rotation_vector().cross(&self.position_m)
    }

    /// Local vertical (unit).
    pub fn up(&self) -> Vec3 {
        self.position_m.unit()
    }
}

/// Propagate a platform to time `t` (s).
pub fn propagate(trajectory: &Trajectory, t: f64) -> Result<PlatformState, GeometryError> {
    if !t.is_finite() {
        return Err(GeometryError::NonFinite("t"));
    }
    match trajectory {
        Trajectory::Orbit(orbit) => {
            orbit.validate()?;
            if t < orbit.epoch_s {
                return Err(GeometryError::BeforeEpoch {
                    t,
                    epoch: orbit.epoch_s,
                });
            }
            let (r_i, v_i) = orbit.inertial_state(t);
            let theta = earth_rotation_rate() * t;
            let rel = v_i - earth_rotation_vector().cross(&r_i);
            Ok(PlatformState {
                position_m: r_i.rotate_z(-theta),
                velocity_mps: rel.rotate_z(-theta),
                time_s: t,
            })
        }
        Trajectory::Static(site) => {
            site.validate()?;
            let ([lat, lon, alt], [dlat, dlon, dalt]) = site.site_at(t);
            let r = EARTH_RADIUS_M + alt;
            let (sl, cl) = lat.sin_cos();
            let (so, co) = lon.sin_cos();
            let radial = Vec3::new(cl * co, cl * so, sl);
            let north = Vec3::new(-sl * co, -sl * so, cl);
            let east = Vec3::new(-so, co, 0.0);
            let velocity = radial * dalt + north * (r * dlat) + east * (r * cl * dlon);
            Ok(PlatformState {
                position_m: radial * r,
                velocity_mps: velocity,
                time_s: t,
            })
        }
    }
}

/// Line-of-sight geometry between two platforms at a common instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineOfSight {
    pub range_m: f64,
    /// Elevation of `b` above the local horizon of `a`.
    pub elevation_a_rad: f64,
    /// Elevation of `a` above the local horizon of `b`.
    pub elevation_b_rad: f64,
    /// Azimuth of `b` from `a`, clockwise from north.
    pub azimuth_a_rad: f64,
    pub azimuth_b_rad: f64,
    pub range_rate_mps: f64,
    /// Inertial relative velocity component perpendicular to the line of sight.
    pub transverse_velocity_mps: f64,
    pub los_angular_rate_radps: f64,
    pub visible: bool,
}

fn local_angles(from: &Vec3, dir: &Vec3) -> (f64, f64) {
    let up = from.unit();
    let pole = Vec3::new(0.0, 0.0, 1.0);
    let east = pole.cross(&up);
    let east = if east.norm() < 1e-12 {
        // At the poles take the prime meridian as north.
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        east.unit()
    };
    let north = up.cross(&east);
    let (e, n, u) = (dir.dot(&east), dir.dot(&north), dir.dot(&up));
    let elevation = u.atan2(e.hypot(n));
    let az = e.atan2(n).rem_euclid(2.0 * PI);
    (elevation, az)
}

/// Smallest distance from the Earth centre to the segment `a`-`b`.
fn chord_clearance(a: &Vec3, b: &Vec3) -> f64 {
    let d = *b - *a;
    let len2 = d.dot(&d);
    let s = (-a.dot(&d) / len2).clamp(0.0, 1.0);
    (*a + d * s).norm()
}

/// Line-of-sight between `a` and `b`, gated by minimum elevation at each end
/// and by Earth-limb occlusion of the chord.
pub fn line_of_sight(
    a: &PlatformState,
    b: &PlatformState,
    min_elevation_a: f64,
    min_elevation_b: f64,
) -> Result<LineOfSight, GeometryError> {
    if a.time_s != b.time_s {
        return Err(GeometryError::TimeMismatch {
            a: a.time_s,
            b: b.time_s,
        });
    }
    if !(a.position_m.is_finite() && b.position_m.is_finite()) {
        return Err(GeometryError::NonFinite("position"));
    }
    let rel = b.position_m - a.position_m;
    let range = rel.norm();
    if range < 1e-6 {
        return Err(GeometryError::Coincident);
    }
    let u = rel * (1.0 / range);
    let (el_a, az_a) = local_angles(&a.position_m, &u);
    let (el_b, az_b) = local_angles(&b.position_m, &-u);

    let v_rel = b.inertial_velocity() - a.inertial_velocity();
    let range_rate = v_rel.dot(&u);
    let transverse = (v_rel - u * range_rate).norm();

    let clear = chord_clearance(&a.position_m, &b.position_m) >= EARTH_RADIUS_M - 1.0;
    let visible = clear && el_a >= min_elevation_a && el_b >= min_elevation_b;
    Ok(LineOfSight {
        range_m: range,
        elevation_a_rad: el_a,
        elevation_b_rad: el_b,
        azimuth_a_rad: az_a,
        azimuth_b_rad: az_b,
        range_rate_mps: range_rate,
        transverse_velocity_mps: transverse,
        los_angular_rate_radps: transverse / range,
        visible,
    })
}

/// Point-ahead angle in microradians for a transverse velocity (m/s).
pub fn point_ahead_urad(transverse_velocity_mps: f64) -> f64 {
    2.0 * transverse_velocity_mps / SPEED_OF_LIGHT * 1e6
}

/// A contiguous visibility window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub aos_s: f64,
    pub los_s: f64,
    pub max_elevation_rad: f64,
    pub duration_s: f64,
}

const PASS_REFINE_TOL_S: f64 = 0.1;

/// Pass search over an arbitrary visibility predicate.
///
/// `probe(t)` returns `Some(elevation)` when visible at `t` (the elevation is
/// used to report the pass maximum) and `None` otherwise. Edges are refined
/// by bisection to 0.1 s. Passes whose peak elevation does not exceed
/// `min_elevation` are discarded as grazing.
pub fn find_passes<F>(
    mut probe: F,
    t0: f64,
    t1: f64,
    step_s: f64,
    min_elevation: f64,
) -> Result<Vec<Pass>, GeometryError>
where
    F: FnMut(f64) -> Result<Option<f64>, GeometryError>,
{
    if !(t0.is_finite() && t1.is_finite() && step_s.is_finite()) {
        return Err(GeometryError::NonFinite("pass window"));
    }
    if step_s <= 0.0 {
        return Err(GeometryError::Invalid(format!(
            "pass search step must be positive, got {step_s}"
        )));
    }
    if t1 <= t0 {
        return Ok(Vec::new());
    }

    let n = ((t1 - t0) / step_s).ceil() as usize;
    let sample_t = |k: usize| (t0 + k as f64 * step_s).min(t1);

    let mut passes = Vec::new();
    let mut open: Option<(f64, f64)> = None; // (aos, max elevation)
    let mut prev_t = t0;

    for k in 0..=n {
        let t = sample_t(k);
        match (open.is_some(), probe(t)?) {
            (false, Some(el)) => {
                let aos = if k == 0 {
                    t0
                } else {
                    bisect_edge(&mut probe, prev_t, t, true)?
                };
                open = Some((aos, el));
            }
            (true, Some(el)) => {
                if let Some((_, max_el)) = open.as_mut() {
                    *max_el = max_el.max(el);
                }
            }
            (true, None) => {
                let los = bisect_edge(&mut probe, prev_t, t, false)?;
                let (aos, max_el) = open.take().expect("open pass");
                push_pass(&mut passes, aos, los, max_el, min_elevation);
            }
            (false, None) => {}
        }
        prev_t = t;
        if t >= t1 {
            break;
        }
    }
    if let Some((aos, max_el)) = open {
        push_pass(&mut passes, aos, t1, max_el, min_elevation);
    }
    Ok(passes)
}

fn push_pass(passes: &mut Vec<Pass>, aos: f64, los: f64, max_el: f64, min_el: f64) {
    if los > aos && max_el > min_el {
        passes.push(Pass {
            aos_s: aos,
            los_s: los,
            max_elevation_rad: max_el,
            duration_s: los - aos,
        });
    }
}

/// Locate the visibility edge in `[lo, hi]`. For a rising edge `lo` is
/// invisible and `hi` visible; for a setting edge the reverse. Returns the
/// visible-side bound once the bracket is within tolerance.
fn bisect_edge<F>(probe: &mut F, mut lo: f64, mut hi: f64, rising: bool) -> Result<f64, GeometryError>
where
    F: FnMut(f64) -> Result<Option<f64>, GeometryError>,
{
    while hi - lo > PASS_REFINE_TOL_S {
        let mid = 0.5 * (lo + hi);
        let vis = probe(mid)?.is_some();
        if vis == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if rising { hi } else { lo })
}

/// Passes of an orbiting platform over an Earth-fixed one.
pub fn predict_passes(
    mobile: &OrbitSpec,
    fixed: &StaticPlatformSpec,
    min_elevation: f64,
    t0: f64,
    t1: f64,
    step_s: f64,
) -> Result<Vec<Pass>, GeometryError> {
    mobile.validate()?;
    fixed.validate()?;
    let mobile = Trajectory::Orbit(*mobile);
    let fixed = Trajectory::Static(fixed.clone());
    find_passes(
        |t| {
            let a = propagate(&fixed, t)?;
            let b = propagate(&mobile, t)?;
            let los = line_of_sight(&a, &b, min_elevation, -FRAC_PI_2)?;
            Ok(los.visible.then_some(los.elevation_a_rad))
        },
        t0,
        t1,
        step_s,
        min_elevation,
    )
}
