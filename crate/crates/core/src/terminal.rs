//! Terminal parameter sets: optics, transmit amplifier envelope, wavelength
//! plan and field of regard, with the three built-in optical heads.
//!
//! Serialized units: meters, nanometers, watts, seconds, degrees.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datalink::ModemProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerminalError {
    #[error("wavefront error {0} waves RMS is outside [0, 0.25)")]
    WavefrontOutOfRange(f64),
    #[error("invalid terminal profile: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Two-step transmit power envelope of the optical amplifier over
/// cumulative on-time, with a hard thermal cutoff after the second step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdfaEnvelope {
    pub p_high_w: f64,
    pub t_high_max_s: f64,
    pub p_low_w: f64,
    pub t_low_max_s: f64,
}

impl Default for EdfaEnvelope {
    fn default() -> Self {
        EdfaEnvelope {
            p_high_w: 2.0,
            t_high_max_s: 600.0,
            p_low_w: 1.6,
            t_low_max_s: 3600.0,
        }
    }
}

impl EdfaEnvelope {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p_low_w > 0.0 && self.p_high_w >= self.p_low_w) {
            out.push(format!(
                "EDFA envelope needs p_high_w >= p_low_w > 0, got {} / {}",
                self.p_high_w, self.p_low_w
            ));
        }
        if !(self.t_high_max_s > 0.0 && self.t_low_max_s >= self.t_high_max_s) {
            out.push(format!(
                "EDFA envelope needs t_low_max_s >= t_high_max_s > 0, got {} / {}",
                self.t_low_max_s, self.t_high_max_s
            ));
        }
        out
    }
}

/// Transmit power the amplifier can hold after `cumulative_on_time_s` of
/// operation.
pub fn available_tx_power(envelope: &EdfaEnvelope, cumulative_on_time_s: f64) -> f64 {
    if cumulative_on_time_s <= envelope.t_high_max_s {
        envelope.p_high_w
    } else if cumulative_on_time_s <= envelope.t_low_max_s {
        envelope.p_low_w
    } else {
        0.0
    }
}

/// Gimbal coverage. Elevation is measured from the plane perpendicular to
/// the gimbal azimuth axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfRegard {
    pub azimuth_full_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
}

impl FieldOfRegard {
    pub fn symmetric(elevation_half_deg: f64) -> Self {
        FieldOfRegard {
            azimuth_full_deg: 360.0,
            elevation_min_deg: -elevation_half_deg,
            elevation_max_deg: elevation_half_deg,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.elevation_min_deg < self.elevation_max_deg) {
            out.push(format!(
                "field of regard elevation_min_deg ({}) must be below elevation_max_deg ({})",
                self.elevation_min_deg, self.elevation_max_deg
            ));
        }
        if !(self.azimuth_full_deg > 0.0 && self.azimuth_full_deg <= 360.0) {
            out.push(format!(
                "field of regard azimuth_full_deg must lie in (0, 360], got {}",
                self.azimuth_full_deg
            ));
        }
        out
    }
}

/// Whether a gimbal-frame direction lies inside the field of regard. The
/// elevation interval is closed. A partial azimuth range is centred on 0°.
pub fn in_field_of_regard(field: &FieldOfRegard, azimuth_deg: f64, elevation_deg: f64) -> bool {
    if !(azimuth_deg.is_finite() && elevation_deg.is_finite()) {
        return false;
    }
    let el_ok = elevation_deg >= field.elevation_min_deg && elevation_deg <= field.elevation_max_deg;
    let az_ok = field.azimuth_full_deg >= 360.0 || {
        let wrapped = (azimuth_deg + 180.0).rem_euclid(360.0) - 180.0;
        wrapped.abs() <= field.azimuth_full_deg / 2.0
    };
    el_ok && az_ok
}

/// Acquisition beacon and coarse detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconSpec {
    pub power_w: f64,
    pub divergence_full_urad: f64,
    pub detector_sensitivity_dbm: f64,
}

impl Default for BeaconSpec {
    fn default() -> Self {
        BeaconSpec {
            power_w: 1.0,
            divergence_full_urad: 200.0,
            detector_sensitivity_dbm: -80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalProfile {
    pub name: String,
    /// Worst-case operating scenario of the optical head, informational.
    #[serde(default)]
    pub max_range_scenario: String,
    pub aperture_m: f64,
    pub optics_transmission: f64,
    /// RMS wavefront error as a fraction of the wavelength.
    pub wavefront_error_rms_waves: f64,
    pub wavelength_tx_nm: f64,
    pub wavelength_rx_nm: f64,
    pub wdm_channels_per_direction: u32,
    pub tx_power_nominal_w: f64,
    pub edfa_envelope: EdfaEnvelope,
    pub field_of_regard: FieldOfRegard,
    pub fine_pointing_accuracy_urad: f64,
    pub fine_loop_bandwidth_hz: f64,
    /// Full-angle field of view of the coarse acquisition detector.
    pub coarse_fov_deg: f64,
    pub modem: ModemProfile,
    pub circular_polarization_compat: bool,
    pub beacon: BeaconSpec,
}

impl TerminalProfile {
    pub fn wavelength_tx_m(&self) -> f64 {
        self.wavelength_tx_nm * 1e-9
    }

    pub fn wavelength_rx_m(&self) -> f64 {
        self.wavelength_rx_nm * 1e-9
    }

    /// Aggregate data rate across all WDM channels of one direction.
    pub fn data_rate_bps(&self) -> f64 {
        self.modem.rate_bps * self.wdm_channels_per_direction as f64
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.aperture_m > 0.0 && self.aperture_m.is_finite()) {
            out.push(format!("aperture_m must be positive, got {}", self.aperture_m));
        }
        if !(self.optics_transmission > 0.0 && self.optics_transmission <= 1.0) {
            out.push(format!(
                "optics_transmission must lie in (0, 1], got {}",
                self.optics_transmission
            ));
        }
        if !(self.wavefront_error_rms_waves >= 0.0 && self.wavefront_error_rms_waves < 0.25) {
            out.push(format!(
                "wavefront_error_rms_waves must lie in [0, 0.25), got {}",
                self.wavefront_error_rms_waves
            ));
        }
        if !(self.wavelength_tx_nm > 0.0 && self.wavelength_rx_nm > 0.0) {
            out.push("wavelengths must be positive".into());
        } else if self.wavelength_tx_nm == self.wavelength_rx_nm {
            out.push(format!(
                "wavelength_tx_nm and wavelength_rx_nm must differ, both are {}",
                self.wavelength_tx_nm
            ));
        }
        if !(1..=4).contains(&self.wdm_channels_per_direction) {
            out.push(format!(
                "wdm_channels_per_direction must lie in [1, 4], got {}",
                self.wdm_channels_per_direction
            ));
        }
        if !(self.tx_power_nominal_w > 0.0 && self.tx_power_nominal_w.is_finite()) {
            out.push(format!(
                "tx_power_nominal_w must be positive, got {}",
                self.tx_power_nominal_w
            ));
        }
        if !(self.fine_pointing_accuracy_urad > 0.0) {
            out.push(format!(
                "fine_pointing_accuracy_urad must be positive, got {}",
                self.fine_pointing_accuracy_urad
            ));
        }
        if !(self.fine_loop_bandwidth_hz > 0.0) {
            out.push(format!(
                "fine_loop_bandwidth_hz must be positive, got {}",
                self.fine_loop_bandwidth_hz
            ));
        }
        if !(self.coarse_fov_deg > 0.0) {
            out.push(format!("coarse_fov_deg must be positive, got {}", self.coarse_fov_deg));
        }
        if !(self.beacon.power_w > 0.0 && self.beacon.divergence_full_urad > 0.0) {
            out.push("beacon power_w and divergence_full_urad must be positive".into());
        }
        out.extend(self.edfa_envelope.problems());
        out.extend(self.field_of_regard.problems());
        out.extend(self.modem.problems());
        out
    }

    pub fn validate(&self) -> Result<(), TerminalError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TerminalError::Invalid(problems))
        }
    }
}

fn common_profile(name: &str, scenario: &str, aperture_m: f64, half_el: f64) -> TerminalProfile {
    TerminalProfile {
        name: name.into(),
        max_range_scenario: scenario.into(),
        aperture_m,
        optics_transmission: 0.93,
        wavefront_error_rms_waves: 1.0 / 19.0,
        wavelength_tx_nm: 1550.0,
        wavelength_rx_nm: 1540.0,
        wdm_channels_per_direction: 1,
        tx_power_nominal_w: 2.0,
        edfa_envelope: EdfaEnvelope::default(),
        field_of_regard: FieldOfRegard::symmetric(half_el),
        fine_pointing_accuracy_urad: 1.0,
        fine_loop_bandwidth_hz: 500.0,
        coarse_fov_deg: 1.0,
        modem: ModemProfile::ten_gigabit(),
        circular_polarization_compat: true,
        beacon: BeaconSpec::default(),
    }
}

/// The three built-in optical heads.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinProfiles {
    pub hicali: TerminalProfile,
    pub fx: TerminalProfile,
    pub st: TerminalProfile,
}

impl BuiltinProfiles {
    pub fn all(&self) -> [&TerminalProfile; 3] {
        [&self.hicali, &self.fx, &self.st]
    }
}

pub fn builtin_profiles() -> BuiltinProfiles {
    BuiltinProfiles {
        hicali: common_profile("HICALI", "GEO-ground (2 ways)", 0.15, 10.0),
        fx: common_profile("FX", "LEO-GEO (1 way), LEO-LEO (2 ways)", 0.09, 90.0),
        st: common_profile("ST", "LEO-ground (1 way), HAPS-ground (2 ways)", 0.03, 90.0),
    }
}

/// Look up a built-in profile by name, ignoring case.
pub fn builtin_profile(name: &str) -> Option<TerminalProfile> {
    let b = builtin_profiles();
    match name.to_ascii_uppercase().as_str() {
        "HICALI" => Some(b.hicali),
        "FX" => Some(b.fx),
        "ST" => Some(b.st),
        _ => None,
    }
}

/// Diffraction-limited full-angle 1/e² divergence of a Gaussian beam whose
/// waist fills the aperture.
pub fn diffraction_divergence_rad(wavelength_m: f64, aperture_m: f64) -> f64 {
    4.0 * wavelength_m / (PI * aperture_m)
}

pub fn beam_divergence(profile: &TerminalProfile) -> f64 {
    diffraction_divergence_rad(profile.wavelength_tx_m(), profile.aperture_m)
}

/// Maréchal loss for an RMS wavefront error in waves.
pub fn strehl_penalty_db(wavefront_error_rms_waves: f64) -> Result<f64, TerminalError> {
    let sigma = wavefront_error_rms_waves;
    if !(0.0..0.25).contains(&sigma) {
        return Err(TerminalError::WavefrontOutOfRange(sigma));
    }
    let phase = 2.0 * PI * sigma;
    Ok(-10.0 * (-phase * phase).exp().log10())
}

/// Limits applied when checking a wavelength-duplex plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplexPolicy {
    pub band_gap_nm: f64,
    pub band_min_nm: f64,
    pub band_max_nm: f64,
    /// WDM grid spacing; channel k sits at base + k·spacing.
    pub channel_spacing_nm: f64,
}

impl Default for DuplexPolicy {
    fn default() -> Self {
        DuplexPolicy {
            band_gap_nm: 10.0,
            band_min_nm: 1530.0,
            band_max_nm: 1565.0,
            channel_spacing_nm: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DuplexConflict {
    /// A transmitter and the opposite receiver are tuned differently.
    PlanMismatch { tx_nm: f64, rx_nm: f64 },
    /// A terminal's transmit and receive bands are closer than the gap.
    BandGap { terminal: String, gap_nm: f64, required_nm: f64 },
    OutOfBand { terminal: String, wavelength_nm: f64 },
}

impl DuplexConflict {
    fn sort_key(&self) -> (u8, String, u64, u64) {
        match self {
            DuplexConflict::PlanMismatch { tx_nm, rx_nm } => {
                (0, String::new(), tx_nm.to_bits(), rx_nm.to_bits())
            }
            DuplexConflict::BandGap { terminal, gap_nm, .. } => {
                (1, terminal.clone(), gap_nm.to_bits(), 0)
            }
            DuplexConflict::OutOfBand { terminal, wavelength_nm } => {
                (2, terminal.clone(), wavelength_nm.to_bits(), 0)
            }
        }
    }
}

impl std::fmt::Display for DuplexConflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DuplexConflict::PlanMismatch { tx_nm, rx_nm } => {
                write!(f, "transmitter at {tx_nm} nm faces a receiver at {rx_nm} nm")
            }
            DuplexConflict::BandGap { terminal, gap_nm, required_nm } => write!(
                f,
                "{terminal}: band gap {gap_nm:.3} nm < {required_nm} nm"
            ),
            DuplexConflict::OutOfBand { terminal, wavelength_nm } => {
                write!(f, "{terminal}: channel at {wavelength_nm:.3} nm outside C-band")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplexReport {
    pub conflicts: Vec<DuplexConflict>,
}

impl DuplexReport {
    pub fn is_ok(&self) -> bool {
        self.conflicts.is_empty()
    }
}

const WAVELENGTH_TOL_NM: f64 = 1e-6;

fn channels(base_nm: f64, count: u32, spacing_nm: f64) -> impl Iterator<Item = f64> {
    (0..count.max(1)).map(move |k| base_nm + k as f64 * spacing_nm)
}

fn terminal_conflicts(t: &TerminalProfile, policy: &DuplexPolicy, out: &mut Vec<DuplexConflict>) {
    let n = t.wdm_channels_per_direction;
    let tx: Vec<f64> = channels(t.wavelength_tx_nm, n, policy.channel_spacing_nm).collect();
    let rx: Vec<f64> = channels(t.wavelength_rx_nm, n, policy.channel_spacing_nm).collect();
    let gap = tx
        .iter()
        .flat_map(|a| rx.iter().map(move |b| (a - b).abs()))
        .fold(f64::INFINITY, f64::min);
    if gap + WAVELENGTH_TOL_NM < policy.band_gap_nm {
        out.push(DuplexConflict::BandGap {
            terminal: t.name.clone(),
            gap_nm: gap,
            required_nm: policy.band_gap_nm,
        });
    }
    for w in tx.into_iter().chain(rx) {
        if w < policy.band_min_nm - WAVELENGTH_TOL_NM || w > policy.band_max_nm + WAVELENGTH_TOL_NM {
            out.push(DuplexConflict::OutOfBand {
                terminal: t.name.clone(),
                wavelength_nm: w,
            });
        }
    }
}

/// Check that two terminals can face each other under wavelength-only
/// transmit/receive discrimination. Conflicts are reported in a canonical
/// order so the result does not depend on argument order.
pub fn duplex_plan_check(
    a: &TerminalProfile,
    b: &TerminalProfile,
    policy: &DuplexPolicy,
) -> DuplexReport {
    let mut conflicts = Vec::new();
    for (tx, rx) in [(a, b), (b, a)] {
        if (tx.wavelength_tx_nm - rx.wavelength_rx_nm).abs() > WAVELENGTH_TOL_NM {
            conflicts.push(DuplexConflict::PlanMismatch {
                tx_nm: tx.wavelength_tx_nm,
                rx_nm: rx.wavelength_rx_nm,
            });
        }
    }
    terminal_conflicts(a, policy, &mut conflicts);
    terminal_conflicts(b, policy, &mut conflicts);
    conflicts.sort_by_key(|c| c.sort_key());
    conflicts.dedup();
    DuplexReport { conflicts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(tx: f64, rx: f64) -> (TerminalProfile, TerminalProfile) {
        let mut a = builtin_profiles().fx;
        a.wavelength_tx_nm = tx;
        a.wavelength_rx_nm = rx;
        let mut b = a.clone();
        b.name = "FX-b".into();
        b.wavelength_tx_nm = rx;
        b.wavelength_rx_nm = tx;
        (a, b)
    }

    #[test]
    fn builtins_match_table() {
        let b = builtin_profiles();
        assert_eq!(b.hicali.aperture_m, 0.15);
        assert_eq!(b.fx.aperture_m, 0.09);
        assert_eq!(b.st.aperture_m, 0.03);
        assert_eq!(b.fx.optics_transmission, 0.93);
        assert_eq!(b.fx.wavefront_error_rms_waves, 1.0 / 19.0);
        assert_eq!(b.hicali.field_of_regard, FieldOfRegard::symmetric(10.0));
        assert_eq!(b.fx.field_of_regard.elevation_min_deg, -90.0);
        for p in b.all() {
            assert!(p.validate().is_ok(), "{}", p.name);
            assert_eq!(p.modem.rate_bps, 10e9);
            assert_eq!(p.fine_pointing_accuracy_urad, 1.0);
            assert_eq!(p.fine_loop_bandwidth_hz, 500.0);
            assert_eq!(p.coarse_fov_deg, 1.0);
            assert_eq!(p.wavelength_tx_nm, 1550.0);
            assert_eq!(p.edfa_envelope, EdfaEnvelope::default());
        }
        assert_eq!(builtin_profile("fx").unwrap().name, "FX");
        assert!(builtin_profile("XX").is_none());
    }

    #[test]
    fn divergence_values() {
        let b = builtin_profiles();
        let fx = beam_divergence(&b.fx) * 1e6;
        let st = beam_divergence(&b.st) * 1e6;
        assert!((fx - 21.9).abs() < 0.1, "{fx}");
        assert!((st - 65.8).abs() < 0.2, "{st}");
        assert!((st / fx - 3.0).abs() < 1e-12);
        assert_eq!(
            diffraction_divergence_rad(3100e-9, 0.09),
            2.0 * diffraction_divergence_rad(1550e-9, 0.09)
        );
    }

    #[test]
    fn strehl_values() {
        assert_eq!(strehl_penalty_db(0.0).unwrap(), 0.0);
        assert!((strehl_penalty_db(1.0 / 19.0).unwrap() - 0.475).abs() < 0.005);
        assert!((strehl_penalty_db(1.0 / 14.0).unwrap() - 0.88).abs() < 0.01);
        assert!(strehl_penalty_db(0.25).is_err());
        assert!(strehl_penalty_db(-0.01).is_err());
    }

    #[test]
    fn edfa_staircase() {
        let e = EdfaEnvelope::default();
        assert_eq!(available_tx_power(&e, 0.0), 2.0);
        assert_eq!(available_tx_power(&e, 300.0), 2.0);
        assert_eq!(available_tx_power(&e, 600.0), 2.0);
        assert_eq!(available_tx_power(&e, 1800.0), 1.6);
        assert_eq!(available_tx_power(&e, 3600.0), 1.6);
        assert_eq!(available_tx_power(&e, 4000.0), 0.0);
    }

    #[test]
    fn duplex_examples() {
        let (a, b) = pair(1545.0, 1555.0);
        assert!(duplex_plan_check(&a, &b, &DuplexPolicy::default()).is_ok());

        let (a, b) = pair(1550.0, 1552.0);
        let r = duplex_plan_check(&a, &b, &DuplexPolicy::default());
        assert!(r
            .conflicts
            .iter()
            .any(|c| matches!(c, DuplexConflict::BandGap { gap_nm, .. } if (gap_nm - 2.0).abs() < 1e-9)));

        let (a, b) = pair(1520.0, 1550.0);
        let r = duplex_plan_check(&a, &b, &DuplexPolicy::default());
        assert!(r
            .conflicts
            .iter()
            .any(|c| matches!(c, DuplexConflict::OutOfBand { wavelength_nm, .. } if *wavelength_nm == 1520.0)));

        // Two identical plans face each other with both transmitters at 1550 nm.
        let fx = builtin_profiles().fx;
        let r = duplex_plan_check(&fx, &fx, &DuplexPolicy::default());
        assert!(r.conflicts.iter().any(|c| matches!(c, DuplexConflict::PlanMismatch { .. })));
    }

    #[test]
    fn wdm_channels_must_fit_band() {
        let (mut a, mut b) = pair(1540.0, 1560.0);
        a.wdm_channels_per_direction = 4;
        b.wdm_channels_per_direction = 4;
        // rx channels of a reach 1562.4 nm, still inside.
        assert!(duplex_plan_check(&a, &b, &DuplexPolicy::default()).is_ok());
        let (mut a, mut b) = pair(1545.0, 1564.0);
        a.wdm_channels_per_direction = 4;
        b.wdm_channels_per_direction = 4;
        assert!(!duplex_plan_check(&a, &b, &DuplexPolicy::default()).is_ok());
    }

    #[test]
    fn field_of_regard_examples() {
        let b = builtin_profiles();
        assert!(!in_field_of_regard(&b.hicali.field_of_regard, 0.0, 25.0));
        assert!(in_field_of_regard(&b.fx.field_of_regard, 123.0, -80.0));
        assert!(in_field_of_regard(&b.hicali.field_of_regard, 0.0, 10.0));
        assert!(in_field_of_regard(&b.hicali.field_of_regard, 0.0, -10.0));
        let partial = FieldOfRegard { azimuth_full_deg: 90.0, ..b.fx.field_of_regard };
        assert!(in_field_of_regard(&partial, 350.0, 0.0));
        assert!(!in_field_of_regard(&partial, 90.0, 0.0));
    }

    #[test]
    fn profile_validation_lists_every_problem() {
        let mut p = builtin_profiles().st;
        p.aperture_m = 0.0;
        p.optics_transmission = 1.5;
        p.wdm_channels_per_direction = 5;
        match p.validate() {
            Err(TerminalError::Invalid(list)) => assert_eq!(list.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn divergence_monotone(d in 0.01f64..1.0, k in 1.01f64..3.0, lambda in 1000e-9f64..2000e-9) {
            prop_assert!(diffraction_divergence_rad(lambda, d * k) < diffraction_divergence_rad(lambda, d));
            prop_assert!(diffraction_divergence_rad(lambda * k, d) > diffraction_divergence_rad(lambda, d));
        }

        #[test]
        fn strehl_monotone(s in 0.0f64..0.24, ds in 1e-4f64..0.009) {
            prop_assert!(strehl_penalty_db(s + ds).unwrap() > strehl_penalty_db(s).unwrap());
        }

        #[test]
        fn edfa_non_increasing(t in 0.0f64..5000.0, dt in 0.0f64..1000.0) {
            let e = EdfaEnvelope::default();
            prop_assert!(available_tx_power(&e, t + dt) <= available_tx_power(&e, t));
        }

        #[test]
        fn duplex_check_symmetric(
            ta in 1500.0f64..1580.0, ra in 1500.0f64..1580.0,
            tb in 1500.0f64..1580.0, rb in 1500.0f64..1580.0,
            na in 1u32..=4, nb in 1u32..=4,
        ) {
            let mut a = builtin_profiles().fx;
            a.wavelength_tx_nm = ta; a.wavelength_rx_nm = ra; a.wdm_channels_per_direction = na;
            let mut b = builtin_profiles().st;
            b.wavelength_tx_nm = tb; b.wavelength_rx_nm = rb; b.wdm_channels_per_direction = nb;
            let p = DuplexPolicy::default();
            prop_assert_eq!(duplex_plan_check(&a, &b, &p), duplex_plan_check(&b, &a, &p));
        }

        #[test]
        fn profile_round_trip(
            aperture in 0.01f64..1.0,
            trans in 0.01f64..1.0,
            wfe in 0.0f64..0.24,
            tx in 1530.0f64..1565.0,
            n in 1u32..=4,
            p_low in 0.1f64..2.0,
            compat in any::<bool>(),
        ) {
            let mut p = builtin_profiles().fx;
            p.aperture_m = aperture;
            p.optics_transmission = trans;
            p.wavefront_error_rms_waves = wfe;
            p.wavelength_tx_nm = tx;
            p.wdm_channels_per_direction = n;
            p.edfa_envelope.p_low_w = p_low;
            p.circular_polarization_compat = compat;
            let text = serde_json::to_string(&p).unwrap();
            let back: TerminalProfile = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
