//! Pointing, acquisition and tracking.
//!
//! One [`PatState`] per link end, advanced by [`step`]. The fine loop is not
//! simulated at its own rate; its residual jitter comes from
//! [`fine_loop_residual`] when fine tracking starts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    GpsExchange,
    Discovery,
    CoarseAcquisition,
    FineTracking,
    Communicating,
    LostTrack,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::GpsExchange => "GpsExchange",
            Phase::Discovery => "Discovery",
            Phase::CoarseAcquisition => "CoarseAcquisition",
            Phase::FineTracking => "FineTracking",
            Phase::Communicating => "Communicating",
            Phase::LostTrack => "LostTrack",
        }
    }

    pub fn is_tracking(&self) -> bool {
        matches!(
            self,
            Phase::CoarseAcquisition | Phase::FineTracking | Phase::Communicating
        )
    }

    /// Position along the acquisition sequence; `LostTrack` ranks lowest.
    pub fn progress(&self) -> u8 {
        match self {
            Phase::LostTrack => 0,
            Phase::Idle => 1,
            Phase::GpsExchange => 2,
            Phase::Discovery => 3,
            Phase::CoarseAcquisition => 4,
            Phase::FineTracking => 5,
            Phase::Communicating => 6,
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReacquirePolicy {
    /// Rescan the full open-loop uncertainty before coarse acquisition.
    RestartCoarse,
    /// Go straight back to coarse acquisition and wait for the beacon.
    RestartFine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub frequency_hz: f64,
    /// Peak amplitude.
    pub amplitude_urad: f64,
}

/// Platform angular disturbance seen by the fine loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    #[serde(default)]
    pub tones: Vec<Tone>,
    #[serde(default)]
    pub white_rms_urad: f64,
    /// Upper edge of the flat white-jitter spectrum.
    #[serde(default = "default_white_bandwidth")]
    pub white_bandwidth_hz: f64,
}

fn default_white_bandwidth() -> f64 {
    5000.0
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec {
            tones: Vec::new(),
            white_rms_urad: 0.0,
            white_bandwidth_hz: default_white_bandwidth(),
        }
    }
}

impl DisturbanceSpec {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, t) in self.tones.iter().enumerate() {
            if !(t.frequency_hz > 0.0 && t.frequency_hz.is_finite()) {
                out.push(format!("tone {i}: frequency_hz must be positive"));
            }
            if !(t.amplitude_urad >= 0.0 && t.amplitude_urad.is_finite()) {
                out.push(format!("tone {i}: amplitude_urad must be non-negative"));
            }
        }
        if !(self.white_rms_urad >= 0.0) {
            out.push("white_rms_urad must be non-negative".into());
        }
        if !(self.white_bandwidth_hz > 0.0) {
            out.push("white_bandwidth_hz must be positive".into());
        }
        out
    }
}

/// |S(f)| of a first-order loop with -3 dB frequency `bandwidth_hz`.
pub fn sensitivity_magnitude(frequency_hz: f64, bandwidth_hz: f64) -> f64 {
    let x = frequency_hz / bandwidth_hz;
    x / (1.0 + x * x).sqrt()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// RMS tracking residual (µrad) left by the fine loop.
pub fn fine_loop_residual(disturbance: &DisturbanceSpec, loop_bandwidth_hz: f64) -> f64 {
    let tones: f64 = disturbance
        .tones
        .iter()
        .map(|t| {
            let r = t.amplitude_urad * sensitivity_magnitude(t.frequency_hz, loop_bandwidth_hz);
            r * r / 2.0
        })
        .sum();
    let white = if disturbance.white_rms_urad > 0.0 {
        let fmax = disturbance.white_bandwidth_hz;
        let passed = simpson(
            |f| sensitivity_magnitude(f, loop_bandwidth_hz).powi(2),
            0.0,
            fmax,
            4096,
        ) / fmax;
        disturbance.white_rms_urad.powi(2) * passed
    } else {
        0.0
    };
    (tones + white).sqrt()
}

/// Number of detector looks a spiral scan needs to cover the uncertainty
/// cone, with 20% overlap between cells.
pub fn scan_cells(uncertainty_full_deg: f64, fov_full_deg: f64) -> u64 {
    if uncertainty_full_deg <= fov_full_deg {
        return 1;
    }
    let area_ratio = (uncertainty_full_deg / fov_full_deg).powi(2);
    let cells = (area_ratio - 1e-9).ceil() as u64;
    (6 * cells).div_ceil(5)
}

pub fn coarse_scan_time(uncertainty_full_deg: f64, fov_full_deg: f64, dwell_s: f64) -> f64 {
    scan_cells(uncertainty_full_deg, fov_full_deg) as f64 * dwell_s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatConfig {
    pub coarse_fov_full_deg: f64,
    pub fine_accuracy_urad: f64,
    pub loop_bandwidth_hz: f64,
    pub gps_exchange_duration_s: f64,
    pub discovery_timeout_s: f64,
    pub scan_dwell_s: f64,
    /// Open-loop pointing uncertainty (full angle) after position exchange.
    pub initial_uncertainty_deg: f64,
    pub reacquire_policy: ReacquirePolicy,
    pub disturbance: DisturbanceSpec,
}

impl Default for PatConfig {
    fn default() -> Self {
        PatConfig {
            coarse_fov_full_deg: 1.0,
            fine_accuracy_urad: 1.0,
            loop_bandwidth_hz: 500.0,
            gps_exchange_duration_s: 5.0,
            discovery_timeout_s: 60.0,
            scan_dwell_s: 0.1,
            initial_uncertainty_deg: 0.5,
            reacquire_policy: ReacquirePolicy::RestartCoarse,
            disturbance: DisturbanceSpec::default(),
        }
    }
}

impl PatConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("coarse_fov_full_deg", self.coarse_fov_full_deg),
            ("fine_accuracy_urad", self.fine_accuracy_urad),
            ("loop_bandwidth_hz", self.loop_bandwidth_hz),
            ("gps_exchange_duration_s", self.gps_exchange_duration_s),
            ("discovery_timeout_s", self.discovery_timeout_s),
            ("scan_dwell_s", self.scan_dwell_s),
            ("initial_uncertainty_deg", self.initial_uncertainty_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        out.extend(self.disturbance.problems());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatState {
    pub phase: Phase,
    pub phase_entry_time_s: f64,
    pub time_s: f64,
    /// Fine-loop residual; present only while fine tracking or communicating.
    pub residual_jitter_rms_urad: Option<f64>,
    pub open_loop_uncertainty_rad: f64,
    /// Scan time spent in Discovery with the peer inside the field of regard.
    pub scan_elapsed_s: f64,
}

impl PatState {
    pub fn new(config: &PatConfig, time_s: f64) -> Self {
        PatState {
            phase: Phase::Idle,
            phase_entry_time_s: time_s,
            time_s,
            residual_jitter_rms_urad: None,
            open_loop_uncertainty_rad: config.initial_uncertainty_deg.to_radians(),
            scan_elapsed_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatInputs {
    /// A link to the peer is scheduled.
    pub commanded: bool,
    pub los_visible: bool,
    pub peer_position_known: bool,
    pub beacon_detected: bool,
    pub in_field_of_regard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatEvent {
    pub time_s: f64,
    pub from: Phase,
    pub to: Phase,
    pub reason: &'static str,
}

const TIME_EPS: f64 = 1e-9;

/// Advance one end of a link by `dt_s`. At most one transition happens per
/// step; it is stamped with the end time of the step.
pub fn step(
    state: &PatState,
    config: &PatConfig,
    inputs: &PatInputs,
    dt_s: f64,
) -> (PatState, Option<PatEvent>) {
    let mut next = state.clone();
    let now = state.time_s + dt_s;
    next.time_s = now;
    let in_phase = now - state.phase_entry_time_s;

    let transition = decide(state, config, inputs, dt_s, in_phase, &mut next);
    match transition {
        Some((to, reason)) => {
            let event = PatEvent {
                time_s: now,
                from: state.phase,
                to,
                reason,
            };
            enter(&mut next, config, to, now);
            (next, Some(event))
        }
        None => (next, None),
    }
}

fn decide(
    state: &PatState,
    config: &PatConfig,
    inputs: &PatInputs,
    dt_s: f64,
    in_phase: f64,
    next: &mut PatState,
) -> Option<(Phase, &'static str)> {
    use Phase::*;
    let phase = state.phase;
    if phase != Idle && !inputs.commanded {
        return Some((Idle, "link_released"));
    }
    if !matches!(phase, Idle | LostTrack) && !inputs.los_visible {
        return Some((LostTrack, "los_blocked"));
    }
    if phase.is_tracking() && !inputs.in_field_of_regard {
        return Some((LostTrack, "left_field_of_regard"));
    }
    match phase {
        Idle => (inputs.commanded && inputs.los_visible).then_some((GpsExchange, "link_commanded")),
        GpsExchange => (in_phase + TIME_EPS >= config.gps_exchange_duration_s
            && inputs.peer_position_known)
            .then_some((Discovery, "position_exchanged")),
        Discovery => {
            if inputs.in_field_of_regard {
                next.scan_elapsed_s += dt_s;
            }
            let needed = coarse_scan_time(
                state.open_loop_uncertainty_rad.to_degrees(),
                config.coarse_fov_full_deg,
                config.scan_dwell_s,
            );
            if inputs.in_field_of_regard && next.scan_elapsed_s + TIME_EPS >= needed {
                Some((CoarseAcquisition, "scan_complete"))
            } else if in_phase + TIME_EPS >= config.discovery_timeout_s {
                Some((GpsExchange, "discovery_timeout"))
            } else {
                None
            }
        }
        CoarseAcquisition => inputs.beacon_detected.then_some((FineTracking, "beacon_detected")),
        FineTracking => {
            if !inputs.beacon_detected {
                Some((LostTrack, "beacon_lost"))
            } else {
                match state.residual_jitter_rms_urad {
                    Some(r) if r <= config.fine_accuracy_urad => {
                        Some((Communicating, "residual_within_accuracy"))
                    }
                    _ => None,
                }
            }
        }
        Communicating => (!inputs.beacon_detected).then_some((LostTrack, "beacon_lost")),
        LostTrack => {
            if !(inputs.los_visible && inputs.in_field_of_regard) {
                None
            } else if !inputs.peer_position_known {
                Some((GpsExchange, "reacquire"))
            } else {
                match config.reacquire_policy {
                    ReacquirePolicy::RestartCoarse => Some((Discovery, "reacquire")),
                    ReacquirePolicy::RestartFine => Some((CoarseAcquisition, "reacquire")),
                }
            }
        }
    }
}

fn enter(state: &mut PatState, config: &PatConfig, to: Phase, now: f64) {
    let from = state.phase;
    state.phase = to;
    state.phase_entry_time_s = now;
    match to {
        Phase::Discovery => {
            state.scan_elapsed_s = 0.0;
            if from == Phase::LostTrack || from == Phase::GpsExchange {
                state.open_loop_uncertainty_rad = config.initial_uncertainty_deg.to_radians();
            }
        }
        Phase::CoarseAcquisition => {
            let fov = config.coarse_fov_full_deg.to_radians();
            state.open_loop_uncertainty_rad = state.open_loop_uncertainty_rad.min(fov);
        }
        Phase::FineTracking => {
            state.residual_jitter_rms_urad =
                Some(fine_loop_residual(&config.disturbance, config.loop_bandwidth_hz));
        }
        _ => {}
    }
    if !matches!(to, Phase::FineTracking | Phase::Communicating) {
        state.residual_jitter_rms_urad = None;
    }
}

/// Time from the first link command to the first entry into
/// `Communicating` after it, if the trace gets there.
pub fn acquisition_time(events: &[PatEvent]) -> Option<f64> {
    let start = events
        .iter()
        .position(|e| e.from == Phase::Idle && e.to == Phase::GpsExchange)?;
    let t0 = events[start].time_s;
    events[start..]
        .iter()
        .find(|e| e.to == Phase::Communicating)
        .map(|e| e.time_s - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn happy() -> PatInputs {
        PatInputs {
            commanded: true,
            los_visible: true,
            peer_position_known: true,
            beacon_detected: true,
            in_field_of_regard: true,
        }
    }

    fn run(config: &PatConfig, inputs: &[PatInputs], dt: f64) -> (PatState, Vec<PatEvent>) {
        let mut s = PatState::new(config, 0.0);
        let mut events = Vec::new();
        for i in inputs {
            let (n, e) = step(&s, config, i, dt);
            events.extend(e);
            s = n;
        }
        (s, events)
    }

    #[test]
    fn happy_path_reaches_communicating() {
        let cfg = PatConfig::default();
        let (s, events) = run(&cfg, &vec![happy(); 60], 0.1);
        assert_eq!(s.phase, Phase::Communicating);
        assert_eq!(s.residual_jitter_rms_urad, Some(0.0));
        let phases: Vec<Phase> = events.iter().map(|e| e.to).collect();
        assert_eq!(
            phases,
            vec![
                Phase::GpsExchange,
                Phase::Discovery,
                Phase::CoarseAcquisition,
                Phase::FineTracking,
                Phase::Communicating
            ]
        );
        // 5 s exchange + one 0.1 s dwell + two single-step transitions.
        let t = acquisition_time(&events).unwrap();
        assert!((t - 5.3).abs() < 1e-9, "{t}");
    }

    #[test]
    fn visibility_loss_is_immediate() {
        let cfg = PatConfig::default();
        let mut inputs = vec![happy(); 60];
        inputs.push(PatInputs { los_visible: false, ..happy() });
        let (s, events) = run(&cfg, &inputs, 0.1);
        assert_eq!(s.phase, Phase::LostTrack);
        let last = events.last().unwrap();
        assert_eq!((last.from, last.to, last.reason), (Phase::Communicating, Phase::LostTrack, "los_blocked"));
        assert!((last.time_s - 6.1).abs() < 1e-9);
    }

    #[test]
    fn wide_uncertainty_needs_a_scan() {
        let cfg = PatConfig { initial_uncertainty_deg: 3.0, ..PatConfig::default() };
        let (_, events) = run(&cfg, &vec![happy(); 100], 0.1);
        let disc = events.iter().find(|e| e.to == Phase::Discovery).unwrap().time_s;
        let coarse = events.iter().find(|e| e.to == Phase::CoarseAcquisition).unwrap().time_s;
        assert!((coarse - disc - 1.1).abs() < 1e-9);
    }

    #[test]
    fn scan_time_examples() {
        assert_eq!(coarse_scan_time(0.5, 1.0, 0.1), 0.1);
        assert_eq!(coarse_scan_time(1.0, 1.0, 0.1), 0.1);
        assert_eq!(scan_cells(3.0, 1.0), 11);
        assert!((coarse_scan_time(3.0, 1.0, 0.1) - 1.1).abs() < 1e-12);
        // 25 cells * 1.2 is exactly 30.
        assert_eq!(scan_cells(5.0, 1.0), 30);
    }

    #[test]
    fn field_of_regard_blocks_discovery() {
        let cfg = PatConfig::default();
        let inputs = vec![PatInputs { in_field_of_regard: false, ..happy() }; 200];
        let (s, events) = run(&cfg, &inputs, 0.1);
        assert!(events.iter().all(|e| e.to != Phase::CoarseAcquisition));
        assert!(matches!(s.phase, Phase::Discovery | Phase::GpsExchange));
    }

    #[test]
    fn excessive_jitter_never_communicates() {
        let cfg = PatConfig {
            disturbance: DisturbanceSpec {
                tones: vec![Tone { frequency_hz: 2000.0, amplitude_urad: 10.0 }],
                ..DisturbanceSpec::default()
            },
            ..PatConfig::default()
        };
        let (s, _) = run(&cfg, &vec![happy(); 200], 0.1);
        assert_eq!(s.phase, Phase::FineTracking);
        assert!(s.residual_jitter_rms_urad.unwrap() > 1.0);
    }

    #[test]
    fn reacquire_policies() {
        for (policy, expect) in [
            (ReacquirePolicy::RestartCoarse, Phase::Discovery),
            (ReacquirePolicy::RestartFine, Phase::CoarseAcquisition),
        ] {
            let cfg = PatConfig { reacquire_policy: policy, ..PatConfig::default() };
            let mut inputs = vec![happy(); 60];
            inputs.push(PatInputs { beacon_detected: false, ..happy() });
            inputs.push(happy());
            let (_, events) = run(&cfg, &inputs, 0.1);
            let n = events.len();
            assert_eq!(events[n - 2].reason, "beacon_lost");
            assert_eq!(events[n - 1].to, expect);
        }
    }

    #[test]
    fn acquisition_time_edge_cases() {
        let ev = |t: f64, from, to| PatEvent { time_s: t, from, to, reason: "" };
        let lost = vec![
            ev(1.0, Phase::Idle, Phase::GpsExchange),
            ev(6.0, Phase::GpsExchange, Phase::LostTrack),
        ];
        assert_eq!(acquisition_time(&lost), None);
        let twice = vec![
            ev(1.0, Phase::Idle, Phase::GpsExchange),
            ev(7.0, Phase::FineTracking, Phase::Communicating),
            ev(9.0, Phase::Communicating, Phase::Idle),
            ev(10.0, Phase::Idle, Phase::GpsExchange),
            ev(12.0, Phase::FineTracking, Phase::Communicating),
        ];
        assert_eq!(acquisition_time(&twice), Some(6.0));
    }

    #[test]
    fn loop_residual_examples() {
        assert_eq!(fine_loop_residual(&DisturbanceSpec::default(), 500.0), 0.0);
        assert!((sensitivity_magnitude(500.0, 500.0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let tone = |f: f64| DisturbanceSpec {
            tones: vec![Tone { frequency_hz: f, amplitude_urad: 10.0 }],
            ..DisturbanceSpec::default()
        };
        assert!((fine_loop_residual(&tone(50.0), 500.0) - 0.704).abs() < 0.01);
        let high = fine_loop_residual(&tone(5000.0), 500.0);
        assert!((high - 10.0 / 2f64.sqrt() * 10.0 / 101f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn white_jitter_quadrature_matches_closed_form() {
        let d = DisturbanceSpec { white_rms_urad: 3.0, white_bandwidth_hz: 5000.0, ..Default::default() };
        let fc: f64 = 500.0;
        let fmax: f64 = 5000.0;
        // ∫0^F x²/(1+x²) df with x = f/fc is F - fc·atan(F/fc).
        let exact = 9.0 * (1.0 - fc / fmax * (fmax / fc).atan());
        assert!((fine_loop_residual(&d, fc).powi(2) - exact).abs() < 1e-9);
    }

    fn arb_inputs() -> impl Strategy<Value = PatInputs> {
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
            |(c, v, p, b, f)| PatInputs {
                commanded: c || v,
                los_visible: v,
                peer_position_known: p,
                beacon_detected: b,
                in_field_of_regard: f,
            },
        )
    }

    proptest! {
        #[test]
        fn never_skips_coarse_or_jitter_gate(
            inputs in proptest::collection::vec(arb_inputs(), 1..300),
            amp in 0.0f64..5.0,
            freq in 1.0f64..5000.0,
            restart_fine in any::<bool>(),
        ) {
            let cfg = PatConfig {
                gps_exchange_duration_s: 0.2,
                disturbance: DisturbanceSpec {
                    tones: vec![Tone { frequency_hz: freq, amplitude_urad: amp }],
                    ..Default::default()
                },
                reacquire_policy: if restart_fine { ReacquirePolicy::RestartFine } else { ReacquirePolicy::RestartCoarse },
                ..PatConfig::default()
            };
            let mut s = PatState::new(&cfg, 0.0);
            for i in &inputs {
                let (n, e) = step(&s, &cfg, i, 0.1);
                if let Some(e) = e {
                    if e.to == Phase::FineTracking {
                        prop_assert_eq!(e.from, Phase::CoarseAcquisition);
                    }
                    if e.to == Phase::Communicating {
                        prop_assert!(n.residual_jitter_rms_urad.unwrap() <= cfg.fine_accuracy_urad);
                    }
                    if e.to == Phase::LostTrack && !e.from.is_tracking() {
                        prop_assert_eq!(e.reason, "los_blocked");
                    }
                }
                if !matches!(n.phase, Phase::FineTracking | Phase::Communicating) {
                    prop_assert!(n.residual_jitter_rms_urad.is_none());
                }
                s = n;
            }
        }

        #[test]
        fn replay_is_deterministic(inputs in proptest::collection::vec(arb_inputs(), 1..200)) {
            let cfg = PatConfig { gps_exchange_duration_s: 0.3, ..PatConfig::default() };
            prop_assert_eq!(run(&cfg, &inputs, 0.05), run(&cfg, &inputs, 0.05));
        }

        #[test]
        fn disturbance_is_monotone(
            a in 0.0f64..20.0, f in 0.1f64..10_000.0, extra in 0.0f64..20.0, fe in 0.1f64..10_000.0,
            white in 0.0f64..5.0, bw in 10.0f64..2000.0,
        ) {
            let base = DisturbanceSpec { tones: vec![Tone { frequency_hz: f, amplitude_urad: a }], ..Default::default() };
            let mut more = base.clone();
            more.tones.push(Tone { frequency_hz: fe, amplitude_urad: extra });
            more.white_rms_urad = white;
            prop_assert!(fine_loop_residual(&more, bw) >= fine_loop_residual(&base, bw));
        }
    }
}
