//! The time-stepped simulation loop.
//!
//! Every step samples geometry, draws fading, advances the acquisition state
//! machine at both ends of every link and moves data from source buffers for
//! directions that are communicating. Step `k` samples time `t0 + k·dt`; the
//! phase reported at that time is the result of the inputs sampled there.

use serde::Serialize;

use crate::channel::{
    atmospheric_attenuation_db, beacon_budget, compute_link_budget, ChannelError, ChannelSample,
    FadingProcess, LinkBudget,
};
use crate::datalink::{buffer_step, frame_success, BufferState, Duplex};
use crate::geometry::{
    find_passes, line_of_sight, point_ahead_urad, propagate, LineOfSight, Pass, PlatformState,
    Trajectory, Vec3,
};
use crate::pat::{self, acquisition_time, PatEvent, PatInputs, PatState, Phase};
use crate::terminal::{available_tx_power, in_field_of_regard};

use super::config::{Link, MountAxis, Platform, PlatformKind, Scenario};
use super::report::{
    EndEvent, FlowReport, LinkEvent, LinkReport, PassReport, PowerSample, SeriesRow, SimReport,
};
use super::{child_seed, EngineError};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SimReport,
    /// One row per data flow per visible step.
    pub series: Vec<SeriesRow>,
    /// Per data flow (`TX->RX`), the power available at each transmitting step.
    pub power: Vec<(String, Vec<PowerSample>)>,
    /// Number of link budgets whose ledger closure was checked.
    pub budgets_checked: u64,
}

/// Run a scenario and return its summary.
pub fn run(scenario: &Scenario, seed: u64) -> Result<SimReport, EngineError> {
    run_detailed(scenario, seed).map(|o| o.report)
}

const CLOSURE_TOL_DB: f64 = 1e-9;

/// Azimuth and elevation (degrees) of `target` in the gimbal frame of
/// `platform`, used for field-of-regard checks.
///
/// A local-vertical mount measures elevation above the local horizon and
/// azimuth from north. An orbit-normal mount measures elevation out of the
/// orbital plane and azimuth within it, from nadir.
pub fn mount_angles(platform: &Platform, state: &PlatformState, target: &Vec3) -> (f64, f64) {
    let u = (*target - state.position_m).unit();
    let (axis, reference) = match (platform.mount, &platform.trajectory) {
        (MountAxis::OrbitNormal, Trajectory::Orbit(o)) => {
            (o.orbit_normal_ecef(state.time_s), state.position_m.unit() * -1.0)
        }
        _ => {
            let up = state.up();
            let pole = Vec3::new(0.0, 0.0, 1.0);
            let east = pole.cross(&up);
            let north = if east.norm() < 1e-12 {
                Vec3::new(0.0, 1.0, 0.0)
            } else {
                up.cross(&east.unit())
            };
            (up, north)
        }
    };
    let side = axis.cross(&reference);
    let elevation = u.dot(&axis).atan2(u.dot(&reference).hypot(u.dot(&side)));
    let azimuth = u.dot(&side).atan2(u.dot(&reference));
    (azimuth.to_degrees(), elevation.to_degrees())
}

/// Fading streams and the last sample for one direction of a link.
struct Direction {
    tx: usize,
    rx: usize,
    /// `(platform index, process)` for each end whose atmosphere applies.
    fading: Vec<(usize, FadingProcess)>,
}

struct Pending {
    row: Option<usize>,
    margin_db: f64,
    ingest: u64,
}

struct Flow {
    id: String,
    dir: usize,
    buffer: BufferState,
    initial_bits: u64,
    ingest_per_step: u64,
    bits_per_step: u64,
    span_steps: usize,
    pending: Vec<Pending>,
    delivered: u64,
    dropped: u64,
    ingested: u64,
    communicating_steps: u64,
    ok_steps: u64,
    margin_min: f64,
    margin_sum: f64,
    margin_n: u64,
    on_time_s: f64,
    power: Vec<PowerSample>,
}

impl Flow {
    /// Decide the open interleaver span and move its bits.
    fn close_span(&mut self, series: &mut [SeriesRow]) {
        if self.pending.is_empty() {
            return;
        }
        let margins: Vec<f64> = self.pending.iter().map(|p| p.margin_db).collect();
        let ok = frame_success(&margins).unwrap_or(false);
        for p in std::mem::take(&mut self.pending) {
            // A step without transmit power carries nothing, whatever the span does.
            let step_ok = ok && p.margin_db.is_finite();
            let request = if step_ok { self.bits_per_step } else { 0 };
            self.advance(p.ingest, request);
            if step_ok {
                self.ok_steps += 1;
            }
            if let Some(i) = p.row {
                series[i].frame_ok = step_ok;
                series[i].buffer_bits = self.buffer.occupancy_bits;
            }
        }
    }

    fn advance(&mut self, ingest: u64, request: u64) {
        let s = buffer_step(self.buffer, ingest, request);
        self.buffer = s.state;
        self.ingested += ingest;
        self.delivered += s.delivered_bits;
        self.dropped += s.dropped_bits;
    }
}

struct LinkRun {
    ends: [PatState; 2],
    phase: Phase,
    dirs: Vec<Direction>,
    flows: Vec<Flow>,
    visible_steps: u64,
    max_point_ahead: f64,
    passes: Vec<PassReport>,
    open_pass: Option<(f64, f64)>,
    events: Vec<LinkEvent>,
    end_events: Vec<EndEvent>,
}

fn combined_phase(a: Phase, b: Phase) -> Phase {
    if a == Phase::LostTrack || b == Phase::LostTrack {
        Phase::LostTrack
    } else if a.progress() <= b.progress() {
        a
    } else {
        b
    }
}

/// The end whose elevation describes a pass: the Earth-fixed one if any.
fn reference_end(scenario: &Scenario, link: &Link) -> usize {
    let is_sat = |i: usize| scenario.platforms[i].kind == PlatformKind::Satellite;
    if is_sat(link.b) && !is_sat(link.a) {
        link.a
    } else {
        link.b
    }
}

fn elevation_at(los: &LineOfSight, link: &Link, end: usize) -> f64 {
    if end == link.a {
        los.elevation_a_rad
    } else {
        los.elevation_b_rad
    }
}

fn sample_channel(
    platforms: &[Platform],
    link: &Link,
    dir: &mut Direction,
    los: &LineOfSight,
    t: f64,
) -> Result<ChannelSample, EngineError> {
    let mut fade = 0.0;
    let mut attenuation = 0.0;
    for (end, process) in dir.fading.iter_mut() {
        fade += process.next_fade_db();
        if los.visible {
            attenuation +=
                atmospheric_attenuation_db(&platforms[*end].atmosphere, elevation_at(los, link, *end))?;
        }
    }
    Ok(ChannelSample {
        time_s: t,
        fade_db: fade,
        attenuation_db: attenuation,
        blocked: false,
    })
}

fn checked(budget: LinkBudget, counter: &mut u64) -> Result<LinkBudget, EngineError> {
    *counter += 1;
    let gap = (budget.ledger_sum_dbm() - budget.rx_power_dbm).abs();
    if gap > CLOSURE_TOL_DB || (budget.rx_power_dbm - budget.required_power_dbm - budget.margin_db).abs() > CLOSURE_TOL_DB {
        return Err(EngineError::Invariant(format!(
            "link budget does not close: ledger sum differs from received power by {gap} dB"
        )));
    }
    Ok(budget)
}

/// Run a scenario and keep the time series and amplifier trace.
pub fn run_detailed(scenario: &Scenario, seed: u64) -> Result<RunOutput, EngineError> {
    let dt = scenario.dt();
    let t0 = scenario.t0();
    let steps = scenario.step_count();
    let platforms = &scenario.platforms;
    let span_steps = |p: &Platform| ((p.terminal.modem.interleaver_span_s / dt).round() as usize).max(1);

    let mut links = Vec::with_capacity(scenario.links.len());
    for link in &scenario.links {
        let mut dirs = Vec::new();
        for (tx, rx) in [(link.a, link.b), (link.b, link.a)] {
            let label = format!("{}/{}->{}", link.id, platforms[tx].id, platforms[rx].id);
            let mut fading = Vec::new();
            for end in [tx, rx] {
                let atm = &platforms[end].atmosphere;
                if atm.applies {
                    let s = child_seed(seed, &format!("{label}/{}", platforms[end].id));
                    fading.push((end, FadingProcess::new(atm, dt, s)?));
                }
            }
            dirs.push(Direction { tx, rx, fading });
        }
        let n_flows = if link.direction == Duplex::TwoWay { 2 } else { 1 };
        let flows = (0..n_flows)
            .map(|d| {
                let (tx, rx) = (&platforms[dirs[d].tx], &platforms[dirs[d].rx]);
                let channels = tx.terminal.wdm_channels_per_direction.max(1) as f64;
                let buffer = tx.buffer.initial_state();
                Flow {
                    id: format!("{}->{}", tx.id, rx.id),
                    dir: d,
                    buffer,
                    initial_bits: buffer.occupancy_bits,
                    ingest_per_step: (tx.buffer.ingest_rate_bps * dt).round() as u64,
                    bits_per_step: (tx.terminal.modem.rate_bps * channels * dt).round() as u64,
                    span_steps: span_steps(tx),
                    pending: Vec::new(),
                    delivered: 0,
                    dropped: 0,
                    ingested: 0,
                    communicating_steps: 0,
                    ok_steps: 0,
                    margin_min: f64::INFINITY,
                    margin_sum: 0.0,
                    margin_n: 0,
                    on_time_s: 0.0,
                    power: Vec::new(),
                }
            })
            .collect();
        links.push(LinkRun {
            ends: [
                PatState::new(&platforms[link.a].pat, t0 - dt),
                PatState::new(&platforms[link.b].pat, t0 - dt),
            ],
            phase: Phase::Idle,
            dirs,
            flows,
            visible_steps: 0,
            max_point_ahead: 0.0,
            passes: Vec::new(),
            open_pass: None,
            events: Vec::new(),
            end_events: Vec::new(),
        });
    }

    let mut series = Vec::new();
    let mut budgets_checked = 0u64;
    let mut states = Vec::with_capacity(platforms.len());

    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        states.clear();
        for p in platforms {
            states.push(propagate(&p.trajectory, t)?);
        }

        for (link, lr) in scenario.links.iter().zip(links.iter_mut()) {
            let (sa, sb) = (&states[link.a], &states[link.b]);
            let los = line_of_sight(sa, sb, link.min_elevation_a_rad, link.min_elevation_b_rad)?;

            let mut samples = [ChannelSample::clear(t); 2];
            for (d, dir) in lr.dirs.iter_mut().enumerate() {
                samples[d] = sample_channel(platforms, link, dir, &los, t)?;
            }

            // Pass bookkeeping at the Earth-fixed end.
            let ref_end = reference_end(scenario, link);
            if los.visible {
                lr.visible_steps += 1;
                lr.max_point_ahead = lr.max_point_ahead.max(point_ahead_urad(los.transverse_velocity_mps));
                let el = elevation_at(&los, link, ref_end);
                match lr.open_pass.as_mut() {
                    Some((_, max_el)) => *max_el = max_el.max(el),
                    None => lr.open_pass = Some((t, el)),
                }
            } else if let Some((aos, max_el)) = lr.open_pass.take() {
                lr.passes.push(PassReport {
                    aos_s: aos,
                    los_s: t,
                    duration_s: t - aos,
                    max_elevation_deg: max_el.to_degrees(),
                });
            }

            // Beacon from each end to the other; index d detects at dirs[d].rx.
            let mut beacon_seen = [false; 2];
            if los.visible {
                for (d, dir) in lr.dirs.iter().enumerate() {
                    let b = beacon_budget(
                        &platforms[dir.tx].terminal,
                        &platforms[dir.rx].terminal,
                        &los,
                        &samples[d],
                    )?;
                    beacon_seen[d] = checked(b, &mut budgets_checked)?.margin_db >= 0.0;
                }
            }

            let mut step_events: Vec<PatEvent> = Vec::new();
            for (e, (me, peer)) in [(link.a, link.b), (link.b, link.a)].into_iter().enumerate() {
                let (az, el) = mount_angles(&platforms[me], &states[me], &states[peer].position_m);
                let field = &platforms[me].terminal.field_of_regard;
                // The beacon seen by end `e` travels in the direction whose rx is `me`.
                let seen = if lr.dirs[0].rx == me { beacon_seen[0] } else { beacon_seen[1] };
                let inputs = PatInputs {
                    commanded: true,
                    los_visible: los.visible,
                    peer_position_known: true,
                    beacon_detected: seen,
                    in_field_of_regard: in_field_of_regard(field, az, el),
                };
                let (next, event) = pat::step(&lr.ends[e], &platforms[me].pat, &inputs, dt);
                lr.ends[e] = next;
                if let Some(ev) = event {
                    lr.end_events.push(EndEvent {
                        time_s: ev.time_s,
                        end: platforms[me].id.clone(),
                        from: ev.from,
                        to: ev.to,
                        reason: ev.reason.to_string(),
                    });
                    step_events.push(ev);
                }
            }
            let phase = combined_phase(lr.ends[0].phase, lr.ends[1].phase);
            if phase != lr.phase {
                let reason = lr
                    .end_events
                    .iter()
                    .rev()
                    .take(step_events.len())
                    .rev()
                    .map(|e| format!("{}: {}", e.end, e.reason))
                    .collect::<Vec<_>>()
                    .join("; ");
                lr.events.push(LinkEvent {
                    time_s: t,
                    from: lr.phase,
                    to: phase,
                    reason,
                });
                lr.phase = phase;
            }

            let communicating = phase == Phase::Communicating;
            for flow in lr.flows.iter_mut() {
                let dir = &lr.dirs[flow.dir];
                let (tx, rx) = (&platforms[dir.tx], &platforms[dir.rx]);
                let sample = &samples[flow.dir];
                let power_w = tx
                    .terminal
                    .tx_power_nominal_w
                    .min(available_tx_power(&tx.terminal.edfa_envelope, flow.on_time_s));

                let budget = if los.visible && power_w > 0.0 {
                    let b = compute_link_budget(&tx.terminal, &rx.terminal, &los, sample, power_w)?;
                    Some(checked(b, &mut budgets_checked)?)
                } else {
                    None
                };

                let row = los.visible.then(|| {
                    series.push(SeriesRow {
                        t_s: t,
                        link_id: flow.id.clone(),
                        phase,
                        range_m: los.range_m,
                        elevation_deg: elevation_at(&los, link, dir.rx).to_degrees(),
                        rx_power_dbm: budget.as_ref().map(|b| b.rx_power_dbm),
                        margin_db: budget.as_ref().map(|b| b.margin_db),
                        fade_db: sample.fade_db,
                        frame_ok: false,
                        buffer_bits: flow.buffer.occupancy_bits,
                    });
                    series.len() - 1
                });

                if communicating {
                    let margin = budget.as_ref().map_or(f64::NEG_INFINITY, |b| b.margin_db);
                    flow.power.push(PowerSample {
                        t_s: t,
                        on_time_s: flow.on_time_s,
                        tx_power_w: power_w,
                    });
                    flow.communicating_steps += 1;
                    // Counted, not accumulated, so envelope edges land exactly.
                    flow.on_time_s = flow.communicating_steps as f64 * dt;
                    if margin.is_finite() {
                        flow.margin_min = flow.margin_min.min(margin);
                        flow.margin_sum += margin;
                        flow.margin_n += 1;
                    }
                    flow.pending.push(Pending {
                        row,
                        margin_db: margin,
                        ingest: flow.ingest_per_step,
                    });
                    if flow.pending.len() >= flow.span_steps {
                        flow.close_span(&mut series);
                    }
                } else {
                    flow.close_span(&mut series);
                    let ingest = flow.ingest_per_step;
                    flow.advance(ingest, 0);
                    if let Some(i) = row {
                        series[i].buffer_bits = flow.buffer.occupancy_bits;
                    }
                }
            }
        }
    }

    let t_end = t0 + steps as f64 * dt;
    let mut link_reports = Vec::with_capacity(links.len());
    let mut power = Vec::new();
    for (link, mut lr) in scenario.links.iter().zip(links) {
        if let Some((aos, max_el)) = lr.open_pass.take() {
            lr.passes.push(PassReport {
                aos_s: aos,
                los_s: t_end,
                duration_s: t_end - aos,
                max_elevation_deg: max_el.to_degrees(),
            });
        }
        let mut flows = Vec::new();
        for mut f in lr.flows {
            f.close_span(&mut series);
            let (from, to) = (
                platforms[lr.dirs[f.dir].tx].id.clone(),
                platforms[lr.dirs[f.dir].rx].id.clone(),
            );
            if f.initial_bits + f.ingested != f.delivered + f.dropped + f.buffer.occupancy_bits {
                return Err(EngineError::Invariant(format!(
                    "bit conservation failed on {}: {} initial + {} ingested != {} delivered + {} dropped + {} buffered",
                    f.id, f.initial_bits, f.ingested, f.delivered, f.dropped, f.buffer.occupancy_bits
                )));
            }
            flows.push(FlowReport {
                from,
                to,
                availability: if lr.visible_steps == 0 {
                    0.0
                } else {
                    f.ok_steps as f64 / lr.visible_steps as f64
                },
                visible_steps: lr.visible_steps,
                communicating_steps: f.communicating_steps,
                ok_steps: f.ok_steps,
                delivered_bits: f.delivered,
                dropped_bits: f.dropped,
                ingested_bits: f.ingested,
                buffer_initial_bits: f.initial_bits,
                buffer_final_bits: f.buffer.occupancy_bits,
                min_margin_db: (f.margin_n > 0).then_some(f.margin_min),
                mean_margin_db: (f.margin_n > 0).then(|| f.margin_sum / f.margin_n as f64),
                amplifier_on_time_s: f.on_time_s,
            });
            power.push((f.id, f.power));
        }
        let trace: Vec<PatEvent> = lr
            .events
            .iter()
            .map(|e| PatEvent {
                time_s: e.time_s,
                from: e.from,
                to: e.to,
                reason: "",
            })
            .collect();
        link_reports.push(LinkReport {
            link_id: link.id.clone(),
            direction: link.direction,
            availability: flows.iter().map(|f| f.availability).fold(f64::INFINITY, f64::min),
            acquisition_time_s: acquisition_time(&trace),
            visible_steps: lr.visible_steps,
            max_point_ahead_urad: lr.max_point_ahead,
            passes: lr.passes,
            flows,
            events: lr.events,
            end_events: lr.end_events,
        });
    }

    Ok(RunOutput {
        report: SimReport {
            scenario: scenario.name().to_string(),
            seed,
            t0_s: t0,
            t1_s: scenario.t1(),
            dt_s: dt,
            steps,
            links: link_reports,
        },
        series,
        power,
        budgets_checked,
    })
}

fn resolve_link<'a>(scenario: &'a Scenario, link_id: &str) -> Result<&'a Link, EngineError> {
    scenario.link(link_id).ok_or_else(|| {
        let known: Vec<&str> = scenario.links.iter().map(|l| l.id.as_str()).collect();
        EngineError::Request(format!(
            "unknown link {link_id:?}; the scenario defines {}",
            known.join(", ")
        ))
    })
}

/// Visibility windows of a link over the scenario span, refined to 0.1 s.
pub fn link_passes(scenario: &Scenario, link_id: &str, step_s: f64) -> Result<Vec<Pass>, EngineError> {
    let link = resolve_link(scenario, link_id)?;
    let (ta, tb) = (
        &scenario.platforms[link.a].trajectory,
        &scenario.platforms[link.b].trajectory,
    );
    let ref_end = reference_end(scenario, link);
    let min_el = if ref_end == link.a {
        link.min_elevation_a_rad
    } else {
        link.min_elevation_b_rad
    };
    let passes = find_passes(
        |t| {
            let los = line_of_sight(
                &propagate(ta, t)?,
                &propagate(tb, t)?,
                link.min_elevation_a_rad,
                link.min_elevation_b_rad,
            )?;
            Ok(los.visible.then(|| elevation_at(&los, link, ref_end)))
        },
        scenario.t0(),
        scenario.t1(),
        step_s,
        min_el,
    )?;
    Ok(passes)
}

/// Clear-sky budgets of a link at one instant.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetSnapshot {
    pub t_s: f64,
    pub from: String,
    pub to: String,
    pub range_m: f64,
    pub elevation_rx_deg: f64,
    pub tx_power_w: f64,
    pub data: LinkBudget,
    pub beacon: LinkBudget,
}

/// Budgets of every data direction of `link_id` at time `t`, with no fade
/// and a fresh amplifier.
pub fn budget_at(scenario: &Scenario, link_id: &str, t: f64) -> Result<Vec<BudgetSnapshot>, EngineError> {
    let link = resolve_link(scenario, link_id)?;
    let p = &scenario.platforms;
    let los = line_of_sight(
        &propagate(&p[link.a].trajectory, t)?,
        &propagate(&p[link.b].trajectory, t)?,
        link.min_elevation_a_rad,
        link.min_elevation_b_rad,
    )?;
    if !los.visible {
        return Err(EngineError::Request(format!(
            "link {link_id} has no line of sight at t = {t} s"
        )));
    }
    let mut dirs = vec![(link.a, link.b)];
    if link.direction == Duplex::TwoWay {
        dirs.push((link.b, link.a));
    }
    let mut out = Vec::new();
    for (tx, rx) in dirs {
        let mut sample = ChannelSample::clear(t);
        for end in [tx, rx] {
            if p[end].atmosphere.applies {
                sample.attenuation_db +=
                    atmospheric_attenuation_db(&p[end].atmosphere, elevation_at(&los, link, end))?;
            }
        }
        let term = &p[tx].terminal;
        let power = term.tx_power_nominal_w.min(available_tx_power(&term.edfa_envelope, 0.0));
        let data = compute_link_budget(term, &p[rx].terminal, &los, &sample, power)
            .map_err(|e| match e {
                ChannelError::NoPower(_) => EngineError::Request(format!("{} has no transmit power", p[tx].id)),
                other => other.into(),
            })?;
        let beacon = beacon_budget(term, &p[rx].terminal, &los, &sample)?;
        out.push(BudgetSnapshot {
            t_s: t,
            from: p[tx].id.clone(),
            to: p[rx].id.clone(),
            range_m: los.range_m,
            elevation_rx_deg: elevation_at(&los, link, rx).to_degrees(),
            tx_power_w: power,
            data,
            beacon,
        });
    }
    Ok(out)
}
