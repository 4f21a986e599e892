//! Run summaries and CSV writers.

use std::io::Write;

use serde::Serialize;

use crate::datalink::Duplex;
use crate::pat::Phase;

use super::EngineError;

/// Column order of the time-series CSV.
pub const SERIES_COLUMNS: [&str; 10] = [
    "t_s",
    "link_id",
    "phase",
    "range_m",
    "elevation_deg",
    "rx_power_dbm",
    "margin_db",
    "fade_db",
    "frame_ok",
    "buffer_bits",
];

/// One directed flow at one visible time step. `link_id` is `TX->RX`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t_s: f64,
    pub link_id: String,
    pub phase: Phase,
    pub range_m: f64,
    /// Elevation at the receiving end.
    pub elevation_deg: f64,
    /// `None` once the amplifier has no power left to give.
    pub rx_power_dbm: Option<f64>,
    pub margin_db: Option<f64>,
    pub fade_db: f64,
    pub frame_ok: bool,
    /// Source buffer occupancy after the step.
    pub buffer_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassReport {
    pub aos_s: f64,
    pub los_s: f64,
    pub duration_s: f64,
    pub max_elevation_deg: f64,
}

/// Transition of the combined link phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkEvent {
    pub time_s: f64,
    pub from: Phase,
    pub to: Phase,
    pub reason: String,
}

/// Transition of one terminal's acquisition state machine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndEvent {
    pub time_s: f64,
    pub end: String,
    pub from: Phase,
    pub to: Phase,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub from: String,
    pub to: String,
    /// Successful communicating steps over visible steps.
    pub availability: f64,
    pub visible_steps: u64,
    pub communicating_steps: u64,
    pub ok_steps: u64,
    pub delivered_bits: u64,
    pub dropped_bits: u64,
    pub ingested_bits: u64,
    pub buffer_initial_bits: u64,
    pub buffer_final_bits: u64,
    pub min_margin_db: Option<f64>,
    pub mean_margin_db: Option<f64>,
    pub amplifier_on_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub link_id: String,
    pub direction: Duplex,
    /// Worst availability over the link's data flows.
    pub availability: f64,
    pub acquisition_time_s: Option<f64>,
    pub visible_steps: u64,
    pub max_point_ahead_urad: f64,
    pub passes: Vec<PassReport>,
    pub flows: Vec<FlowReport>,
    pub events: Vec<LinkEvent>,
    pub end_events: Vec<EndEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub t0_s: f64,
    pub t1_s: f64,
    pub dt_s: f64,
    pub steps: u64,
    pub links: Vec<LinkReport>,
}

impl SimReport {
    pub fn link(&self, id: &str) -> Option<&LinkReport> {
        self.links.iter().find(|l| l.link_id == id)
    }
}

impl LinkReport {
    pub fn flow(&self, from: &str, to: &str) -> Option<&FlowReport> {
        self.flows.iter().find(|f| f.from == from && f.to == to)
    }
}

/// Transmit power actually available while a direction is transmitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSample {
    pub t_s: f64,
    /// Cumulative amplifier on-time before this step.
    pub on_time_s: f64,
    pub tx_power_w: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_series_csv<W: Write>(out: W, rows: &[SeriesRow]) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.t_s.to_string(),
            r.link_id.clone(),
            r.phase.as_str().to_string(),
            r.range_m.to_string(),
            r.elevation_deg.to_string(),
            opt(r.rx_power_dbm),
            opt(r.margin_db),
            r.fade_db.to_string(),
            r.frame_ok.to_string(),
            r.buffer_bits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Link-level phase transitions of every link, in time order.
pub fn write_events_csv<W: Write>(out: W, report: &SimReport) -> Result<(), EngineError> {
    let mut rows: Vec<(&str, &LinkEvent)> = report
        .links
        .iter()
        .flat_map(|l| l.events.iter().map(move |e| (l.link_id.as_str(), e)))
        .collect();
    rows.sort_by(|a, b| a.1.time_s.total_cmp(&b.1.time_s));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "link_id", "from_phase", "to_phase", "reason"])?;
    for (id, e) in rows {
        w.write_record([
            e.time_s.to_string(),
            id.to_string(),
            e.from.as_str().to_string(),
            e.to.as_str().to_string(),
            e.reason.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
