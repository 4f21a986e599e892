//! Scenario loading, time-stepped simulation, reports and parameter sweeps.

mod config;
mod report;
mod run;
mod sweep;

pub use config::{
    load_scenario, ConfigIssue, LinkConfig, Link, MountAxis, OrbitConfig, PatSettings, Platform,
    PlatformConfig, PlatformKind, Scenario, ScenarioFile, SiteConfig, TimeConfig, WaypointConfig,
};
pub use report::{
    write_events_csv, write_series_csv, EndEvent, FlowReport, LinkEvent, LinkReport, PassReport,
    PowerSample, SeriesRow, SimReport, SERIES_COLUMNS,
};
pub use run::{
    budget_at, link_passes, mount_angles, run, run_detailed, BudgetSnapshot, RunOutput,
};
pub use sweep::{set_parameter, sweep, sweep_scenarios};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario:\n{}", format_issues(.0))]
    Validation(Vec<ConfigIssue>),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Request(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl EngineError {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Invariant(_) => 3,
            _ => 2,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for a named component of a run.
pub fn child_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}
