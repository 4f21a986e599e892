//! Command-line front end for the lasercom link simulator.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lasercom::engine::{
    budget_at, link_passes, load_scenario, run_detailed, sweep, write_events_csv,
    write_series_csv, EngineError, Scenario, SimReport,
};
use lasercom::terminal::{beam_divergence, builtin_profiles, TerminalProfile};

#[derive(Parser)]
#[command(name = "sim", version, about = "Optical terminal link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print a per-link summary.
    Run {
        file: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-step time series here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write link phase transitions here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// List visibility windows of one link.
    Passes {
        file: PathBuf,
        #[arg(long)]
        link: String,
        /// Coarse search step in seconds.
        #[arg(long, default_value_t = 10.0)]
        step: f64,
    },
    /// Print the clear-sky link budget of one link at one instant.
    Budget {
        file: PathBuf,
        #[arg(long)]
        link: String,
        #[arg(long)]
        at: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run the scenario once per value of a numeric parameter.
    Sweep {
        file: PathBuf,
        /// Dot path, e.g. `platforms.sat.orbit.altitude_m`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the built-in terminal profiles.
    Profiles {
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path) -> Result<Scenario, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        EngineError::Request(format!("cannot read {}: {e}", path.display()))
    })?;
    load_scenario(&text)
}

fn create(path: &Path) -> Result<BufWriter<File>, EngineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| EngineError::Request(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), EngineError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

fn print_report(report: &SimReport) {
    println!(
        "scenario {}  seed {}  steps {}  dt {} s",
        report.scenario, report.seed, report.steps, report.dt_s
    );
    for l in &report.links {
        println!(
            "link {}  availability {:.4}  acquisition {} s  passes {}  max point-ahead {:.2} urad",
            l.link_id,
            l.availability,
            fmt_opt(l.acquisition_time_s, 1),
            l.passes.len(),
            l.max_point_ahead_urad
        );
        for f in &l.flows {
            println!(
                "  {:>10} -> {:<10} avail {:.4}  delivered {} bit  dropped {} bit  margin min/mean {}/{} dB",
                f.from,
                f.to,
                f.availability,
                f.delivered_bits,
                f.dropped_bits,
                fmt_opt(f.min_margin_db, 2),
                fmt_opt(f.mean_margin_db, 2)
            );
        }
    }
}

fn profile_row(p: &TerminalProfile) -> String {
    let f = &p.field_of_regard;
    format!(
        "{:<7} {:>6.2} {:>5.0}°x[{:+.0}°,{:+.0}°] {:>6.0}/{:<6.0} {:>6.1} {:>7.1} {:>5} {:>7.1}  {}",
        p.name,
        p.aperture_m * 100.0,
        f.azimuth_full_deg,
        f.elevation_min_deg,
        f.elevation_max_deg,
        p.wavelength_tx_nm,
        p.wavelength_rx_nm,
        p.data_rate_bps() / 1e9,
        p.tx_power_nominal_w,
        p.wdm_channels_per_direction,
        beam_divergence(p) * 1e6,
        p.max_range_scenario
    )
}

fn execute(cli: Cli) -> Result<(), EngineError> {
    match cli.command {
        Command::Run { file, seed, csv, json, events } => {
            let scenario = load(&file)?;
            let seed = seed.unwrap_or(scenario.seed());
            let out = run_detailed(&scenario, seed)?;
            if let Some(path) = csv {
                write_series_csv(create(&path)?, &out.series)?;
            }
            if let Some(path) = events {
                write_events_csv(create(&path)?, &out.report)?;
            }
            if let Some(path) = json {
                write_json(&path, &out.report)?;
            }
            print_report(&out.report);
        }
        Command::Passes { file, link, step } => {
            let scenario = load(&file)?;
            let passes = link_passes(&scenario, &link, step)?;
            println!("{:>12} {:>12} {:>10} {:>10}", "aos_s", "los_s", "duration_s", "max_el_deg");
            for p in &passes {
                println!(
                    "{:>12.1} {:>12.1} {:>10.1} {:>10.2}",
                    p.aos_s,
                    p.los_s,
                    p.duration_s,
                    p.max_elevation_rad.to_degrees()
                );
            }
            println!("{} passes", passes.len());
        }
        Command::Budget { file, link, at, json } => {
            let scenario = load(&file)?;
            let snaps = budget_at(&scenario, &link, at)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&snaps).expect("budget serializes"));
            } else {
                for s in &snaps {
                    println!(
                        "{} -> {} at t = {} s, range {:.1} m, rx elevation {:.2}°, {} W",
                        s.from, s.to, s.t_s, s.range_m, s.elevation_rx_deg, s.tx_power_w
                    );
                    println!("{}", s.data);
                    println!("beacon margin {:.2} dB\n", s.beacon.margin_db);
                }
            }
        }
        Command::Sweep { file, param, values, seed, json } => {
            let scenario = load(&file)?;
            let seed = seed.unwrap_or(scenario.seed());
            let reports = sweep(&scenario, &param, &values, seed)?;
            println!("{:>14} {:>14} {:>12} {:>12} {:>16}", param.rsplit('.').next().unwrap_or(""), "link", "avail", "min_margin", "delivered_bits");
            for (v, r) in values.iter().zip(&reports) {
                for l in &r.links {
                    let min_margin = l
                        .flows
                        .iter()
                        .filter_map(|f| f.min_margin_db)
                        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
                    let delivered: u64 = l.flows.iter().map(|f| f.delivered_bits).sum();
                    println!(
                        "{:>14} {:>14} {:>12.4} {:>12} {:>16}",
                        v,
                        l.link_id,
                        l.availability,
                        fmt_opt(min_margin, 2),
                        delivered
                    );
                }
            }
            if let Some(path) = json {
                write_json(&path, &reports)?;
            }
        }
        Command::Profiles { json } => {
            let builtins = builtin_profiles();
            if json {
                let all: Vec<&TerminalProfile> = builtins.all().to_vec();
                println!("{}", serde_json::to_string_pretty(&all).expect("profiles serialize"));
            } else {
                println!(
                    "{:<7} {:>6} {:>18} {:>13} {:>6} {:>7} {:>5} {:>7}  max_range",
                    "name", "ap_cm", "field_of_regard", "tx/rx_nm", "Gbps", "tx_W", "wdm", "div_ur"
                );
                for p in builtins.all() {
                    println!("{}", profile_row(p));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
