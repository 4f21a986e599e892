//! Link budgets and the atmospheric channel.
//!
//! Budgets are itemized dB ledgers. Atmospheric loss scales with airmass;
//! scintillation is log-normal with first-order Gauss-Markov (AR(1)) memory.

use std::f64::consts::LN_10;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::datalink::ModemProfile;
use crate::geometry::LineOfSight;
use crate::terminal::{beam_divergence, strehl_penalty_db, TerminalError, TerminalProfile};

/// Planck constant (J·s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Lowest elevation at which the airmass model is accepted.
pub const MIN_AIRMASS_ELEVATION_RAD: f64 = 5.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("elevation {elevation_deg:.3}° is at or below the 5° airmass limit")]
    ElevationTooLow { elevation_deg: f64 },
    #[error("line of sight is not visible")]
    NotVisible,
    #[error("channel is blocked")]
    Blocked,
    #[error("transmit power must be positive, got {0} W")]
    NoPower(f64),
    #[error("sample interval {dt} s exceeds half the correlation time {tau} s")]
    SamplingTooCoarse { dt: f64, tau: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Terminal(#[from] TerminalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereSpec {
    pub zenith_attenuation_db: f64,
    /// Stationary variance of the log-irradiance.
    pub scintillation_sigma2: f64,
    pub correlation_time_s: f64,
    /// False for paths that never enter the atmosphere.
    pub applies: bool,
}

impl AtmosphereSpec {
    /// No atmosphere on the path.
    pub fn vacuum() -> Self {
        AtmosphereSpec {
            zenith_attenuation_db: 0.0,
            scintillation_sigma2: 0.0,
            correlation_time_s: 1e-3,
            applies: false,
        }
    }

    /// Clear, calm site: 1 dB at zenith and weak scintillation.
    pub fn calm() -> Self {
        AtmosphereSpec {
            zenith_attenuation_db: 1.0,
            scintillation_sigma2: 0.05,
            correlation_time_s: 1e-3,
            applies: true,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.zenith_attenuation_db >= 0.0 && self.zenith_attenuation_db.is_finite()) {
            out.push(format!(
                "zenith_attenuation_db must be non-negative, got {}",
                self.zenith_attenuation_db
            ));
        }
        if !(self.scintillation_sigma2 >= 0.0 && self.scintillation_sigma2.is_finite()) {
            out.push(format!(
                "scintillation_sigma2 must be non-negative, got {}",
                self.scintillation_sigma2
            ));
        }
        if !(self.correlation_time_s > 0.0 && self.correlation_time_s.is_finite()) {
            out.push(format!(
                "correlation_time_s must be positive, got {}",
                self.correlation_time_s
            ));
        }
        out
    }
}

impl Default for AtmosphereSpec {
    fn default() -> Self {
        AtmosphereSpec::vacuum()
    }
}

/// Channel state for one link direction at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSample {
    pub time_s: f64,
    /// Scintillation fade; positive is loss.
    pub fade_db: f64,
    pub attenuation_db: f64,
    pub blocked: bool,
}

impl ChannelSample {
    pub fn clear(time_s: f64) -> Self {
        ChannelSample {
            time_s,
            fade_db: 0.0,
            attenuation_db: 0.0,
            blocked: false,
        }
    }
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * (p_w * 1e3).log10()
}

/// Flat-top far-field footprint coupling loss, clipped at full capture.
pub fn geometric_coupling_db(divergence_full_rad: f64, range_m: f64, rx_aperture_m: f64) -> f64 {
    let footprint = divergence_full_rad * range_m;
    let captured = (rx_aperture_m / footprint).powi(2).min(1.0);
    -10.0 * captured.log10()
}

/// Mean loss of a Gaussian beam under circular Gaussian pointing jitter.
/// `jitter_rms_rad` is the radial (two-axis) RMS error.
pub fn pointing_loss_db(jitter_rms_rad: f64, divergence_full_rad: f64) -> f64 {
    let ratio = jitter_rms_rad / divergence_full_rad;
    10.0 * (1.0 + 8.0 * ratio * ratio).log10()
}

/// Plane-parallel airmass scaling of the zenith attenuation.
pub fn atmospheric_attenuation_db(spec: &AtmosphereSpec, elevation_rad: f64) -> Result<f64, ChannelError> {
    if !spec.applies {
        return Ok(0.0);
    }
    if !(elevation_rad > MIN_AIRMASS_ELEVATION_RAD) {
        return Err(ChannelError::ElevationTooLow {
            elevation_deg: elevation_rad.to_degrees(),
        });
    }
    Ok(spec.zenith_attenuation_db / elevation_rad.sin())
}

/// Log-normal scintillation with AR(1) memory on the log-irradiance.
///
/// `ln I = x - σ²/2` where `x` is a zero-mean stationary Gauss-Markov process
/// with variance σ² and correlation `exp(-Δt/τ)`, so `E[I] = 1`.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    rng: ChaCha8Rng,
    sigma: f64,
    rho: f64,
    innovation: f64,
    x: Option<f64>,
}

impl FadingProcess {
    pub fn new(spec: &AtmosphereSpec, dt_s: f64, seed: u64) -> Result<Self, ChannelError> {
        if !(dt_s > 0.0) {
            return Err(ChannelError::Invalid(format!("dt must be positive, got {dt_s}")));
        }
        if let Some(p) = spec.problems().into_iter().next() {
            return Err(ChannelError::Invalid(p));
        }
        if spec.applies && dt_s > spec.correlation_time_s / 2.0 * (1.0 + 1e-12) {
            return Err(ChannelError::SamplingTooCoarse {
                dt: dt_s,
                tau: spec.correlation_time_s,
            });
        }
        let sigma2 = if spec.applies { spec.scintillation_sigma2 } else { 0.0 };
        let rho = (-dt_s / spec.correlation_time_s).exp();
        Ok(FadingProcess {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sigma: sigma2.sqrt(),
            rho,
            innovation: (1.0 - rho * rho).sqrt(),
            x: None,
        })
    }

    /// Next log-irradiance sample.
    pub fn next_log_irradiance(&mut self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let x = match self.x {
            None => self.sigma * z,
            Some(prev) => self.rho * prev + self.innovation * self.sigma * z,
        };
        self.x = Some(x);
        x - 0.5 * self.sigma * self.sigma
    }

    /// Next fade in dB (positive is loss).
    pub fn next_fade_db(&mut self) -> f64 {
        let ln_i = self.next_log_irradiance();
        if ln_i == 0.0 {
            0.0
        } else {
            -10.0 / LN_10 * ln_i
        }
    }
}

/// A fade series of `round(duration / dt)` samples.
pub fn sample_fading(
    spec: &AtmosphereSpec,
    duration_s: f64,
    dt_s: f64,
    seed: u64,
) -> Result<Vec<f64>, ChannelError> {
    if !(duration_s > 0.0) {
        return Err(ChannelError::Invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let mut process = FadingProcess::new(spec, dt_s, seed)?;
    let n = ((duration_s / dt_s).round() as usize).max(1);
    Ok((0..n).map(|_| process.next_fade_db()).collect())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the stationary fade exceeds `margin_db`.
pub fn outage_probability(margin_db: f64, sigma2: f64) -> f64 {
    if sigma2 <= 0.0 {
        return if margin_db < 0.0 { 1.0 } else { 0.0 };
    }
    let sigma = sigma2.sqrt();
    normal_cdf((-margin_db * LN_10 / 10.0 + sigma2 / 2.0) / sigma)
}

/// Power needed at the receiver for the modem to close at its full rate.
pub fn receiver_sensitivity_dbm(modem: &ModemProfile, wavelength_m: f64) -> f64 {
    let photon_energy = PLANCK * crate::geometry::SPEED_OF_LIGHT / wavelength_m;
    watts_to_dbm(modem.photons_per_bit * photon_energy * modem.rate_bps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTerm {
    pub name: String,
    /// Signed contribution; losses are negative.
    pub value_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub terms: Vec<BudgetTerm>,
    pub rx_power_dbm: f64,
    pub required_power_dbm: f64,
    pub margin_db: f64,
}

impl LinkBudget {
    fn close(tx_power_dbm: f64, terms: Vec<BudgetTerm>, required_power_dbm: f64) -> Self {
        let rx_power_dbm = terms.iter().fold(tx_power_dbm, |acc, t| acc + t.value_db);
        LinkBudget {
            tx_power_dbm,
            terms,
            rx_power_dbm,
            required_power_dbm,
            margin_db: rx_power_dbm - required_power_dbm,
        }
    }

    /// Recomputed ledger sum, in ledger order.
    pub fn ledger_sum_dbm(&self) -> f64 {
        self.terms.iter().fold(self.tx_power_dbm, |acc, t| acc + t.value_db)
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value_db)
    }
}

impl std::fmt::Display for LinkBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let width = self
            .terms
            .iter()
            .map(|t| t.name.len())
            .chain(["required power".len()])
            .max()
            .unwrap_or(0);
        writeln!(f, "{:<width$}  {:>10.3} dBm", "tx power", self.tx_power_dbm)?;
        for t in &self.terms {
            writeln!(f, "{:<width$}  {:>+10.3} dB", t.name, t.value_db)?;
        }
        writeln!(f, "{:<width$}  {:>10.3} dBm", "rx power", self.rx_power_dbm)?;
        writeln!(f, "{:<width$}  {:>10.3} dBm", "required power", self.required_power_dbm)?;
        write!(f, "{:<width$}  {:>+10.3} dB", "margin", self.margin_db)
    }
}

pub const TERM_TX_OPTICS: &str = "tx_optics_transmission";
pub const TERM_TX_STREHL: &str = "tx_wavefront_strehl";
pub const TERM_GEOMETRIC: &str = "geometric_coupling_flat_top";
pub const TERM_POINTING: &str = "pointing_jitter_gaussian";
pub const TERM_ATMOSPHERE: &str = "atmospheric_attenuation_airmass";
pub const TERM_FADE: &str = "scintillation_fade";
pub const TERM_RX_OPTICS: &str = "rx_optics_transmission";
pub const TERM_RX_STREHL: &str = "rx_wavefront_strehl";
pub const TERM_WDM_SPLIT: &str = "wdm_power_split";

fn optics_loss_db(transmission: f64) -> f64 {
    -10.0 * transmission.log10()
}

fn check_channel(los: &LineOfSight, channel: &ChannelSample) -> Result<(), ChannelError> {
    if !los.visible {
        return Err(ChannelError::NotVisible);
    }
    if channel.blocked {
        return Err(ChannelError::Blocked);
    }
    Ok(())
}

/// Data-beam budget from `tx` to `rx` over `los`, per WDM channel.
pub fn compute_link_budget(
    tx: &TerminalProfile,
    rx: &TerminalProfile,
    los: &LineOfSight,
    channel: &ChannelSample,
    tx_power_w: f64,
) -> Result<LinkBudget, ChannelError> {
    check_channel(los, channel)?;
    if !(tx_power_w > 0.0) {
        return Err(ChannelError::NoPower(tx_power_w));
    }
    let divergence = beam_divergence(tx);
    let jitter = (tx.fine_pointing_accuracy_urad.powi(2) + rx.fine_pointing_accuracy_urad.powi(2))
        .sqrt()
        * 1e-6;
    let term = |name: &str, loss_db: f64| BudgetTerm {
        name: name.into(),
        value_db: -loss_db,
    };
    let mut terms = vec![
        term(TERM_TX_OPTICS, optics_loss_db(tx.optics_transmission)),
        term(TERM_TX_STREHL, strehl_penalty_db(tx.wavefront_error_rms_waves)?),
        term(TERM_GEOMETRIC, geometric_coupling_db(divergence, los.range_m, rx.aperture_m)),
        term(TERM_POINTING, pointing_loss_db(jitter, divergence)),
        term(TERM_ATMOSPHERE, channel.attenuation_db),
        term(TERM_FADE, channel.fade_db),
        term(TERM_RX_OPTICS, optics_loss_db(rx.optics_transmission)),
        term(TERM_RX_STREHL, strehl_penalty_db(rx.wavefront_error_rms_waves)?),
    ];
    if tx.wdm_channels_per_direction > 1 {
        terms.push(term(
            TERM_WDM_SPLIT,
            10.0 * (tx.wdm_channels_per_direction as f64).log10(),
        ));
    }
    let required = receiver_sensitivity_dbm(&rx.modem, rx.wavelength_rx_m());
    Ok(LinkBudget::close(watts_to_dbm(tx_power_w), terms, required))
}

/// Acquisition-beacon budget from `tx` to the coarse detector of `rx`.
pub fn beacon_budget(
    tx: &TerminalProfile,
    rx: &TerminalProfile,
    los: &LineOfSight,
    channel: &ChannelSample,
) -> Result<LinkBudget, ChannelError> {
    check_channel(los, channel)?;
    let term = |name: &str, loss_db: f64| BudgetTerm {
        name: name.into(),
        value_db: -loss_db,
    };
    let divergence = tx.beacon.divergence_full_urad * 1e-6;
    let terms = vec![
        term(TERM_TX_OPTICS, optics_loss_db(tx.optics_transmission)),
        term(TERM_GEOMETRIC, geometric_coupling_db(divergence, los.range_m, rx.aperture_m)),
        term(TERM_ATMOSPHERE, channel.attenuation_db),
        term(TERM_FADE, channel.fade_db),
        term(TERM_RX_OPTICS, optics_loss_db(rx.optics_transmission)),
    ];
    Ok(LinkBudget::close(
        watts_to_dbm(tx.beacon.power_w),
        terms,
        rx.beacon.detector_sensitivity_dbm,
    ))
}
