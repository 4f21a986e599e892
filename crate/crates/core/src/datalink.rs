//! Modem abstraction, interleaved frame decisions and the store-and-forward buffer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatalinkError {
    #[error("margin series is empty")]
    EmptySeries,
    #[error("invalid modem: {0}")]
    InvalidModem(String),
    #[error("WDM channel count {0} outside [1, 4]")]
    Channels(u32),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplex {
    OneWay,
    TwoWay,
}

/// Rate and sensitivity parameters of a modem. `rate_bps` is per wavelength
/// channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModemProfile {
    pub name: String,
    pub rate_bps: f64,
    pub photons_per_bit: f64,
    pub interleaver_span_s: f64,
    pub frame_duration_s: f64,
    pub duplex: Duplex,
}

impl ModemProfile {
    /// Bidirectional 10 Gbit/s modem with interleaving and FEC.
    pub fn ten_gigabit() -> Self {
        ModemProfile {
            name: "10G".into(),
            rate_bps: 10e9,
            photons_per_bit: 300.0,
            interleaver_span_s: 1.0,
            frame_duration_s: 0.01,
            duplex: Duplex::TwoWay,
        }
    }

    /// Digital-coherent high-rate option, reduced to a rate and a sensitivity.
    pub fn coherent_high_rate() -> Self {
        ModemProfile {
            name: "coherent-100G".into(),
            rate_bps: 100e9,
            photons_per_bit: 100.0,
            interleaver_span_s: 1.0,
            frame_duration_s: 0.01,
            duplex: Duplex::TwoWay,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rate_bps > 0.0 && self.rate_bps.is_finite()) {
            out.push(format!("modem rate_bps must be positive, got {}", self.rate_bps));
        }
        if !(self.photons_per_bit > 0.0 && self.photons_per_bit.is_finite()) {
            out.push(format!(
                "modem photons_per_bit must be positive, got {}",
                self.photons_per_bit
            ));
        }
        if !(self.frame_duration_s > 0.0 && self.frame_duration_s.is_finite()) {
            out.push(format!(
                "modem frame_duration_s must be positive, got {}",
                self.frame_duration_s
            ));
        }
        if !(self.interleaver_span_s >= self.frame_duration_s && self.interleaver_span_s.is_finite())
        {
            out.push(format!(
                "modem interleaver_span_s ({}) must be at least frame_duration_s ({})",
                self.interleaver_span_s, self.frame_duration_s
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), DatalinkError> {
        match self.problems().into_iter().next() {
            Some(p) => Err(DatalinkError::InvalidModem(p)),
            None => Ok(()),
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decide one interleaved frame group from the margins sampled across its
/// span. Interleaving spreads code words over the span, so the decoder sees
/// the span-averaged linear margin; FEC is a hard threshold at 0 dB.
pub fn frame_success(margins_db: &[f64]) -> Result<bool, DatalinkError> {
    if margins_db.is_empty() {
        return Err(DatalinkError::EmptySeries);
    }
    let mean = margins_db.iter().map(|&m| db_to_linear(m)).sum::<f64>() / margins_db.len() as f64;
    Ok(mean >= 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameOutcome {
    pub t_s: f64,
    pub frame_ok: bool,
    pub bits_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryRecord {
    pub frames: Vec<FrameOutcome>,
    pub delivered_bits: u64,
    pub dropped_bits: u64,
    pub availability: f64,
}

/// Bits carried by one frame across all WDM channels.
pub fn bits_per_frame(modem: &ModemProfile, channels: u32) -> u64 {
    (modem.rate_bps * channels as f64 * modem.frame_duration_s).round() as u64
}

/// Run a uniformly sampled margin series through the modem.
///
/// Time is cut into frames of `frame_duration_s`; frames are grouped into
/// interleaver spans and each span is decided once by [`frame_success`] over
/// the margin samples falling inside it. Bits of failed frames are counted as
/// dropped.
pub fn simulate_delivery(
    margins_db: &[f64],
    sample_dt_s: f64,
    modem: &ModemProfile,
    channels: u32,
) -> Result<DeliveryRecord, DatalinkError> {
    if !(1..=4).contains(&channels) {
        return Err(DatalinkError::Channels(channels));
    }
    modem.validate()?;
    if !(sample_dt_s > 0.0) {
        return Err(DatalinkError::Invalid(format!(
            "sample interval must be positive, got {sample_dt_s}"
        )));
    }
    if margins_db.is_empty() {
        return Ok(DeliveryRecord {
            frames: Vec::new(),
            delivered_bits: 0,
            dropped_bits: 0,
            availability: 0.0,
        });
    }

    let duration = margins_db.len() as f64 * sample_dt_s;
    let n_frames = (duration / modem.frame_duration_s + 1e-9).floor() as usize;
    let frames_per_span =
        ((modem.interleaver_span_s / modem.frame_duration_s + 1e-9).floor() as usize).max(1);
    let frame_bits = bits_per_frame(modem, channels);
    let sample_index = |t: f64| ((t / sample_dt_s + 1e-9).floor() as usize).min(margins_db.len());

    let mut frames = Vec::with_capacity(n_frames);
    let mut delivered = 0u64;
    let mut dropped = 0u64;
    let mut ok_frames = 0usize;
    let mut first = 0usize;
    while first < n_frames {
        let last = (first + frames_per_span).min(n_frames);
        let t_start = first as f64 * modem.frame_duration_s;
        let t_end = last as f64 * modem.frame_duration_s;
        let (i0, i1) = (sample_index(t_start), sample_index(t_end).max(sample_index(t_start) + 1));
        let ok = frame_success(&margins_db[i0..i1.min(margins_db.len())])?;
        for f in first..last {
            let bits = if ok { frame_bits } else { 0 };
            if ok {
                delivered += frame_bits;
                ok_frames += 1;
            } else {
                dropped += frame_bits;
            }
            frames.push(FrameOutcome {
                t_s: f as f64 * modem.frame_duration_s,
                frame_ok: ok,
                bits_delivered: bits,
            });
        }
        first = last;
    }
    let availability = if n_frames == 0 {
        0.0
    } else {
        ok_frames as f64 / n_frames as f64
    };
    Ok(DeliveryRecord {
        frames,
        delivered_bits: delivered,
        dropped_bits: dropped,
        availability,
    })
}

/// Onboard memory that holds payload data until a contact drains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSpec {
    pub capacity_bits: f64,
    pub ingest_rate_bps: f64,
    /// Occupancy at the start of a run.
    pub initial_bits: f64,
}

impl Default for BufferSpec {
    /// One pass worth of 10 Gbit/s downlink (600 s), starting full.
    fn default() -> Self {
        BufferSpec {
            capacity_bits: 6e12,
            ingest_rate_bps: 0.0,
            initial_bits: 6e12,
        }
    }
}

impl BufferSpec {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.capacity_bits > 0.0 && self.capacity_bits.is_finite()) {
            out.push(format!("buffer capacity_bits must be positive, got {}", self.capacity_bits));
        }
        if !(self.ingest_rate_bps >= 0.0 && self.ingest_rate_bps.is_finite()) {
            out.push(format!(
                "buffer ingest_rate_bps must be non-negative, got {}",
                self.ingest_rate_bps
            ));
        }
        if !(self.initial_bits >= 0.0 && self.initial_bits <= self.capacity_bits) {
            out.push(format!(
                "buffer initial_bits ({}) must lie in [0, capacity_bits]",
                self.initial_bits
            ));
        }
        out
    }

    pub fn initial_state(&self) -> BufferState {
        BufferState {
            occupancy_bits: self.initial_bits.round() as u64,
            capacity_bits: self.capacity_bits.round() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BufferState {
    pub occupancy_bits: u64,
    pub capacity_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferStep {
    pub state: BufferState,
    pub delivered_bits: u64,
    pub dropped_bits: u64,
}

/// Advance the buffer by one interval. Delivery is limited to the data on
/// board (previous occupancy plus this interval's ingest); whatever then
/// exceeds capacity is dropped. `ingested = delivered + dropped + Δoccupancy`
/// holds exactly.
pub fn buffer_step(state: BufferState, ingest_bits: u64, requested_bits: u64) -> BufferStep {
    let available = state.occupancy_bits + ingest_bits;
    let delivered = requested_bits.min(available);
    let remaining = available - delivered;
    let occupancy = remaining.min(state.capacity_bits);
    BufferStep {
        state: BufferState {
            occupancy_bits: occupancy,
            capacity_bits: state.capacity_bits,
        },
        delivered_bits: delivered,
        dropped_bits: remaining - occupancy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_success_examples() {
        assert!(frame_success(&[3.0; 10]).unwrap());
        assert!(!frame_success(&[-1.0; 10]).unwrap());
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 6.0 } else { -3.0 }).collect();
        // (10^0.6 + 10^-0.3) / 2 = 2.24
        assert!(frame_success(&alt).unwrap());
        assert_eq!(frame_success(&[]), Err(DatalinkError::EmptySeries));
        assert!(!frame_success(&[f64::NEG_INFINITY]).unwrap());
    }

    #[test]
    fn full_pass_delivery() {
        let modem = ModemProfile::ten_gigabit();
        let margins = vec![10.0; 6000];
        let rec = simulate_delivery(&margins, 0.1, &modem, 1).unwrap();
        assert_eq!(rec.delivered_bits, 6_000_000_000_000);
        assert_eq!(rec.dropped_bits, 0);
        assert_eq!(rec.availability, 1.0);
        let rec4 = simulate_delivery(&margins, 0.1, &modem, 4).unwrap();
        assert_eq!(rec4.delivered_bits, 24_000_000_000_000);
    }

    #[test]
    fn nothing_closes() {
        let modem = ModemProfile::ten_gigabit();
        let rec = simulate_delivery(&vec![-10.0; 6000], 0.1, &modem, 1).unwrap();
        assert_eq!(rec.delivered_bits, 0);
        assert_eq!(rec.availability, 0.0);
    }

    #[test]
    fn channel_count_checked() {
        let modem = ModemProfile::ten_gigabit();
        assert_eq!(
            simulate_delivery(&[1.0], 0.1, &modem, 5),
            Err(DatalinkError::Channels(5))
        );
        assert!(simulate_delivery(&[1.0], 0.1, &modem, 0).is_err());
    }

    #[test]
    fn interleaver_rides_through_short_fades() {
        // One span of 1 s sampled at 1 ms: a 100 ms deep fade inside an
        // otherwise healthy span is absorbed.
        let modem = ModemProfile::ten_gigabit();
        let mut margins = vec![3.0; 1000];
        for m in margins.iter_mut().skip(400).take(100) {
            *m = -20.0;
        }
        let rec = simulate_delivery(&margins, 0.001, &modem, 1).unwrap();
        assert_eq!(rec.availability, 1.0);
    }

    #[test]
    fn buffer_examples() {
        let empty = BufferState { occupancy_bits: 0, capacity_bits: 6_000_000_000_000 };
        let s = buffer_step(empty, 1_000_000_000, 0);
        assert_eq!(s.state.occupancy_bits, 1_000_000_000);
        assert_eq!(s.dropped_bits, 0);

        let full = BufferState { occupancy_bits: 6_000_000_000_000, ..empty };
        let s = buffer_step(full, 1_000_000_000, 0);
        assert_eq!(s.state.occupancy_bits, 6_000_000_000_000);
        assert_eq!(s.dropped_bits, 1_000_000_000);

        let part = BufferState { occupancy_bits: 500_000_000_000, ..empty };
        let s = buffer_step(part, 0, 600_000_000_000);
        assert_eq!(s.state.occupancy_bits, 0);
        assert_eq!(s.delivered_bits, 500_000_000_000);
    }

    #[test]
    fn modem_validation() {
        let mut m = ModemProfile::ten_gigabit();
        assert!(m.validate().is_ok());
        m.interleaver_span_s = 0.001;
        assert!(m.validate().is_err());
        m = ModemProfile::ten_gigabit();
        m.rate_bps = 0.0;
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn buffer_conserves_bits(
            occ in 0u64..1_000_000,
            cap_extra in 0u64..1_000_000,
            steps in proptest::collection::vec((0u64..500_000, 0u64..500_000), 1..50),
        ) {
            let mut state = BufferState { occupancy_bits: occ, capacity_bits: occ + cap_extra };
            let start = state.occupancy_bits;
            let (mut ingested, mut delivered, mut dropped) = (0u64, 0u64, 0u64);
            for (ingest, request) in steps {
                let s = buffer_step(state, ingest, request);
                prop_assert!(s.delivered_bits <= state.occupancy_bits + ingest);
                prop_assert!(s.state.occupancy_bits <= s.state.capacity_bits);
                ingested += ingest;
                delivered += s.delivered_bits;
                dropped += s.dropped_bits;
                state = s.state;
            }
            prop_assert_eq!(ingested + start, delivered + dropped + state.occupancy_bits);
        }

        #[test]
        fn frame_success_is_monotone(
            margins in proptest::collection::vec(-20.0f64..20.0, 1..40),
            lift in 0.0f64..10.0,
        ) {
            let raised: Vec<f64> = margins.iter().map(|m| m + lift).collect();
            if frame_success(&margins).unwrap() {
                prop_assert!(frame_success(&raised).unwrap());
            }
        }
    }
}
