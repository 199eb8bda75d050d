//! Binary and differential phase-shift keying on a single near-ultrasonic
//! carrier.

mod bpsk;
mod dpsk;
mod sync;

use std::borrow::Cow;
use std::f64::consts::PI;

pub use bpsk::{bpsk_demodulate_coherent, bpsk_modulate, bpsk_waveform};
pub use dpsk::{dpsk_demodulate, dpsk_encode, dpsk_modulate, dpsk_waveform, receive_filter_kernel};
pub use sync::{estimate_delay, estimate_delay_with_template, DEFAULT_HEADER};

use crate::bits::BitStream;
use crate::error::{ModemError, Result};
use crate::signal::{validate_frequency, AudioSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct PskConfig {
    pub carrier_hz: f64,
    pub bit_rate_bps: f64,
    pub sample_rate_hz: u32,
    pub amplitude: f64,
    /// Fraction of a bit period tapered on each side of a phase reversal.
    pub ramp_fraction: f64,
    /// Band-limit the received signal around the carrier before differential
    /// detection.
    pub receive_filter: bool,
    /// Gain-normalised |y| below which a DPSK decision is flagged as an erasure.
    pub erasure_floor: f64,
}

impl Default for PskConfig {
    fn default() -> Self {
        PskConfig {
            carrier_hz: 19_200.0,
            bit_rate_bps: 200.0,
            sample_rate_hz: 96_000,
            amplitude: 0.8,
            ramp_fraction: 0.1,
            receive_filter: true,
            erasure_floor: 0.1,
        }
    }
}

impl PskConfig {
    pub fn samples_per_bit(&self) -> usize {
        (f64::from(self.sample_rate_hz) / self.bit_rate_bps).round() as usize
    }

    /// Samples tapered on each side of a ramped boundary.
    pub fn ramp_len(&self) -> usize {
        (self.ramp_fraction * self.samples_per_bit() as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        validate_frequency(self.carrier_hz, self.sample_rate_hz)?;
        if !(self.bit_rate_bps > 0.0) || !self.bit_rate_bps.is_finite() {
            return Err(ModemError::config(format!("bit rate must be positive, got {}", self.bit_rate_bps)));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(ModemError::config(format!("amplitude must be in (0, 1], got {}", self.amplitude)));
        }
        if !(0.0..0.5).contains(&self.ramp_fraction) {
            return Err(ModemError::config(format!("ramp fraction must be in [0, 0.5), got {}", self.ramp_fraction)));
        }
        if !(self.erasure_floor >= 0.0) {
            return Err(ModemError::config("erasure floor must be non-negative"));
        }
        let spb = self.samples_per_bit();
        if spb < 8 {
            return Err(ModemError::config(format!("{spb} samples per bit is below the minimum of 8")));
        }
        if 2 * self.ramp_len() >= spb {
            return Err(ModemError::config("ramp windows leave no integration interval"));
        }
        Ok(())
    }
}

/// Per-bit demodulator output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemodTrace {
    /// Correlator output sampled at the end of each bit period.
    pub per_bit_correlation: Vec<f64>,
    /// Estimated phase (radians, in `[0, π]`) behind each decision.
    pub per_bit_phase_estimate: Vec<f64>,
    pub decisions: BitStream,
    /// Low-confidence decisions; the bit is still emitted by sign.
    pub erasures: Vec<bool>,
}

impl DemodTrace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn erasure_count(&self) -> usize {
        self.erasures.iter().filter(|&&e| e).count()
    }

    /// Drops the first `n` decisions (e.g. a sync header).
    pub fn skip(mut self, n: usize) -> DemodTrace {
        let n = n.min(self.len());
        self.per_bit_correlation.drain(..n);
        self.per_bit_phase_estimate.drain(..n);
        self.erasures.drain(..n);
        self.decisions = self.decisions.as_slice()[n..].to_vec().into();
        self
    }
}

/// Raised-cosine taper value at half-integer distance `d` (in samples) from
/// a boundary: 0 at the boundary, 1 at `ramp_len`.
fn taper(distance: f64, ramp_len: usize) -> f64 {
    0.5 * (1.0 - (PI * distance / ramp_len as f64).cos())
}

/// Tapers the amplitude to zero on both sides of every listed boundary.
///
/// `boundaries` are sample indices where a new bit period starts; callers
/// pass only the boundaries across which the carrier phase reverses.
pub fn apply_transition_ramp(signal: &AudioSignal, boundaries: &[usize], config: &PskConfig) -> Result<AudioSignal> {
    config.validate()?;
    let ramp = config.ramp_len();
    if ramp == 0 || boundaries.is_empty() {
        return Ok(signal.clone());
    }
    for w in boundaries.windows(2) {
        if w[1] <= w[0] {
            return Err(ModemError::config("ramp boundaries must be strictly increasing"));
        }
        if w[1] - w[0] < 2 * ramp {
            return Err(ModemError::config(format!(
                "ramp windows around boundaries {} and {} overlap",
                w[0], w[1]
            )));
        }
    }
    let len = signal.len();
    if let Some(&b) = boundaries.iter().find(|&&b| b < ramp || b + ramp > len) {
        return Err(ModemError::config(format!("ramp window around boundary {b} exceeds the signal")));
    }
    let weights: Vec<f64> = (0..ramp).map(|j| taper(j as f64 + 0.5, ramp)).collect();
    let channels = signal
        .channels()
        .iter()
        .map(|ch| {
            let mut out = ch.clone();
            for &b in boundaries {
                for (j, &w) in weights.iter().enumerate() {
                    out[b - 1 - j] *= w;
                    out[b + j] *= w;
                }
            }
            out
        })
        .collect();
    AudioSignal::from_channels(channels, signal.sample_rate_hz())
}

pub(crate) fn mono_samples(signal: &AudioSignal) -> Cow<'_, [f64]> {
    if signal.is_mono() {
        Cow::Borrowed(signal.samples())
    } else {
        Cow::Owned(signal.mixdown().samples().to_vec())
    }
}

pub(crate) fn check_rate(signal: &AudioSignal, config: &PskConfig) -> Result<()> {
    if signal.sample_rate_hz() != config.sample_rate_hz {
        return Err(ModemError::IncompatibleSignals(format!(
            "signal sampled at {} Hz, modem configured for {} Hz",
            signal.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    Ok(())
}
