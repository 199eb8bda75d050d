use crate::bits::BitStream;
use crate::error::{ModemError, Result};
use crate::signal::{carrier_phase, AudioSignal};

use super::{apply_transition_ramp, check_rate, mono_samples, DemodTrace, PskConfig};

/// `A · m(t) · cos(2π f_c t)` without any amplitude shaping. The carrier phase
/// runs continuously from sample 0.
pub fn bpsk_waveform(bits: &BitStream, config: &PskConfig) -> Result<AudioSignal> {
    config.validate()?;
    if bits.is_empty() {
        return Err(ModemError::InvalidPayload("cannot modulate an empty bit stream".into()));
    }
    let spb = config.samples_per_bit();
    let samples = bits
        .bipolar()
        .values()
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| {
            let amp = config.amplitude * f64::from(m);
            (i * spb..(i + 1) * spb).map(move |k| amp * carrier_phase(config.carrier_hz, k, config.sample_rate_hz).cos())
        })
        .collect();
    AudioSignal::mono(samples, config.sample_rate_hz)
}

/// BPSK waveform with the amplitude ramped down around every sign change.
pub fn bpsk_modulate(bits: &BitStream, config: &PskConfig) -> Result<AudioSignal> {
    let raw = bpsk_waveform(bits, config)?;
    let spb = config.samples_per_bit();
    let reversals: Vec<usize> = bits
        .as_slice()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| (i + 1) * spb)
        .collect();
    apply_transition_ramp(&raw, &reversals, config)
}

/// Correlates each bit period against a unit carrier reference delayed by
/// `delay_samples`. Positive correlation is a logical one.
pub fn bpsk_demodulate_coherent(received: &AudioSignal, config: &PskConfig, delay_samples: usize) -> Result<DemodTrace> {
    config.validate()?;
    check_rate(received, config)?;
    let spb = config.samples_per_bit();
    let r = mono_samples(received);
    if r.len() < delay_samples + spb {
        return Err(ModemError::InsufficientData { needed: delay_samples + spb, available: r.len() });
    }
    let nbits = (r.len() - delay_samples) / spb;
    let full_scale = config.amplitude * spb as f64 / 2.0;
    let mut trace = DemodTrace::default();
    for n in 0..nbits {
        let y: f64 = (n * spb..(n + 1) * spb)
            .map(|k| r[delay_samples + k] * carrier_phase(config.carrier_hz, k, config.sample_rate_hz).cos())
            .sum();
        trace.per_bit_correlation.push(y);
        trace.per_bit_phase_estimate.push((y / full_scale).clamp(-1.0, 1.0).acos());
        trace.decisions.push(y > 0.0);
        trace.erasures.push(y == 0.0);
    }
    Ok(trace)
}
