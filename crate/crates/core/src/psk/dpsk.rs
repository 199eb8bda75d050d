use std::f64::consts::{PI, TAU};

use crate::bits::BitStream;
use crate::error::{ModemError, Result};
use crate::signal::{carrier_phase, AudioSignal};

use super::{apply_transition_ramp, check_rate, mono_samples, DemodTrace, PskConfig};

/// Absolute symbol phases: a zero-phase reference symbol followed by one
/// symbol per bit, each advancing the phase by π for a one and 0 for a zero.
pub fn dpsk_encode(bits: &BitStream) -> Vec<f64> {
    let mut phases = Vec::with_capacity(bits.len() + 1);
    let mut phase = 0.0_f64;
    phases.push(phase);
    for bit in bits.iter() {
        if bit {
            phase = (phase + PI) % TAU;
        }
        phases.push(phase);
    }
    phases
}

/// Unshaped DPSK carrier, `len(bits) + 1` symbol periods long.
pub fn dpsk_waveform(bits: &BitStream, config: &PskConfig) -> Result<AudioSignal> {
    config.validate()?;
    if bits.is_empty() {
        return Err(ModemError::InvalidPayload("cannot modulate an empty bit stream".into()));
    }
    let spb = config.samples_per_bit();
    let samples = dpsk_encode(bits)
        .into_iter()
        .enumerate()
        .flat_map(|(i, phase)| {
            (i * spb..(i + 1) * spb).map(move |k| {
                config.amplitude * (carrier_phase(config.carrier_hz, k, config.sample_rate_hz) + phase).cos()
            })
        })
        .collect();
    AudioSignal::mono(samples, config.sample_rate_hz)
}

/// DPSK waveform with amplitude ramps at every π phase step.
pub fn dpsk_modulate(bits: &BitStream, config: &PskConfig) -> Result<AudioSignal> {
    let raw = dpsk_waveform(bits, config)?;
    let spb = config.samples_per_bit();
    let reversals: Vec<usize> = bits
        .iter()
        .enumerate()
        .filter(|&(_, b)| b)
        .map(|(i, _)| (i + 1) * spb)
        .collect();
    apply_transition_ramp(&raw, &reversals, config)
}

/// Symmetric FIR band-pass centred on the carrier with unit gain there.
///
/// Half-length equals the ramp length, so a transient starting at a symbol
/// boundary has died out before the integration window opens. Returns
/// `[1.0]` when filtering is disabled or the ramp is empty.
pub fn receive_filter_kernel(config: &PskConfig) -> Vec<f64> {
    let half = config.ramp_len();
    if !config.receive_filter || half == 0 {
        return vec![1.0];
    }
    let omega = TAU * config.carrier_hz / f64::from(config.sample_rate_hz);
    let h = half as f64;
    let raw: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|j| {
            let j = j as f64;
            0.5 * (1.0 + (PI * j / (h + 1.0)).cos()) * (omega * j).cos()
        })
        .collect();
    // real and symmetric, so the response at the carrier is real
    let gain: f64 = raw
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (omega * (i as f64 - h)).cos())
        .sum();
    raw.into_iter().map(|c| c / gain).collect()
}

fn filtered_at(r: &[f64], kernel: &[f64], k: usize) -> f64 {
    let half = kernel.len() / 2;
    kernel
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (k + half).checked_sub(i).and_then(|idx| r.get(idx)).map(|&x| c * x))
        .sum()
}

/// Delay-and-multiply DPSK detection.
///
/// Symbol `n + 1` is multiplied sample by sample with symbol `n` one bit
/// period earlier and the product is summed over the interior of the period,
/// skipping `ramp_len` samples at each edge and trimmed to a whole number of
/// carrier cycles so the double-frequency term cancels. The sum is scaled so that a
/// clean signal at the configured amplitude gives `cos θ`: +1 for no phase
/// change (logical zero) and -1 for a reversal (logical one).
/// Longest window of at most `max_len` samples spanning (closest to) a whole
/// number of carrier cycles, searched over one carrier period.
fn whole_cycle_window(max_len: usize, config: &PskConfig) -> usize {
    let cycles_per_sample = config.carrier_hz / f64::from(config.sample_rate_hz);
    let period = (1.0 / cycles_per_sample).ceil() as usize;
    let off_cycle = |len: usize| {
        let c = len as f64 * cycles_per_sample;
        (c - c.round()).abs()
    };
    (max_len.saturating_sub(period).max(1)..=max_len)
        .rev()
        .min_by(|&a, &b| off_cycle(a).total_cmp(&off_cycle(b)))
        .unwrap_or(max_len)
}

pub fn dpsk_demodulate(received: &AudioSignal, config: &PskConfig, start_offset_samples: usize) -> Result<DemodTrace> {
    config.validate()?;
    check_rate(received, config)?;
    let spb = config.samples_per_bit();
    let r = mono_samples(received);
    let needed = start_offset_samples + 2 * spb;
    if r.len() < needed {
        return Err(ModemError::InsufficientData { needed, available: r.len() });
    }
    let symbols = (r.len() - start_offset_samples) / spb;
    let guard = config.ramp_len();
    let window = whole_cycle_window(spb - 2 * guard, config);
    let kernel = receive_filter_kernel(config);

    // receive-filtered integration windows, one per symbol
    let windows: Vec<Vec<f64>> = (0..symbols)
        .map(|s| {
            let start = start_offset_samples + s * spb + guard;
            (start..start + window).map(|k| filtered_at(&r, &kernel, k)).collect()
        })
        .collect();

    let norm = 2.0 / (config.amplitude * config.amplitude * window as f64);
    let mut trace = DemodTrace::default();
    let mut magnitude_sum = 0.0;
    for (n, pair) in windows.windows(2).enumerate() {
        let y = norm * pair[1].iter().zip(&pair[0]).map(|(a, b)| a * b).sum::<f64>();
        magnitude_sum += y.abs();
        let running_mean = magnitude_sum / (n + 1) as f64;
        let y_gain_normalised = if running_mean > 0.0 { y / running_mean } else { 0.0 };
        trace.per_bit_correlation.push(y);
        trace.per_bit_phase_estimate.push(y_gain_normalised.clamp(-1.0, 1.0).acos());
        trace.decisions.push(y < 0.0);
        trace.erasures.push(y == 0.0 || y_gain_normalised.abs() < config.erasure_floor);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let enc = |s: &str| dpsk_encode(&BitStream::parse_payload(s).unwrap());
        assert_eq!(enc("000"), vec![0.0; 4]);
        assert_eq!(enc("11"), vec![0.0, PI, 0.0]);
        assert_eq!(enc("101"), vec![0.0, PI, PI, 0.0]);
    }

    #[test]
    fn single_zero_is_two_identical_periods() {
        let cfg = PskConfig::default();
        let s = dpsk_modulate(&BitStream::new(vec![false]), &cfg).unwrap();
        assert_eq!(s.len(), 960);
        let x = s.samples();
        for k in 0..480 {
            assert!((x[k] - x[k + 480]).abs() < 1e-9);
        }
        assert_eq!(s, dpsk_waveform(&BitStream::new(vec![false]), &cfg).unwrap());
    }

    #[test]
    fn single_one_inverts_second_period() {
        let cfg = PskConfig { ramp_fraction: 0.0, ..Default::default() };
        let s = dpsk_modulate(&BitStream::new(vec![true]), &cfg).unwrap();
        let x = s.samples();
        for k in 0..480 {
            assert!((x[k] + x[k + 480]).abs() < 1e-9);
        }
    }

    fn two_period(step: f64) -> AudioSignal {
        let samples = (0..960)
            .map(|k| {
                let phase = if k < 480 { 0.0 } else { step };
                0.8 * (TAU * 19_200.0 * k as f64 / 96_000.0 + phase).cos()
            })
            .collect();
        AudioSignal::mono(samples, 96_000).unwrap()
    }

    #[test]
    fn closed_form_correlations() {
        let cfg = PskConfig { ramp_fraction: 0.0, ..Default::default() };
        let t = dpsk_demodulate(&two_period(PI), &cfg, 0).unwrap();
        assert!((t.per_bit_correlation[0] + 1.0).abs() < 1e-6);
        assert!(t.decisions.as_slice()[0]);
        let t = dpsk_demodulate(&two_period(0.0), &cfg, 0).unwrap();
        assert!((t.per_bit_correlation[0] - 1.0).abs() < 1e-6);
        assert!(!t.decisions.as_slice()[0]);
    }

    #[test]
    fn filter_has_unit_carrier_gain() {
        let cfg = PskConfig::default();
        let k = receive_filter_kernel(&cfg);
        assert_eq!(k.len(), 2 * cfg.ramp_len() + 1);
        let tone = two_period(0.0);
        let r = tone.samples();
        for idx in 200..260 {
            assert!((filtered_at(r, &k, idx) - r[idx]).abs() < 1e-9);
        }
        let off = PskConfig { receive_filter: false, ..cfg };
        assert_eq!(receive_filter_kernel(&off), vec![1.0]);
    }

    #[test]
    fn zero_correlation_is_flagged() {
        let cfg = PskConfig::default();
        let silent = AudioSignal::silence(3 * 480, 1, 96_000).unwrap();
        let t = dpsk_demodulate(&silent, &cfg, 0).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.erasures.iter().all(|&e| e));
        assert!(t.decisions.iter().all(|b| !b));
    }

    #[test]
    fn too_short_rejected() {
        let cfg = PskConfig::default();
        let s = AudioSignal::silence(900, 1, 96_000).unwrap();
        assert!(matches!(dpsk_demodulate(&s, &cfg, 0), Err(ModemError::InsufficientData { .. })));
        let s = AudioSignal::silence(960, 1, 96_000).unwrap();
        assert!(dpsk_demodulate(&s, &cfg, 1).is_err());
    }

    #[test]
    fn round_trip_with_offset() {
        let cfg = PskConfig::default();
        let bits = BitStream::parse_payload("0xDEADBEEF0042").unwrap();
        let s = dpsk_modulate(&bits, &cfg).unwrap();
        let t = dpsk_demodulate(&s, &cfg, 0).unwrap();
        assert_eq!(t.decisions, bits);
        assert_eq!(t.erasure_count(), 0);
        let d = dpsk_demodulate(&s.delayed(1234), &cfg, 1234).unwrap();
        assert_eq!(d, t);
    }
}
