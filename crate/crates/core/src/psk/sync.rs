use crate::bits::BitStream;
use crate::error::{ModemError, Result};
use crate::signal::AudioSignal;

use super::{bpsk_modulate, check_rate, mono_samples, PskConfig};

/// 16-bit sync header (0x2B7C). Its aperiodic autocorrelation sidelobes stay
/// at or below 3/16 both as a bipolar BPSK sequence and as the 17 absolute
/// phases it produces under differential encoding.
pub const DEFAULT_HEADER: [bool; 16] = [
    false, false, true, false, true, false, true, true, false, true, true, true, true, true, false, false,
];

/// Peak-to-median ratio below which a correlation peak is not trusted.
const CONFIDENCE_RATIO: f64 = 3.0;

/// Locates the BPSK-modulated `header_bits` in `received`, searching delays
/// `0..=max_delay_samples`.
pub fn estimate_delay(
    received: &AudioSignal,
    header_bits: &BitStream,
    config: &PskConfig,
    max_delay_samples: usize,
) -> Result<usize> {
    if header_bits.is_empty() {
        return Err(ModemError::config("sync header must not be empty"));
    }
    check_rate(received, config)?;
    let template = bpsk_modulate(header_bits, config)?;
    estimate_delay_with_template(&mono_samples(received), template.samples(), max_delay_samples, config.samples_per_bit())
}

/// Normalised cross-correlation search for `template` in `received`.
///
/// Returns the first delay with the largest correlation. Lags within
/// `exclusion` samples of the peak are left out of the off-peak median used
/// for the confidence test.
pub fn estimate_delay_with_template(
    received: &[f64],
    template: &[f64],
    max_delay_samples: usize,
    exclusion: usize,
) -> Result<usize> {
    let len = template.len();
    let needed = len + max_delay_samples;
    if received.len() < needed {
        return Err(ModemError::InsufficientData { needed, available: received.len() });
    }
    let template_norm = template.iter().map(|x| x * x).sum::<f64>().sqrt();
    if template_norm == 0.0 {
        return Err(ModemError::config("sync template has no energy"));
    }

    let mut window_energy: f64 = received[..len].iter().map(|x| x * x).sum();
    let mut scores = Vec::with_capacity(max_delay_samples + 1);
    for d in 0..=max_delay_samples {
        if d > 0 {
            // periodic recomputation bounds drift in the running sum
            window_energy = if d % 4096 == 0 {
                received[d..d + len].iter().map(|x| x * x).sum()
            } else {
                (window_energy - received[d - 1] * received[d - 1] + received[d + len - 1] * received[d + len - 1]).max(0.0)
            };
        }
        let dot: f64 = received[d..d + len].iter().zip(template).map(|(r, t)| r * t).sum();
        let denom = template_norm * window_energy.sqrt();
        scores.push(if denom > 1e-300 { dot / denom } else { 0.0 });
    }

    let (best, peak) = scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &s)| if s > bp { (i, s) } else { (bi, bp) });

    let mut off_peak: Vec<f64> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(best) > exclusion)
        .map(|(_, s)| s.abs())
        .collect();
    let median = if off_peak.is_empty() {
        0.0
    } else {
        off_peak.sort_by(f64::total_cmp);
        let m = off_peak.len() / 2;
        if off_peak.len().is_multiple_of(2) { 0.5 * (off_peak[m - 1] + off_peak[m]) } else { off_peak[m] }
    };
    let floor = CONFIDENCE_RATIO * median;
    if !(peak > 0.0) || peak < floor {
        return Err(ModemError::SyncNotFound { peak, floor });
    }
    Ok(best)
}
