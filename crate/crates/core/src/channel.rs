//! Simulated acoustic channel: gain, propagation delay, and additive
//! background noise scaled to a target signal-to-noise ratio at the carrier.
//!
//! SNR is measured per FFT bin: the signal's mean power in the bin nearest
//! the carrier over the noise's mean power in that same bin, both taken over
//! non-overlapping 4096-point rectangular frames.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ModemError, Result};
use crate::seed::derive_seed;
use crate::signal::{AudioSignal, SpectrumAnalyzer, Window};

pub const SNR_FFT_SIZE: usize = 4096;

/// Bins either side of the carrier averaged when estimating the noise level
/// used for scaling.
const NOISE_ESTIMATE_HALFWIDTH: usize = 8;

/// Fraction of clipped samples above which a channel output carries a
/// clipping warning.
const CLIP_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    White,
    LowpassMusic,
    LowpassVoice,
    BroadbandJangle,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] =
        [NoiseKind::White, NoiseKind::LowpassMusic, NoiseKind::LowpassVoice, NoiseKind::BroadbandJangle];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::LowpassMusic => "lowpass_music",
            NoiseKind::LowpassVoice => "lowpass_voice",
            NoiseKind::BroadbandJangle => "broadband_jangle",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModemError::config(format!("unknown noise kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db_at_carrier: f64,
    pub carrier_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub delay_samples: usize,
    pub gain: f64,
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { delay_samples: 0, gain: 1.0, noise: None, seed: 0 }
    }
}

impl ChannelSpec {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub signal: AudioSignal,
    /// The noise that was added, before clipping.
    pub noise: Option<AudioSignal>,
    pub clipped_samples: usize,
    /// More than 1% of output samples had to be clipped.
    pub clipping_warning: bool,
}

/// Carrier-bin power averaged over channels and frames. With `halfwidth > 0`
/// the neighbouring bins are averaged in as well.
fn carrier_bin_power(signal: &AudioSignal, carrier_hz: f64, fft_size: usize, halfwidth: usize) -> Result<f64> {
    let mut analyzer = SpectrumAnalyzer::new(fft_size, Window::Rectangular, signal.sample_rate_hz())?;
    let mut total = 0.0;
    for ch in signal.channels() {
        let spec = analyzer.averaged_spectrum(ch)?;
        let k = spec.nearest_bin(carrier_hz);
        let lo = k.saturating_sub(halfwidth);
        let hi = (k + halfwidth).min(spec.bin_power.len() - 1);
        total += spec.bin_power[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
    }
    Ok(total / signal.channel_count() as f64)
}

fn measurement_fft_size(len: usize) -> usize {
    if len >= SNR_FFT_SIZE {
        SNR_FFT_SIZE
    } else {
        // largest power of two that fits, for very short transmissions
        (1usize << (usize::BITS - 1 - len.max(2).leading_zeros())).max(2)
    }
}

/// `gain · signal`, delayed by `delay_samples`, plus noise, clipped to [-1, 1].
pub fn apply_channel(signal: &AudioSignal, spec: &ChannelSpec) -> Result<ChannelOutput> {
    if !(spec.gain > 0.0) || !spec.gain.is_finite() {
        return Err(ModemError::config(format!("channel gain must be positive, got {}", spec.gain)));
    }
    let scaled = signal.scaled(spec.gain);
    let mut channels = scaled.delayed(spec.delay_samples).into_channels();
    let sr = signal.sample_rate_hz();

    let noise = match &spec.noise {
        None => None,
        Some(ns) => {
            crate::signal::validate_frequency(ns.carrier_hz, sr)?;
            if !ns.snr_db_at_carrier.is_finite() {
                return Err(ModemError::config("SNR must be finite"));
            }
            let total_len = channels[0].len();
            let raw: Vec<Vec<f64>> = (0..channels.len())
                .map(|c| {
                    synth_noise(ns.kind, total_len, sr, derive_seed(spec.seed, &[c as u64]))
                        .map(|n| n.into_channels().remove(0))
                })
                .collect::<Result<_>>()?;
            let raw = AudioSignal::from_channels(raw, sr)?;
            let signal_power = carrier_bin_power(&scaled, ns.carrier_hz, measurement_fft_size(scaled.len()), 0)?;
            let noise_power = carrier_bin_power(
                &raw,
                ns.carrier_hz,
                measurement_fft_size(raw.len()),
                NOISE_ESTIMATE_HALFWIDTH,
            )?;
            let scale = if signal_power > 0.0 && noise_power > 0.0 {
                (signal_power / (noise_power * 10f64.powf(ns.snr_db_at_carrier / 10.0))).sqrt()
            } else {
                0.0
            };
            let noise = raw.scaled(scale);
            for (out, n) in channels.iter_mut().zip(noise.channels()) {
                for (o, &x) in out.iter_mut().zip(n) {
                    *o += x;
                }
            }
            Some(noise)
        }
    };

    let mut clipped = 0;
    for x in channels.iter_mut().flatten() {
        if x.abs() > 1.0 {
            clipped += 1;
            *x = x.clamp(-1.0, 1.0);
        }
    }
    let total = channels.len() * channels[0].len();
    Ok(ChannelOutput {
        signal: AudioSignal::from_channels(channels, sr)?,
        noise,
        clipped_samples: clipped,
        clipping_warning: clipped as f64 > CLIP_WARNING_FRACTION * total as f64,
    })
}

/// Two cascaded one-pole low-pass sections with the given corner.
fn lowpass_cascade(x: &mut [f64], corner_hz: f64, sample_rate_hz: u32, warmup: usize) {
    let a = (-std::f64::consts::TAU * corner_hz / f64::from(sample_rate_hz)).exp();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (i, v) in x.iter_mut().enumerate() {
        s1 = a * s1 + (1.0 - a) * *v;
        s2 = a * s2 + (1.0 - a) * s1;
        if i >= warmup {
            *v = s2;
        }
    }
}

/// Envelope of sporadic decaying bursts over a low background level.
fn jangle_envelope(rng: &mut ChaCha8Rng, n: usize, sample_rate_hz: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate_hz);
    let burst_rate_hz = 8.0;
    let decay = (-1.0 / (0.01 * sr)).exp();
    let p_burst = burst_rate_hz / sr;
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            level *= decay;
            if rng.gen::<f64>() < p_burst {
                level += rng.gen_range(0.5..1.5);
            }
            0.3 + level
        })
        .collect()
}

/// Seeded background noise, normalised to unit RMS.
///
/// * `White`: i.i.d. Gaussian.
/// * `LowpassVoice` / `LowpassMusic`: Gaussian through a two-pole low-pass
///   with a 2 kHz / 4 kHz corner; nearly all power sits below 10 kHz.
/// * `BroadbandJangle`: Gaussian with a flat spectrum, gated by random
///   decaying bursts.
pub fn synth_noise(kind: NoiseKind, num_samples: usize, sample_rate_hz: u32, seed: u64) -> Result<AudioSignal> {
    if num_samples == 0 {
        return Err(ModemError::InsufficientData { needed: 1, available: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match kind {
        NoiseKind::White => (0..num_samples).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        NoiseKind::LowpassVoice | NoiseKind::LowpassMusic => {
            let corner = if kind == NoiseKind::LowpassVoice { 2_000.0 } else { 4_000.0 };
            let warmup = (f64::from(sample_rate_hz) / corner * 10.0).ceil() as usize;
            let mut x: Vec<f64> = (0..num_samples + warmup).map(|_| StandardNormal.sample(&mut rng)).collect();
            lowpass_cascade(&mut x, corner, sample_rate_hz, warmup);
            x.drain(..warmup);
            x
        }
        NoiseKind::BroadbandJangle => {
            let env = jangle_envelope(&mut rng, num_samples, sample_rate_hz);
            env.into_iter().map(|e| e * rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };
    let mut samples: Vec<f64> = samples;
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / num_samples as f64).sqrt();
    if rms > 0.0 {
        samples.iter_mut().for_each(|x| *x /= rms);
    }
    AudioSignal::mono(samples, sample_rate_hz)
}

/// `10·log10(P_signal / P_noise)` at the bin nearest `carrier_hz`, each power
/// averaged across 4096-point frames (and across channels).
pub fn measure_snr_at(signal: &AudioSignal, noise: &AudioSignal, carrier_hz: f64) -> Result<f64> {
    if signal.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(ModemError::IncompatibleSignals("sample rates differ".into()));
    }
    for s in [signal, noise] {
        if s.len() < SNR_FFT_SIZE {
            return Err(ModemError::InsufficientData { needed: SNR_FFT_SIZE, available: s.len() });
        }
    }
    let ps = carrier_bin_power(signal, carrier_hz, SNR_FFT_SIZE, 0)?;
    let pn = carrier_bin_power(noise, carrier_hz, SNR_FFT_SIZE, 0)?;
    if pn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ps / pn).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{averaged_power_spectrum, generate_tone, mix};

    fn tone(amplitude: f64, n: usize) -> AudioSignal {
        generate_tone(19_200.0, n, amplitude, 0.0, 96_000).unwrap()
    }

    #[test]
    fn identity_channel() {
        let s = tone(0.8, 5000);
        let out = apply_channel(&s, &ChannelSpec::identity()).unwrap();
        assert_eq!(out.signal, s);
        assert_eq!(out.clipped_samples, 0);
        assert!(out.noise.is_none());
    }

    #[test]
    fn pure_delay() {
        let s = tone(0.8, 960);
        let out = apply_channel(&s, &ChannelSpec { delay_samples: 480, ..Default::default() }).unwrap();
        assert_eq!(out.signal.len(), 1440);
        assert!(out.signal.samples()[..480].iter().all(|&x| x == 0.0));
        assert_eq!(&out.signal.samples()[480..], s.samples());
    }

    #[test]
    fn white_noise_hits_target_snr() {
        let s = tone(0.01, 96_000);
        let spec = ChannelSpec {
            noise: Some(NoiseSpec { kind: NoiseKind::White, snr_db_at_carrier: 20.0, carrier_hz: 19_200.0 }),
            seed: 3,
            ..Default::default()
        };
        let out = apply_channel(&s, &spec).unwrap();
        assert_eq!(out.clipped_samples, 0);
        let snr = measure_snr_at(&s, out.noise.as_ref().unwrap(), 19_200.0).unwrap();
        assert!((snr - 20.0).abs() <= 1.0, "measured {snr}");
    }

    #[test]
    fn heavy_noise_clips_with_warning() {
        let s = tone(0.8, 20_000);
        let spec = ChannelSpec {
            noise: Some(NoiseSpec { kind: NoiseKind::White, snr_db_at_carrier: 0.0, carrier_hz: 19_200.0 }),
            ..Default::default()
        };
        let out = apply_channel(&s, &spec).unwrap();
        assert!(out.clipping_warning);
        assert!(out.signal.max_abs() <= 1.0);
    }

    #[test]
    fn noise_is_seeded() {
        let a = synth_noise(NoiseKind::BroadbandJangle, 1000, 96_000, 5).unwrap();
        let b = synth_noise(NoiseKind::BroadbandJangle, 1000, 96_000, 5).unwrap();
        let c = synth_noise(NoiseKind::BroadbandJangle, 1000, 96_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn fraction_below(kind: NoiseKind, f_hz: f64) -> f64 {
        let n = synth_noise(kind, 96_000 * 4, 96_000, 1).unwrap();
        let spec = averaged_power_spectrum(&n, 4096, Window::Hann).unwrap();
        spec.power_between(0.0, f_hz) / spec.total_power()
    }

    #[test]
    fn lowpass_noise_is_mostly_below_10k() {
        assert!(fraction_below(NoiseKind::LowpassVoice, 10_000.0) >= 0.9);
        assert!(fraction_below(NoiseKind::LowpassMusic, 10_000.0) >= 0.9);
        assert!(fraction_below(NoiseKind::White, 10_000.0) < 0.3);
    }

    #[test]
    fn jangle_is_flat() {
        let n = synth_noise(NoiseKind::BroadbandJangle, 96_000 * 4, 96_000, 2).unwrap();
        let spec = averaged_power_spectrum(&n, 4096, Window::Hann).unwrap();
        let w = spec.bin_width_hz();
        let hi = spec.power_between(18_000.0, 19_500.0) / (1_500.0 / w);
        let lo = spec.power_between(1_000.0, 2_000.0) / (1_000.0 / w);
        let tilt_db = 10.0 * (hi / lo).log10();
        assert!(tilt_db.abs() <= 3.0, "tilt {tilt_db} dB");
    }

    #[test]
    fn snr_measurement_identities() {
        let noise = synth_noise(NoiseKind::White, 40_000, 96_000, 9).unwrap();
        assert_eq!(measure_snr_at(&noise, &noise, 19_200.0).unwrap(), 0.0);
        let s = tone(0.1, 40_000);
        let base = measure_snr_at(&s, &noise, 19_200.0).unwrap();
        let doubled = measure_snr_at(&s.scaled(2.0), &noise, 19_200.0).unwrap();
        assert!((doubled - base - 20.0 * 2f64.log10()).abs() < 1e-9);
        let silent = AudioSignal::silence(40_000, 1, 96_000).unwrap();
        assert_eq!(measure_snr_at(&s, &silent, 19_200.0).unwrap(), f64::INFINITY);
        assert!(measure_snr_at(&tone(0.1, 100), &noise, 19_200.0).is_err());
    }

    #[test]
    fn constructed_pair_reads_15_db() {
        // noise tone at the carrier bin, signal tone scaled by 10^(15/20)
        let n = 8192;
        let f = 820.0 * 96_000.0 / 4096.0;
        let noise = generate_tone(f, n, 0.01, 1.0, 96_000).unwrap();
        let signal = generate_tone(f, n, 0.01 * 10f64.powf(0.75), 0.0, 96_000).unwrap();
        let snr = measure_snr_at(&signal, &noise, f).unwrap();
        assert!((snr - 15.0).abs() <= 0.5, "{snr}");
    }

    #[test]
    fn higher_snr_means_less_noise() {
        let s = tone(0.1, 20_000);
        let var = |snr: f64| {
            let spec = ChannelSpec {
                noise: Some(NoiseSpec { kind: NoiseKind::LowpassMusic, snr_db_at_carrier: snr, carrier_hz: 19_200.0 }),
                seed: 4,
                ..Default::default()
            };
            let n = apply_channel(&s, &spec).unwrap().noise.unwrap();
            n.samples().iter().map(|x| x * x).sum::<f64>()
        };
        assert!(var(10.0) > var(11.0));
        assert!(var(11.0) > var(30.0));
    }

    #[test]
    fn deterministic_component_is_linear() {
        let a = tone(0.2, 3000);
        let b = generate_tone(18_000.0, 3000, 0.3, 0.5, 96_000).unwrap();
        let spec = ChannelSpec { delay_samples: 17, gain: 0.5, ..Default::default() };
        let sum = apply_channel(&mix(&a, &b).unwrap(), &spec).unwrap().signal;
        let parts = mix(&apply_channel(&a, &spec).unwrap().signal, &apply_channel(&b, &spec).unwrap().signal).unwrap();
        for (x, y) in sum.samples().iter().zip(parts.samples()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_change_noise_not_signal() {
        let s = tone(0.05, 10_000);
        let spec = |seed| ChannelSpec {
            noise: Some(NoiseSpec { kind: NoiseKind::White, snr_db_at_carrier: 30.0, carrier_hz: 19_200.0 }),
            seed,
            ..Default::default()
        };
        let a = apply_channel(&s, &spec(1)).unwrap();
        let b = apply_channel(&s, &spec(1)).unwrap();
        let c = apply_channel(&s, &spec(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.noise, c.noise);
        for out in [&a, &c] {
            let noise = out.noise.as_ref().unwrap();
            for ((y, n), x) in out.signal.samples().iter().zip(noise.samples()).zip(s.samples()) {
                assert!((y - n - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_kind_names_round_trip() {
        for k in NoiseKind::ALL {
            assert_eq!(k.name().parse::<NoiseKind>().unwrap(), k);
        }
        assert!("pink".parse::<NoiseKind>().is_err());
    }
}
