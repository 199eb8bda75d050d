//! Waveform primitives shared by every modulation scheme: tone synthesis,
//! one-sided power spectra, in-band noise power and signal arithmetic.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ModemError, Result};

/// A sampled real-valued waveform. Stereo is stored as two equal-length
/// per-channel sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    channels: Vec<Vec<f64>>,
    sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn mono(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        Self::from_channels(vec![samples], sample_rate_hz)
    }

    pub fn stereo(left: Vec<f64>, right: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        Self::from_channels(vec![left, right], sample_rate_hz)
    }

    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(ModemError::config("sample rate must be positive"));
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(ModemError::config(format!(
                "channel count must be 1 or 2, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(ModemError::InsufficientData { needed: 1, available: 0 });
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(ModemError::IncompatibleSignals("channel lengths differ".into()));
        }
        Ok(AudioSignal { channels, sample_rate_hz })
    }

    pub fn silence(num_samples: usize, channel_count: usize, sample_rate_hz: u32) -> Result<Self> {
        Self::from_channels(vec![vec![0.0; num_samples]; channel_count], sample_rate_hz)
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        f64::from(self.sample_rate_hz) / 2.0
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn is_mono(&self) -> bool {
        self.channels.len() == 1
    }

    /// First channel; the only one for mono signals.
    pub fn samples(&self) -> &[f64] {
        &self.channels[0]
    }

    pub fn channel(&self, index: usize) -> Option<&[f64]> {
        self.channels.get(index).map(Vec::as_slice)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn max_abs(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    /// Sum of all channels as a single mono signal.
    pub fn mixdown(&self) -> AudioSignal {
        if self.is_mono() {
            return self.clone();
        }
        let mut out = self.channels[0].clone();
        for ch in &self.channels[1..] {
            for (o, &x) in out.iter_mut().zip(ch) {
                *o += x;
            }
        }
        AudioSignal { channels: vec![out], sample_rate_hz: self.sample_rate_hz }
    }

    pub fn map_samples(&self, mut f: impl FnMut(f64) -> f64) -> AudioSignal {
        AudioSignal {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|&x| f(x)).collect())
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn scaled(&self, gain: f64) -> AudioSignal {
        self.map_samples(|x| x * gain)
    }

    pub fn negated(&self) -> AudioSignal {
        self.map_samples(|x| -x)
    }

    /// Prepends `delay` zero samples to every channel.
    pub fn delayed(&self, delay: usize) -> AudioSignal {
        AudioSignal {
            channels: self
                .channels
                .iter()
                .map(|c| {
                    let mut v = vec![0.0; delay + c.len()];
                    v[delay..].copy_from_slice(c);
                    v
                })
                .collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

fn check_nyquist(freq_hz: f64, sample_rate_hz: u32) -> Result<()> {
    let nyquist_hz = f64::from(sample_rate_hz) / 2.0;
    if !(freq_hz < nyquist_hz) {
        return Err(ModemError::NyquistViolation { freq_hz, nyquist_hz });
    }
    Ok(())
}

/// Rejects frequencies that are negative or not strictly below Nyquist.
pub fn validate_frequency(freq_hz: f64, sample_rate_hz: u32) -> Result<()> {
    if sample_rate_hz == 0 {
        return Err(ModemError::config("sample rate must be positive"));
    }
    if !(freq_hz >= 0.0) {
        return Err(ModemError::config(format!("frequency must be non-negative, got {freq_hz}")));
    }
    check_nyquist(freq_hz, sample_rate_hz)
}

/// Phase of `cos(2π f k / sr + phase)` reduced so that large sample indices
/// keep full precision.
#[inline]
pub(crate) fn carrier_phase(freq_hz: f64, k: usize, sample_rate_hz: u32) -> f64 {
    let cycles = freq_hz * k as f64 / f64::from(sample_rate_hz);
    2.0 * PI * cycles.fract()
}

/// `amplitude · cos(2π f k / sr + phase)` for `k = 0..num_samples`, mono.
pub fn generate_tone(
    freq_hz: f64,
    num_samples: usize,
    amplitude: f64,
    phase_rad: f64,
    sample_rate_hz: u32,
) -> Result<AudioSignal> {
    validate_frequency(freq_hz, sample_rate_hz)?;
    if !(amplitude >= 0.0) {
        return Err(ModemError::config(format!("amplitude must be non-negative, got {amplitude}")));
    }
    let phase = phase_rad.rem_euclid(2.0 * PI);
    let samples = (0..num_samples)
        .map(|k| amplitude * (carrier_phase(freq_hz, k, sample_rate_hz) + phase).cos())
        .collect();
    AudioSignal::mono(samples, sample_rate_hz)
}

/// Element-wise sum of two signals of identical shape.
pub fn mix(a: &AudioSignal, b: &AudioSignal) -> Result<AudioSignal> {
    if a.len() != b.len() {
        return Err(ModemError::IncompatibleSignals(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    mix_padded(a, b)
}

/// Element-wise sum; the shorter signal is zero-padded.
pub fn mix_padded(a: &AudioSignal, b: &AudioSignal) -> Result<AudioSignal> {
    if a.sample_rate_hz != b.sample_rate_hz {
        return Err(ModemError::IncompatibleSignals(format!(
            "sample rate mismatch: {} Hz vs {} Hz",
            a.sample_rate_hz, b.sample_rate_hz
        )));
    }
    if a.channel_count() != b.channel_count() {
        return Err(ModemError::IncompatibleSignals(format!(
            "channel count mismatch: {} vs {}",
            a.channel_count(),
            b.channel_count()
        )));
    }
    let len = a.len().max(b.len());
    let channels = a
        .channels
        .iter()
        .zip(&b.channels)
        .map(|(x, y)| {
            (0..len)
                .map(|k| x.get(k).copied().unwrap_or(0.0) + y.get(k).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    AudioSignal::from_channels(channels, a.sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            // periodic Hann
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// One-sided power spectrum of a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_freq_hz: Vec<f64>,
    pub bin_power: Vec<f64>,
    pub fft_size: usize,
    pub source_sample_rate_hz: u32,
}

impl Spectrum {
    pub fn bin_width_hz(&self) -> f64 {
        f64::from(self.source_sample_rate_hz) / self.fft_size as f64
    }

    /// Index of the bin whose centre is closest to `freq_hz`.
    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        let idx = (freq_hz / self.bin_width_hz()).round().max(0.0) as usize;
        idx.min(self.bin_power.len() - 1)
    }

    pub fn peak_bin(&self) -> usize {
        self.bin_power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) })
            .0
    }

    pub fn total_power(&self) -> f64 {
        self.bin_power.iter().sum()
    }

    /// Summed power of bins whose centre lies in `[f_lo, f_hi]`.
    pub fn power_between(&self, f_lo_hz: f64, f_hi_hz: f64) -> f64 {
        self.bin_freq_hz
            .iter()
            .zip(&self.bin_power)
            .filter(|(&f, _)| f >= f_lo_hz && f <= f_hi_hz)
            .map(|(_, &p)| p)
            .sum()
    }
}

/// Reusable FFT plan and window for repeated frame analysis.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    fft_size: usize,
    sample_rate_hz: u32,
    buf: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(fft_size: usize, window: Window, sample_rate_hz: u32) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(ModemError::config(format!(
                "fft size must be a power of two >= 2, got {fft_size}"
            )));
        }
        if sample_rate_hz == 0 {
            return Err(ModemError::config("sample rate must be positive"));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Ok(SpectrumAnalyzer {
            fft,
            window: window.coefficients(fft_size),
            fft_size,
            sample_rate_hz,
            buf: vec![Complex::default(); fft_size],
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        let width = f64::from(self.sample_rate_hz) / self.fft_size as f64;
        (0..=self.fft_size / 2).map(|i| i as f64 * width).collect()
    }

    /// Writes the one-sided power of the first `fft_size` samples of `frame`
    /// into `out` (length `fft_size/2 + 1`).
    pub fn frame_power_into(&mut self, frame: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.fft_size;
        if frame.len() < n {
            return Err(ModemError::InsufficientData { needed: n, available: frame.len() });
        }
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.buf);
        let scale = 1.0 / (n as f64 * n as f64);
        let half = n / 2;
        for (i, o) in out.iter_mut().enumerate().take(half + 1) {
            let p = self.buf[i].norm_sqr() * scale;
            *o = if i == 0 || i == half { p } else { 2.0 * p };
        }
        Ok(())
    }

    pub fn frame_spectrum(&mut self, frame: &[f64]) -> Result<Spectrum> {
        let mut power = vec![0.0; self.fft_size / 2 + 1];
        self.frame_power_into(frame, &mut power)?;
        Ok(Spectrum {
            bin_freq_hz: self.bin_freqs(),
            bin_power: power,
            fft_size: self.fft_size,
            source_sample_rate_hz: self.sample_rate_hz,
        })
    }

    /// Mean spectrum over all complete non-overlapping frames.
    pub fn averaged_spectrum(&mut self, samples: &[f64]) -> Result<Spectrum> {
        let n = self.fft_size;
        let frames = samples.len() / n;
        if frames == 0 {
            return Err(ModemError::InsufficientData { needed: n, available: samples.len() });
        }
        let mut acc = vec![0.0; n / 2 + 1];
        let mut power = vec![0.0; n / 2 + 1];
        for frame in samples.chunks_exact(n) {
            self.frame_power_into(frame, &mut power)?;
            for (a, p) in acc.iter_mut().zip(&power) {
                *a += p;
            }
        }
        for a in &mut acc {
            *a /= frames as f64;
        }
        Ok(Spectrum {
            bin_freq_hz: self.bin_freqs(),
            bin_power: acc,
            fft_size: n,
            source_sample_rate_hz: self.sample_rate_hz,
        })
    }
}

/// One-sided power spectrum of the first `fft_size` samples of a mono signal.
///
/// Each bin holds `|X_i|² / N²`, doubled for bins other than DC and Nyquist,
/// so a unit-amplitude on-bin tone reads 0.5 and the bins sum to the frame's
/// mean square (rectangular window).
pub fn power_spectrum(signal: &AudioSignal, fft_size: usize, window: Window) -> Result<Spectrum> {
    if !signal.is_mono() {
        return Err(ModemError::IncompatibleSignals("power_spectrum expects a mono signal".into()));
    }
    SpectrumAnalyzer::new(fft_size, window, signal.sample_rate_hz())?.frame_spectrum(signal.samples())
}

/// Mean of per-frame power spectra over every complete frame of a mono signal.
pub fn averaged_power_spectrum(
    signal: &AudioSignal,
    fft_size: usize,
    window: Window,
) -> Result<Spectrum> {
    if !signal.is_mono() {
        return Err(ModemError::IncompatibleSignals(
            "averaged_power_spectrum expects a mono signal".into(),
        ));
    }
    SpectrumAnalyzer::new(fft_size, window, signal.sample_rate_hz())?.averaged_spectrum(signal.samples())
}

/// Mean in-band bin power, with guard intervals around excluded frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPower {
    pub mean_power: f64,
    pub bin_count: usize,
}

impl BandPower {
    /// True when no bin survived the band limits and exclusions.
    pub fn is_empty_band(&self) -> bool {
        self.bin_count == 0
    }
}

pub fn band_power(
    spectrum: &Spectrum,
    f_lo_hz: f64,
    f_hi_hz: f64,
    excluded_freqs_hz: &[f64],
    exclusion_halfwidth_hz: f64,
) -> Result<BandPower> {
    let nyquist = f64::from(spectrum.source_sample_rate_hz) / 2.0;
    if !(f_lo_hz < f_hi_hz) || f_hi_hz > nyquist {
        return Err(ModemError::config(format!(
            "band [{f_lo_hz}, {f_hi_hz}] Hz must satisfy lo < hi <= {nyquist}"
        )));
    }
    let (sum, count) = spectrum
        .bin_freq_hz
        .iter()
        .zip(&spectrum.bin_power)
        .filter(|(&f, _)| f >= f_lo_hz && f <= f_hi_hz)
        .filter(|(&f, _)| {
            excluded_freqs_hz
                .iter()
                .all(|&c| f < c - exclusion_halfwidth_hz || f > c + exclusion_halfwidth_hz)
        })
        .fold((0.0, 0usize), |(s, n), (_, &p)| (s + p, n + 1));
    Ok(BandPower {
        mean_power: if count == 0 { 0.0 } else { sum / count as f64 },
        bin_count: count,
    })
}
