//! Dual-stream frequency-shift keying.
//!
//! The DATA stream rides on the left channel (one carrier per bit value) and
//! a CLOCK stream on the right channel alternates between its two carriers
//! once per bit period. The receiver takes non-overlapping FFT frames,
//! compares each carrier against the mean in-band power of the remaining
//! bins, and samples the data carrier whenever the clock carrier changes.

use crate::bits::BitStream;
use crate::error::{ModemError, Result};
use crate::signal::{band_power, validate_frequency, AudioSignal, Spectrum, SpectrumAnalyzer, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct FskConfig {
    pub data_freq0_hz: f64,
    pub data_freq1_hz: f64,
    pub clock_freq0_hz: f64,
    pub clock_freq1_hz: f64,
    pub bit_rate_bps: f64,
    pub sample_rate_hz: u32,
    pub fft_size: usize,
    /// Carrier-to-noise-floor power ratio at which a carrier counts as active.
    pub detection_ratio: f64,
    pub amplitude: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
}

impl Default for FskConfig {
    fn default() -> Self {
        FskConfig {
            data_freq0_hz: 18_000.0,
            data_freq1_hz: 18_250.0,
            clock_freq0_hz: 18_500.0,
            clock_freq1_hz: 18_750.0,
            bit_rate_bps: 4.0,
            sample_rate_hz: 44_100,
            fft_size: 4096,
            detection_ratio: 10.0,
            amplitude: 0.8,
            band_lo_hz: 18_000.0,
            band_hi_hz: 19_500.0,
        }
    }
}

impl FskConfig {
    pub fn samples_per_bit(&self) -> usize {
        (f64::from(self.sample_rate_hz) / self.bit_rate_bps).round() as usize
    }

    pub fn carrier_hz(&self, carrier: Carrier) -> f64 {
        match carrier {
            Carrier::Data0 => self.data_freq0_hz,
            Carrier::Data1 => self.data_freq1_hz,
            Carrier::Clock0 => self.clock_freq0_hz,
            Carrier::Clock1 => self.clock_freq1_hz,
        }
    }

    pub fn carrier_freqs(&self) -> [f64; 4] {
        Carrier::ALL.map(|c| self.carrier_hz(c))
    }

    pub fn bin_width_hz(&self) -> f64 {
        f64::from(self.sample_rate_hz) / self.fft_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bit_rate_bps > 0.0) || !self.bit_rate_bps.is_finite() {
            return Err(ModemError::config(format!("bit rate must be positive, got {}", self.bit_rate_bps)));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(ModemError::config(format!("amplitude must be in (0, 1], got {}", self.amplitude)));
        }
        if !(self.detection_ratio > 0.0) {
            return Err(ModemError::config("detection ratio must be positive"));
        }
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(ModemError::config(format!("fft size must be a power of two, got {}", self.fft_size)));
        }
        if !(self.band_lo_hz < self.band_hi_hz) {
            return Err(ModemError::config("band_lo must be below band_hi"));
        }
        validate_frequency(self.band_hi_hz, self.sample_rate_hz)?;
        let freqs = self.carrier_freqs();
        for (i, &f) in freqs.iter().enumerate() {
            validate_frequency(f, self.sample_rate_hz)?;
            if f < self.band_lo_hz || f > self.band_hi_hz {
                return Err(ModemError::config(format!(
                    "carrier {f} Hz outside band [{}, {}] Hz",
                    self.band_lo_hz, self.band_hi_hz
                )));
            }
            if freqs[..i].contains(&f) {
                return Err(ModemError::config(format!("carrier {f} Hz used twice")));
            }
        }
        let spb = self.samples_per_bit();
        if spb < 2 * self.fft_size {
            return Err(ModemError::config(format!(
                "{spb} samples per bit is fewer than two FFT frames of {}",
                self.fft_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Carrier {
    Data0,
    Data1,
    Clock0,
    Clock1,
}

impl Carrier {
    pub const ALL: [Carrier; 4] = [Carrier::Data0, Carrier::Data1, Carrier::Clock0, Carrier::Clock1];

    fn index(self) -> usize {
        self as usize
    }
}

/// Per-frame carrier powers and the adaptive noise floor they were judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierDetection {
    pub frame_index: usize,
    pub noise_floor_power: f64,
    carrier_powers: [f64; 4],
    active: [bool; 4],
}

impl CarrierDetection {
    pub fn power(&self, carrier: Carrier) -> f64 {
        self.carrier_powers[carrier.index()]
    }

    pub fn is_active(&self, carrier: Carrier) -> bool {
        self.active[carrier.index()]
    }

    pub fn active_carriers(&self) -> Vec<Carrier> {
        Carrier::ALL.into_iter().filter(|&c| self.is_active(c)).collect()
    }

    /// The single active carrier out of a pair, if exactly one is active.
    fn exclusive(&self, zero: Carrier, one: Carrier) -> Option<bool> {
        match (self.is_active(zero), self.is_active(one)) {
            (true, false) => Some(false),
            (false, true) => Some(true),
            _ => None,
        }
    }

    pub fn data_bit(&self) -> Option<bool> {
        self.exclusive(Carrier::Data0, Carrier::Data1)
    }

    /// `Some(true)` for clock carrier 1, `Some(false)` for clock carrier 0.
    pub fn clock_state(&self) -> Option<bool> {
        self.exclusive(Carrier::Clock0, Carrier::Clock1)
    }
}

/// Judges the four carriers in an already computed spectrum.
pub fn detect_in_spectrum(spectrum: &Spectrum, config: &FskConfig, frame_index: usize) -> Result<CarrierDetection> {
    let carriers = config.carrier_freqs();
    let guard = 2.0 * spectrum.bin_width_hz();
    let floor = band_power(spectrum, config.band_lo_hz, config.band_hi_hz, &carriers, guard)?.mean_power;
    let last = spectrum.bin_power.len() - 1;
    let carrier_powers = carriers.map(|f| {
        let k = spectrum.nearest_bin(f);
        spectrum.bin_power[k.saturating_sub(1)..=(k + 1).min(last)]
            .iter()
            .fold(0.0_f64, |m, &p| m.max(p))
    });
    let active = carrier_powers.map(|p| {
        if floor > 0.0 {
            p >= config.detection_ratio * floor
        } else {
            p > 0.0
        }
    });
    Ok(CarrierDetection { frame_index, noise_floor_power: floor, carrier_powers, active })
}

/// Carrier detection on the first `fft_size` samples of a mono frame.
pub fn detect_carriers(frame: &AudioSignal, config: &FskConfig) -> Result<CarrierDetection> {
    config.validate()?;
    if !frame.is_mono() {
        return Err(ModemError::IncompatibleSignals("carrier detection expects a mono frame".into()));
    }
    let mut analyzer = SpectrumAnalyzer::new(config.fft_size, Window::Rectangular, frame.sample_rate_hz())?;
    let spectrum = analyzer.frame_spectrum(frame.samples())?;
    detect_in_spectrum(&spectrum, config, 0)
}

fn tone_segment(out: &mut Vec<f64>, freq_hz: f64, len: usize, amplitude: f64, sample_rate_hz: u32) {
    out.extend((0..len).map(|k| amplitude * crate::signal::carrier_phase(freq_hz, k, sample_rate_hz).cos()));
}

/// Stereo FSK waveform: DATA on the left channel, CLOCK on the right.
pub fn fsk_modulate(bits: &BitStream, config: &FskConfig) -> Result<AudioSignal> {
    config.validate()?;
    if bits.is_empty() {
        return Err(ModemError::InvalidPayload("cannot modulate an empty bit stream".into()));
    }
    let spb = config.samples_per_bit();
    let sr = config.sample_rate_hz;
    let mut left = Vec::with_capacity(spb * bits.len());
    let mut right = Vec::with_capacity(spb * bits.len());
    for (i, bit) in bits.iter().enumerate() {
        let data = if bit { config.data_freq1_hz } else { config.data_freq0_hz };
        let clock = if i % 2 == 0 { config.clock_freq1_hz } else { config.clock_freq0_hz };
        tone_segment(&mut left, data, spb, config.amplitude, sr);
        tone_segment(&mut right, clock, spb, config.amplitude, sr);
    }
    AudioSignal::stereo(left, right, sr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameEvent {
    /// Nothing to sample in this frame.
    Idle,
    /// A bit was sampled from this frame's data carriers.
    Bit(bool),
    /// A sample was due but zero or two data carriers were active.
    Erasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FskFrame {
    pub frame_index: usize,
    pub data: CarrierDetection,
    pub clock: CarrierDetection,
    pub event: FrameEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FskDemodulation {
    pub bits: BitStream,
    pub frames: Vec<FskFrame>,
    /// Clock periods that ended without a clean data reading.
    pub erased_bits: usize,
}

impl FskDemodulation {
    pub fn erasure_frames(&self) -> impl Iterator<Item = &FskFrame> {
        self.frames.iter().filter(|f| f.event == FrameEvent::Erasure)
    }
}

/// Recovers bits from a stereo capture (data left, clock right) or from a
/// mono mixdown where all four carriers share one channel.
///
/// A change in the active clock carrier opens a sampling slot. The slot is
/// filled by the first frame carrying that same clock state in which exactly
/// one data carrier is active; frames with zero or two active data carriers
/// are erasures and never produce a bit. A slot still open when the next
/// clock change arrives counts as an erased bit.
pub fn fsk_demodulate(signal: &AudioSignal, config: &FskConfig) -> Result<FskDemodulation> {
    config.validate()?;
    if signal.sample_rate_hz() != config.sample_rate_hz {
        return Err(ModemError::IncompatibleSignals(format!(
            "signal sampled at {} Hz, modem configured for {} Hz",
            signal.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    let n = config.fft_size;
    if signal.len() < n {
        return Err(ModemError::InsufficientData { needed: n, available: signal.len() });
    }
    let (data_ch, clock_ch) = match signal.channel_count() {
        1 => (signal.samples(), signal.samples()),
        _ => (signal.channel(0).unwrap_or_default(), signal.channel(1).unwrap_or_default()),
    };
    let stereo = signal.channel_count() == 2;

    let mut analyzer = SpectrumAnalyzer::new(n, Window::Rectangular, config.sample_rate_hz)?;
    let mut frames = Vec::with_capacity(signal.len() / n);
    let mut bits = BitStream::default();
    let mut erased_bits = 0;
    let mut last_clock: Option<bool> = None;
    let mut pending = false;

    for (j, (dframe, cframe)) in data_ch.chunks_exact(n).zip(clock_ch.chunks_exact(n)).enumerate() {
        let data = detect_in_spectrum(&analyzer.frame_spectrum(dframe)?, config, j)?;
        let clock = if stereo {
            detect_in_spectrum(&analyzer.frame_spectrum(cframe)?, config, j)?
        } else {
            data.clone()
        };

        let mut event = FrameEvent::Idle;
        if let Some(state) = clock.clock_state() {
            if last_clock != Some(state) {
                if pending {
                    erased_bits += 1;
                }
                pending = true;
                last_clock = Some(state);
            }
            if pending {
                match data.data_bit() {
                    Some(bit) => {
                        bits.push(bit);
                        pending = false;
                        event = FrameEvent::Bit(bit);
                    }
                    None => event = FrameEvent::Erasure,
                }
            }
        }
        frames.push(FskFrame { frame_index: j, data, clock, event });
    }
    if pending {
        erased_bits += 1;
    }
    if last_clock.is_none() {
        return Err(ModemError::NoClock);
    }
    Ok(FskDemodulation { bits, frames, erased_bits })
}
