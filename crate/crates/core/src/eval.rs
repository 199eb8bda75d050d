//! Bit transmission success rate and the seeded Monte-Carlo harness used for
//! SNR and bit-rate sweeps.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::BitStream;
use crate::channel::{apply_channel, ChannelSpec, NoiseKind, NoiseSpec};
use crate::error::{ModemError, Result};
use crate::fsk::{fsk_demodulate, fsk_modulate, FskConfig};
use crate::psk::{
    bpsk_demodulate_coherent, bpsk_modulate, dpsk_demodulate, dpsk_modulate, estimate_delay_with_template,
    PskConfig, DEFAULT_HEADER,
};
use crate::seed::derive_seed;
use crate::signal::AudioSignal;

/// Seed stream used for payload generation, kept apart from channel noise.
const PAYLOAD_STREAM: u64 = 0x0050_4159_4C4F_4144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fsk,
    Bpsk,
    Dpsk,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fsk => "fsk",
            Scheme::Bpsk => "bpsk",
            Scheme::Dpsk => "dpsk",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fsk" => Ok(Scheme::Fsk),
            "bpsk" => Ok(Scheme::Bpsk),
            "dpsk" => Ok(Scheme::Dpsk),
            other => Err(ModemError::config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// How the receiver finds the start of the transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// The simulated propagation delay is handed to the receiver.
    Loopback,
    /// A known header is prepended and located by cross-correlation within
    /// the first `max_delay_samples` samples.
    Header { max_delay_samples: usize },
}

/// A modulation scheme together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Modem {
    Fsk(FskConfig),
    Bpsk(PskConfig),
    Dpsk(PskConfig),
}

impl Modem {
    pub fn default_for(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Fsk => Modem::Fsk(FskConfig::default()),
            Scheme::Bpsk => Modem::Bpsk(PskConfig::default()),
            Scheme::Dpsk => Modem::Dpsk(PskConfig::default()),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Modem::Fsk(_) => Scheme::Fsk,
            Modem::Bpsk(_) => Scheme::Bpsk,
            Modem::Dpsk(_) => Scheme::Dpsk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modem::Fsk(c) => c.validate(),
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.validate(),
        }
    }

    pub fn bit_rate_bps(&self) -> f64 {
        match self {
            Modem::Fsk(c) => c.bit_rate_bps,
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.bit_rate_bps,
        }
    }

    pub fn with_bit_rate(&self, bit_rate_bps: f64) -> Self {
        let mut m = self.clone();
        match &mut m {
            Modem::Fsk(c) => c.bit_rate_bps = bit_rate_bps,
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.bit_rate_bps = bit_rate_bps,
        }
        m
    }

    pub fn sample_rate_hz(&self) -> u32 {
        match self {
            Modem::Fsk(c) => c.sample_rate_hz,
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.sample_rate_hz,
        }
    }

    pub fn samples_per_bit(&self) -> usize {
        match self {
            Modem::Fsk(c) => c.samples_per_bit(),
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.samples_per_bit(),
        }
    }

    /// Frequency at which channel SNR is referenced: the PSK carrier, or the
    /// FSK data carrier for a zero bit.
    pub fn reference_carrier_hz(&self) -> f64 {
        match self {
            Modem::Fsk(c) => c.data_freq0_hz,
            Modem::Bpsk(c) | Modem::Dpsk(c) => c.carrier_hz,
        }
    }

    /// Modulates `payload`, prefixed by the sync header in header mode.
    pub fn modulate(&self, payload: &BitStream, sync: SyncMode) -> Result<AudioSignal> {
        let bits = match (self, sync) {
            (Modem::Fsk(_), _) | (_, SyncMode::Loopback) => payload.clone(),
            (_, SyncMode::Header { .. }) => header().concat(payload),
        };
        match self {
            Modem::Fsk(c) => fsk_modulate(&bits, c),
            Modem::Bpsk(c) => bpsk_modulate(&bits, c),
            Modem::Dpsk(c) => dpsk_modulate(&bits, c),
        }
    }

    /// Recovers at most `max_bits` payload bits. `known_delay` is used in
    /// loopback mode only; FSK is self-clocking and ignores both.
    pub fn demodulate(
        &self,
        received: &AudioSignal,
        sync: SyncMode,
        known_delay: usize,
        max_bits: Option<usize>,
    ) -> Result<Demodulated> {
        let mut out = match self {
            Modem::Fsk(c) => {
                let d = fsk_demodulate(received, c)?;
                Demodulated { bits: d.bits, erasures: d.erased_bits }
            }
            Modem::Bpsk(c) | Modem::Dpsk(c) => {
                let (offset, skip) = match sync {
                    SyncMode::Loopback => (known_delay, 0),
                    SyncMode::Header { max_delay_samples } => {
                        (self.header_offset(received, max_delay_samples)?, DEFAULT_HEADER.len())
                    }
                };
                let trace = if self.scheme() == Scheme::Bpsk {
                    bpsk_demodulate_coherent(received, c, offset)?
                } else {
                    dpsk_demodulate(received, c, offset)?
                }
                .skip(skip);
                Demodulated { erasures: trace.erasure_count(), bits: trace.decisions }
            }
        };
        if let Some(n) = max_bits {
            if out.bits.len() > n {
                out.bits = out.bits.as_slice()[..n].to_vec().into();
            }
        }
        Ok(out)
    }

    /// Start of a header-prefixed PSK transmission, searched over the first
    /// `max_delay` samples.
    pub fn header_offset(&self, received: &AudioSignal, max_delay: usize) -> Result<usize> {
        let (template, config) = match self {
            Modem::Dpsk(c) => (dpsk_modulate(&header(), c)?, c),
            Modem::Bpsk(c) => (bpsk_modulate(&header(), c)?, c),
            Modem::Fsk(_) => return Err(ModemError::config("FSK has no sync header")),
        };
        if received.sample_rate_hz() != config.sample_rate_hz {
            return Err(ModemError::IncompatibleSignals("sample rate differs from modem".into()));
        }
        let samples = crate::psk::mono_samples(received);
        let max_delay = max_delay.min(samples.len().saturating_sub(template.len()));
        estimate_delay_with_template(&samples, template.samples(), max_delay, config.samples_per_bit())
    }
}

pub fn header() -> BitStream {
    BitStream::new(DEFAULT_HEADER.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub bits: BitStream,
    pub erasures: usize,
}

/// Fraction of sent bits reproduced at the same position. Missing bits count
/// as errors; surplus received bits are ignored.
pub fn compute_btsr(sent: &BitStream, received: &BitStream) -> f64 {
    if sent.is_empty() {
        return 0.0;
    }
    let correct = sent.iter().zip(received.iter()).filter(|(a, b)| a == b).count();
    correct as f64 / sent.len() as f64
}

/// `1 / (BTSR · n)`: the error-free run length under differential error
/// propagation is geometric, so its reciprocal estimates the bit error rate.
/// Undefined when nothing was received correctly.
pub fn ber_estimate(btsr: f64, n_bits: usize) -> Option<f64> {
    (btsr > 0.0 && n_bits > 0).then(|| 1.0 / (btsr * n_bits as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionReport {
    pub scheme: Scheme,
    pub sent_bits: BitStream,
    pub received_bits: BitStream,
    pub btsr: f64,
    pub ber_estimate: Option<f64>,
    pub erasure_count: usize,
    pub trial_seed: u64,
    pub clipped_samples: usize,
    /// Demodulator failure, if any; `received_bits` is empty in that case.
    pub failure: Option<String>,
}

/// One seeded transmission: random payload, modulate, channel, demodulate.
pub fn run_trial(modem: &Modem, payload_bits: usize, channel: &ChannelSpec, sync: SyncMode) -> Result<TransmissionReport> {
    modem.validate()?;
    if payload_bits == 0 {
        return Err(ModemError::InvalidPayload("payload must contain at least one bit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(channel.seed, &[PAYLOAD_STREAM]));
    let sent = BitStream::random(&mut rng, payload_bits);

    let mut tx = modem.modulate(&sent, sync)?;
    if matches!(sync, SyncMode::Header { .. }) && modem.scheme() != Scheme::Fsk {
        // the receiver keeps listening a little past the end
        tx = crate::signal::mix_padded(
            &tx,
            &AudioSignal::silence(tx.len() + modem.samples_per_bit(), tx.channel_count(), tx.sample_rate_hz())?,
        )?;
    }
    let rx = apply_channel(&tx, channel)?;

    let (received_bits, erasure_count, failure) =
        match modem.demodulate(&rx.signal, sync, channel.delay_samples, Some(payload_bits)) {
            Ok(d) => (d.bits, d.erasures, None),
            Err(e) => (BitStream::default(), 0, Some(e.to_string())),
        };
    let btsr = compute_btsr(&sent, &received_bits);
    Ok(TransmissionReport {
        scheme: modem.scheme(),
        ber_estimate: ber_estimate(btsr, payload_bits),
        sent_bits: sent,
        received_bits,
        btsr,
        erasure_count,
        trial_seed: channel.seed,
        clipped_samples: rx.clipped_samples,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    BitRate,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::BitRate => "bit_rate_bps",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" | "snr_db" => Ok(SweepAxis::SnrDb),
            "bitrate" | "bit_rate" | "bit_rate_bps" => Ok(SweepAxis::BitRate),
            other => Err(ModemError::config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub payload_bits: usize,
    pub sync: SyncMode,
    /// Use one seed for every trial at a point (std collapses to 0).
    pub reuse_seed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub mean_btsr: Vec<f64>,
    pub std_btsr: Vec<f64>,
    /// False where the axis value produced an invalid configuration.
    pub valid: Vec<bool>,
    pub trials_per_point: usize,
}

impl SweepResult {
    /// `axis,value,mean_btsr,std_btsr,trials`, six decimals, `invalid` in
    /// place of statistics for rejected points.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,value,mean_btsr,std_btsr,trials\n");
        for i in 0..self.axis_values.len() {
            let _ = write!(out, "{},{:.6},", self.axis_name, self.axis_values[i]);
            if self.valid[i] {
                let _ = write!(out, "{:.6},{:.6}", self.mean_btsr[i], self.std_btsr[i]);
            } else {
                out.push_str("invalid,invalid");
            }
            let _ = writeln!(out, ",{}", self.trials_per_point);
        }
        out
    }
}

pub fn trial_seed(base: u64, axis_index: usize, trial_index: usize, reuse_seed: bool) -> u64 {
    if reuse_seed {
        derive_seed(base, &[axis_index as u64])
    } else {
        derive_seed(base, &[axis_index as u64, trial_index as u64])
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `spec.trials` seeded trials per axis value. Trials run in parallel;
/// results do not depend on scheduling.
pub fn sweep(modem: &Modem, spec: &SweepSpec, base_channel: &ChannelSpec) -> Result<SweepResult> {
    if spec.values.is_empty() {
        return Err(ModemError::config("sweep needs at least one axis value"));
    }
    if spec.trials < 2 {
        return Err(ModemError::config("sweep needs at least two trials per point"));
    }
    if spec.payload_bits == 0 {
        return Err(ModemError::config("sweep payload must be at least one bit"));
    }

    let points: Vec<Option<(Modem, ChannelSpec)>> = spec
        .values
        .iter()
        .map(|&v| {
            let mut channel = base_channel.clone();
            let modem = match spec.axis {
                SweepAxis::BitRate => modem.with_bit_rate(v),
                SweepAxis::SnrDb => {
                    if !v.is_finite() {
                        return None;
                    }
                    let noise = channel.noise.get_or_insert_with(|| NoiseSpec {
                        kind: NoiseKind::White,
                        snr_db_at_carrier: v,
                        carrier_hz: modem.reference_carrier_hz(),
                    });
                    noise.snr_db_at_carrier = v;
                    modem.clone()
                }
            };
            modem.validate().ok().map(|_| (modem, channel))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some())
        .flat_map(|(i, _)| (0..spec.trials).map(move |t| (i, t)))
        .collect();
    let outcomes: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let (modem, channel) = points[i].as_ref().expect("job for valid point");
            let channel = ChannelSpec { seed: trial_seed(base_channel.seed, i, t, spec.reuse_seed), ..channel.clone() };
            run_trial(modem, spec.payload_bits, &channel, spec.sync).map(|r| r.btsr)
        })
        .collect();

    let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
    for (&(i, _), outcome) in jobs.iter().zip(outcomes) {
        per_point[i].push(outcome?);
    }

    let mut result = SweepResult {
        axis_name: spec.axis.name().to_string(),
        axis_values: spec.values.clone(),
        mean_btsr: Vec::with_capacity(points.len()),
        std_btsr: Vec::with_capacity(points.len()),
        valid: points.iter().map(Option::is_some).collect(),
        trials_per_point: spec.trials,
    };
    for btsrs in &per_point {
        let (m, s) = if btsrs.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(btsrs) };
        result.mean_btsr.push(m);
        result.std_btsr.push(s);
    }
    Ok(result)
}
