//! Command-line front end. `run` is the whole program minus process exit,
//! so tests can drive it with in-memory output buffers.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bits::BitStream;
use crate::channel::{ChannelSpec, NoiseKind, NoiseSpec};
use crate::error::ModemError;
use crate::eval::{run_trial, sweep, Modem, Scheme, SweepAxis, SweepSpec, SyncMode};
use crate::fsk::{fsk_demodulate, FrameEvent};
use crate::psk::{bpsk_demodulate_coherent, dpsk_demodulate, DemodTrace};
use crate::signal::{averaged_power_spectrum, Window};
use crate::wav::{read_wav, write_wav};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Default search window for header sync: half a second at the file's rate.
const DEFAULT_SYNC_SEARCH_SECS: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "acoustic-modem", version, about = "Near-ultrasonic acoustic modem (FSK, BPSK, DPSK)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Fsk,
    Bpsk,
    Dpsk,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Fsk => Scheme::Fsk,
            SchemeArg::Bpsk => Scheme::Bpsk,
            SchemeArg::Dpsk => Scheme::Dpsk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum NoiseArg {
    White,
    LowpassMusic,
    LowpassVoice,
    BroadbandJangle,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::White => NoiseKind::White,
            NoiseArg::LowpassMusic => NoiseKind::LowpassMusic,
            NoiseArg::LowpassVoice => NoiseKind::LowpassVoice,
            NoiseArg::BroadbandJangle => NoiseKind::BroadbandJangle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SyncArg {
    /// Known start offset (`--offset`, or the simulated delay).
    #[value(alias = "loopback")]
    Offset,
    /// Locate the prepended sync header.
    Header,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    Snr,
    Bitrate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    Rect,
    Hann,
}

/// Overrides for the modem defaults.
#[derive(Debug, Clone, Default, Args)]
struct ModemArgs {
    #[arg(long)]
    bit_rate: Option<f64>,
    #[arg(long)]
    sample_rate: Option<u32>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// PSK carrier frequency.
    #[arg(long)]
    carrier_hz: Option<f64>,
    /// PSK amplitude ramp around phase reversals, as a fraction of a bit.
    #[arg(long)]
    ramp_fraction: Option<f64>,
    /// Disable the DPSK receive band-pass filter.
    #[arg(long)]
    no_receive_filter: bool,
    /// FSK analysis frame length.
    #[arg(long)]
    fft_size: Option<usize>,
    /// FSK carrier-to-noise-floor activation ratio.
    #[arg(long)]
    detection_ratio: Option<f64>,
}

impl ModemArgs {
    fn build(&self, scheme: Scheme) -> Result<Modem, ModemError> {
        let mut modem = Modem::default_for(scheme);
        match &mut modem {
            Modem::Fsk(c) => {
                if self.carrier_hz.is_some() || self.ramp_fraction.is_some() || self.no_receive_filter {
                    return Err(ModemError::config("--carrier-hz/--ramp-fraction/--no-receive-filter apply to PSK only"));
                }
                if let Some(v) = self.bit_rate {
                    c.bit_rate_bps = v;
                }
                if let Some(v) = self.sample_rate {
                    c.sample_rate_hz = v;
                }
                if let Some(v) = self.amplitude {
                    c.amplitude = v;
                }
                if let Some(v) = self.fft_size {
                    c.fft_size = v;
                }
                if let Some(v) = self.detection_ratio {
                    c.detection_ratio = v;
                }
            }
            Modem::Bpsk(c) | Modem::Dpsk(c) => {
                if self.fft_size.is_some() || self.detection_ratio.is_some() {
                    return Err(ModemError::config("--fft-size/--detection-ratio apply to FSK only"));
                }
                if let Some(v) = self.bit_rate {
                    c.bit_rate_bps = v;
                }
                if let Some(v) = self.sample_rate {
                    c.sample_rate_hz = v;
                }
                if let Some(v) = self.amplitude {
                    c.amplitude = v;
                }
                if let Some(v) = self.carrier_hz {
                    c.carrier_hz = v;
                }
                if let Some(v) = self.ramp_fraction {
                    c.ramp_fraction = v;
                }
                c.receive_filter = !self.no_receive_filter;
            }
        }
        modem.validate()?;
        Ok(modem)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Modulate a payload (0x-prefixed hex, MSB first, or a 0/1 string) into a WAV file.
    Encode {
        scheme: SchemeArg,
        payload: String,
        out: PathBuf,
        /// Prepend the sync header (PSK only).
        #[arg(long)]
        header: bool,
        #[command(flatten)]
        modem: ModemArgs,
    },
    /// Demodulate a WAV file and print the recovered bits.
    Decode {
        scheme: SchemeArg,
        input: PathBuf,
        #[arg(long, value_enum, default_value = "offset")]
        sync: SyncArg,
        /// Start offset in samples for `--sync offset`.
        #[arg(long, default_value_t = 0)]
        offset: usize,
        /// Header search window in samples (default: half a second).
        #[arg(long)]
        max_delay: Option<usize>,
        /// Print per-bit (PSK) or per-frame (FSK) detail as CSV.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        modem: ModemArgs,
    },
    /// Run one simulated transmission and print its report as CSV.
    Simulate {
        scheme: SchemeArg,
        #[arg(long, default_value_t = 800)]
        bits: usize,
        /// Carrier-bin SNR; omit for a noiseless channel.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, value_enum, default_value = "white")]
        noise_kind: NoiseArg,
        #[arg(long, default_value_t = 0)]
        delay: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "offset")]
        sync: SyncArg,
        #[command(flatten)]
        modem: ModemArgs,
    },
    /// Sweep SNR or bit rate and write mean/std BTSR per point as CSV.
    Sweep {
        scheme: SchemeArg,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        /// Payload bits per trial (default 800 PSK, 32 FSK).
        #[arg(long)]
        bits: Option<usize>,
        /// Base SNR for bit-rate sweeps; omit for a noiseless channel.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, value_enum, default_value = "white")]
        noise_kind: NoiseArg,
        #[arg(long, default_value_t = 0)]
        delay: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        modem: ModemArgs,
    },
    /// Print the frame-averaged power spectrum of a WAV file as CSV.
    Spectrum {
        input: PathBuf,
        #[arg(long, default_value_t = 4096)]
        fft_size: usize,
        #[arg(long, value_enum, default_value = "hann")]
        window: WindowArg,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ModemError> for Failure {
    fn from(e: ModemError) -> Self {
        let code = match e {
            ModemError::SyncNotFound { .. } | ModemError::NoClock | ModemError::InsufficientData { .. } => EXIT_RUNTIME,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message.replace('\n', " "));
            f.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Encode { scheme, payload, out: path, header, modem } => {
            let scheme = Scheme::from(scheme);
            let modem = modem.build(scheme)?;
            let bits = BitStream::parse_payload(&payload)?;
            if header && scheme == Scheme::Fsk {
                return Err(usage("--header applies to PSK schemes only"));
            }
            let sync = if header { SyncMode::Header { max_delay_samples: 0 } } else { SyncMode::Loopback };
            let signal = modem.modulate(&bits, sync)?;
            write_wav(&signal, &path)?;
            writeln!(
                out,
                "bits={} samples={} channels={} sample_rate_hz={} duration_s={:.6}",
                bits.len(),
                signal.len(),
                signal.channel_count(),
                signal.sample_rate_hz(),
                signal.duration_secs()
            )?;
        }
        Command::Decode { scheme, input, sync, offset, max_delay, trace, modem } => {
            let scheme = Scheme::from(scheme);
            let modem = modem.build(scheme)?;
            let (signal, spec) = read_wav(&input)?;
            if spec.sample_rate_hz != modem.sample_rate_hz() {
                return Err(usage(format!(
                    "sample rate mismatch: file is {} Hz, modem expects {} Hz (use --sample-rate)",
                    spec.sample_rate_hz,
                    modem.sample_rate_hz()
                )));
            }
            decode(&modem, &signal, sync, offset, max_delay, trace, out)?;
        }
        Command::Simulate { scheme, bits, snr_db, noise_kind, delay, seed, sync, modem } => {
            let modem = modem.build(scheme.into())?;
            let noise = snr_db.map(|snr| NoiseSpec {
                kind: noise_kind.into(),
                snr_db_at_carrier: snr,
                carrier_hz: modem.reference_carrier_hz(),
            });
            let channel = ChannelSpec { delay_samples: delay, gain: 1.0, noise: noise.clone(), seed };
            let sync = match sync {
                SyncArg::Offset => SyncMode::Loopback,
                SyncArg::Header => SyncMode::Header { max_delay_samples: delay + modem.samples_per_bit() },
            };
            let report = run_trial(&modem, bits, &channel, sync)?;
            writeln!(out, "scheme,n_bits,snr_db,noise_kind,btsr,ber_estimate,erasures,seed")?;
            writeln!(
                out,
                "{},{},{},{},{:.6},{},{},{}",
                report.scheme,
                bits,
                noise.as_ref().map_or("inf".to_string(), |n| format!("{:.6}", n.snr_db_at_carrier)),
                noise.as_ref().map_or("none".to_string(), |n| n.kind.to_string()),
                report.btsr,
                report.ber_estimate.map_or("nan".to_string(), |b| format!("{b:.6}")),
                report.erasure_count,
                report.trial_seed
            )?;
        }
        Command::Sweep { scheme, axis, values, trials, out: path, bits, snr_db, noise_kind, delay, seed, modem } => {
            let scheme = Scheme::from(scheme);
            // bit-rate points are validated one by one inside the sweep
            let mut base = modem;
            if matches!(axis, AxisArg::Bitrate) {
                base.bit_rate = None;
            }
            let modem = base.build(scheme)?;
            let noise = match axis {
                AxisArg::Snr => Some(NoiseSpec {
                    kind: noise_kind.into(),
                    snr_db_at_carrier: 0.0,
                    carrier_hz: modem.reference_carrier_hz(),
                }),
                AxisArg::Bitrate => snr_db.map(|snr| NoiseSpec {
                    kind: noise_kind.into(),
                    snr_db_at_carrier: snr,
                    carrier_hz: modem.reference_carrier_hz(),
                }),
            };
            let payload_bits = bits.unwrap_or(if scheme == Scheme::Fsk { 32 } else { 800 });
            let spec = SweepSpec {
                axis: match axis {
                    AxisArg::Snr => SweepAxis::SnrDb,
                    AxisArg::Bitrate => SweepAxis::BitRate,
                },
                values,
                trials,
                payload_bits,
                sync: SyncMode::Loopback,
                reuse_seed: false,
            };
            let channel = ChannelSpec { delay_samples: delay, gain: 1.0, noise, seed };
            let result = sweep(&modem, &spec, &channel)?;
            let csv = result.to_csv();
            std::fs::write(&path, &csv)?;
            write!(out, "{csv}")?;
        }
        Command::Spectrum { input, fft_size, window } => {
            let (signal, _) = read_wav(&input)?;
            let mono = signal.mixdown();
            if mono.len() < fft_size {
                return Err(usage(format!("file has {} samples, fewer than fft size {fft_size}", mono.len())));
            }
            let window = match window {
                WindowArg::Rect => Window::Rectangular,
                WindowArg::Hann => Window::Hann,
            };
            let spectrum = averaged_power_spectrum(&mono, fft_size, window)?;
            writeln!(out, "freq_hz,power")?;
            for (f, p) in spectrum.bin_freq_hz.iter().zip(&spectrum.bin_power) {
                writeln!(out, "{f:.3},{p:.9e}")?;
            }
        }
    }
    Ok(())
}

fn decode(
    modem: &Modem,
    signal: &crate::signal::AudioSignal,
    sync: SyncArg,
    offset: usize,
    max_delay: Option<usize>,
    trace: bool,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    match modem {
        Modem::Fsk(cfg) => {
            if sync == SyncArg::Header {
                return Err(usage("FSK is self-clocking; --sync header is not supported"));
            }
            let d = fsk_demodulate(signal, cfg)?;
            writeln!(out, "{}", d.bits)?;
            if trace {
                writeln!(out, "frame,clock,data,noise_floor,event")?;
                for f in &d.frames {
                    let state = |s: Option<bool>| s.map_or("-".to_string(), |b| u8::from(b).to_string());
                    let event = match f.event {
                        FrameEvent::Idle => "idle".to_string(),
                        FrameEvent::Bit(b) => format!("bit{}", u8::from(b)),
                        FrameEvent::Erasure => "erasure".to_string(),
                    };
                    writeln!(
                        out,
                        "{},{},{},{:.6e},{}",
                        f.frame_index,
                        state(f.clock.clock_state()),
                        state(f.data.data_bit()),
                        f.data.noise_floor_power,
                        event
                    )?;
                }
            }
        }
        Modem::Bpsk(cfg) | Modem::Dpsk(cfg) => {
            let (start, skip) = match sync {
                SyncArg::Offset => (offset, 0),
                SyncArg::Header => {
                    let window = max_delay
                        .unwrap_or((DEFAULT_SYNC_SEARCH_SECS * f64::from(cfg.sample_rate_hz)) as usize);
                    (modem.header_offset(signal, window)?, crate::psk::DEFAULT_HEADER.len())
                }
            };
            let t: DemodTrace = if modem.scheme() == Scheme::Bpsk {
                bpsk_demodulate_coherent(signal, cfg, start)?
            } else {
                dpsk_demodulate(signal, cfg, start)?
            }
            .skip(skip);
            writeln!(out, "{}", t.decisions)?;
            if trace {
                writeln!(out, "bit,correlation,phase_rad,decision,erasure")?;
                for i in 0..t.len() {
                    writeln!(
                        out,
                        "{},{:.6},{:.6},{},{}",
                        i,
                        t.per_bit_correlation[i],
                        t.per_bit_phase_estimate[i],
                        u8::from(t.decisions.as_slice()[i]),
                        u8::from(t.erasures[i])
                    )?;
                }
            }
        }
    }
    Ok(())
}
