//! 16-bit PCM WAV reading and writing.
//!
//! Samples are scaled symmetrically by 32767 so that ±1.0 map to ±32767.
//! Output carries only the `fmt ` and `data` chunks, so identical signals
//! always produce identical files.

use std::fs;
use std::path::Path;

use crate::error::{ModemError, Result};
use crate::signal::AudioSignal;

const FULL_SCALE: f64 = 32767.0;
const PCM_FORMAT_TAG: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub sample_rate_hz: u32,
    pub channel_count: u16,
    pub bits_per_sample: u16,
}

/// Serialises a signal; returns the bytes and the number of clipped samples.
pub fn encode_wav(signal: &AudioSignal) -> (Vec<u8>, usize) {
    let channels = signal.channel_count() as u16;
    let frames = signal.len();
    let data_len = frames * channels as usize * 2;
    let block_align = channels * 2;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate_hz() * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut clipped = 0;
    for k in 0..frames {
        for ch in signal.channels() {
            let x = ch[k];
            if x.abs() > 1.0 {
                clipped += 1;
            }
            let v = (x * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    (out, clipped)
}

/// Writes a signal as 16-bit PCM; returns how many samples were clipped.
/// Concurrent writes to the same path are not coordinated.
pub fn write_wav(signal: &AudioSignal, path: impl AsRef<Path>) -> Result<usize> {
    let (bytes, clipped) = encode_wav(signal);
    fs::write(path, bytes)?;
    Ok(clipped)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<(AudioSignal, WavSpec)> {
    decode_wav(&fs::read(path)?)
}

fn corrupt(msg: impl Into<String>) -> ModemError {
    ModemError::CorruptFile(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<(AudioSignal, WavSpec)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("missing RIFF/WAVE header"));
    }
    let mut spec: Option<WavSpec> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).ok_or_else(|| corrupt("chunk size overflow"))?;
        if end > bytes.len() {
            return Err(corrupt(format!(
                "chunk {:?} truncated: declares {size} bytes, {} present",
                String::from_utf8_lossy(id),
                bytes.len() - body
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk shorter than 16 bytes"));
                }
                let tag = u16_at(bytes, body);
                if tag != PCM_FORMAT_TAG {
                    return Err(ModemError::UnsupportedFormat(format!("format tag {tag:#06x} is not integer PCM")));
                }
                let channel_count = u16_at(bytes, body + 2);
                let sample_rate_hz = u32_at(bytes, body + 4);
                let bits_per_sample = u16_at(bytes, body + 14);
                if bits_per_sample != 16 {
                    return Err(ModemError::UnsupportedFormat(format!("{bits_per_sample}-bit samples")));
                }
                if !(1..=2).contains(&channel_count) {
                    return Err(ModemError::UnsupportedFormat(format!("{channel_count} channels")));
                }
                if sample_rate_hz == 0 {
                    return Err(corrupt("sample rate is zero"));
                }
                spec = Some(WavSpec { sample_rate_hz, channel_count, bits_per_sample });
            }
            b"data" => {
                let spec = spec.ok_or_else(|| corrupt("data chunk before fmt chunk"))?;
                if size == 0 {
                    return Err(corrupt("empty data chunk"));
                }
                let block = usize::from(spec.channel_count) * 2;
                if !size.is_multiple_of(block) {
                    return Err(corrupt("data chunk is not a whole number of frames"));
                }
                let frames = size / block;
                let nch = usize::from(spec.channel_count);
                let mut channels = vec![Vec::with_capacity(frames); nch];
                for (i, pair) in bytes[body..end].chunks_exact(2).enumerate() {
                    let v = i16::from_le_bytes([pair[0], pair[1]]);
                    channels[i % nch].push(f64::from(v) / FULL_SCALE);
                }
                return Ok((AudioSignal::from_channels(channels, spec.sample_rate_hz)?, spec));
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(corrupt("no data chunk"))
}
