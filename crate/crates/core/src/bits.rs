//! Bit sequences and their bipolar (±1) form.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{ModemError, Result};

/// An ordered sequence of logical bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitStream(Vec<bool>);

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Self {
        BitStream(bits)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        BitStream((0..len).map(|_| rng.gen::<bool>()).collect())
    }

    /// Parses `0x`-prefixed hex (most significant bit first) or a raw
    /// string of `0`/`1` characters.
    pub fn parse_payload(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ModemError::InvalidPayload("empty payload".into()));
        }
        if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            if hex.is_empty() {
                return Err(ModemError::InvalidPayload("empty hex payload".into()));
            }
            let mut bits = Vec::with_capacity(hex.len() * 4);
            for c in hex.chars() {
                let nibble = c
                    .to_digit(16)
                    .ok_or_else(|| ModemError::InvalidPayload(format!("bad hex digit {c:?}")))?;
                bits.extend((0..4).rev().map(|i| (nibble >> i) & 1 == 1));
            }
            return Ok(BitStream(bits));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ModemError::InvalidPayload(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitStream)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn complement(&self) -> Self {
        BitStream(self.0.iter().map(|b| !b).collect())
    }

    pub fn concat(&self, other: &BitStream) -> Self {
        let mut bits = self.0.clone();
        bits.extend_from_slice(&other.0);
        BitStream(bits)
    }

    pub fn bipolar(&self) -> BipolarStream {
        BipolarStream::from(self)
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for BitStream {
    fn from(bits: Vec<bool>) -> Self {
        BitStream(bits)
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitStream(iter.into_iter().collect())
    }
}

impl FromStr for BitStream {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self> {
        BitStream::parse_payload(s)
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Antipodal form of a bit stream: logical one is +1, logical zero is -1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipolarStream(Vec<i8>);

impl BipolarStream {
    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn to_bits(&self) -> BitStream {
        self.0.iter().map(|&v| v > 0).collect()
    }
}

impl From<&BitStream> for BipolarStream {
    fn from(bits: &BitStream) -> Self {
        BipolarStream(bits.iter().map(|b| if b { 1 } else { -1 }).collect())
    }
}
