//! Near-ultrasonic acoustic data transmission: FSK with a separate clock
//! channel, coherent BPSK and differential PSK, plus a simulated channel and
//! an evaluation harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod channel;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fsk;
pub mod psk;
pub mod seed;
pub mod signal;
pub mod wav;

pub use bits::{BipolarStream, BitStream};
pub use error::{ModemError, Result};
pub use signal::AudioSignal;
