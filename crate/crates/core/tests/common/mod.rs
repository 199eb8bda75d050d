#![allow(dead_code)]

use std::f64::consts::PI;

/// Direct O(N²) one-sided power spectrum, same scaling as the library:
/// |X|²/N², doubled away from DC and Nyquist.
pub fn dft_power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|i| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * ((i * k) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let p = (re * re + im * im) / (n * n) as f64;
            if i == 0 || i == n / 2 { p } else { 2.0 * p }
        })
        .collect()
}

/// In-phase and quadrature correlation of `x[start..end]` against a unit
/// carrier referenced to sample 0; returns the phase of the segment. The
/// window should span whole carrier cycles.
pub fn segment_phase(x: &[f64], start: usize, end: usize, freq_hz: f64, sample_rate_hz: f64) -> f64 {
    let (mut i, mut q) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate().take(end).skip(start) {
        let ang = 2.0 * PI * freq_hz * k as f64 / sample_rate_hz;
        i += v * ang.cos();
        q -= v * ang.sin();
    }
    q.atan2(i)
}

/// Wraps an angle difference into (-π, π].
pub fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI { r - 2.0 * PI } else { r }
}
