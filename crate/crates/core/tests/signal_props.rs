mod common;

use proptest::prelude::*;

use acoustic_modem::channel::{apply_channel, measure_snr_at, synth_noise, ChannelSpec, NoiseKind, NoiseSpec};
use acoustic_modem::signal::{
    averaged_power_spectrum, band_power, generate_tone, mix, power_spectrum, AudioSignal, Window,
};
use acoustic_modem::wav::{decode_wav, encode_wav};

fn samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_rectangular(x in samples(256..257)) {
        let sig = AudioSignal::mono(x.clone(), 48_000).unwrap();
        let spec = power_spectrum(&sig, 256, Window::Rectangular).unwrap();
        let mean_square = x.iter().map(|v| v * v).sum::<f64>() / 256.0;
        prop_assert!((spec.total_power() - mean_square).abs() <= 1e-9 * mean_square.max(1e-12));
    }

    #[test]
    fn spectrum_shape_invariants(x in samples(512..513), hann in any::<bool>()) {
        let window = if hann { Window::Hann } else { Window::Rectangular };
        let spec = power_spectrum(&AudioSignal::mono(x, 44_100).unwrap(), 512, window).unwrap();
        prop_assert_eq!(spec.bin_power.len(), 257);
        prop_assert_eq!(spec.bin_freq_hz.len(), 257);
        prop_assert_eq!(spec.bin_freq_hz[0], 0.0);
        prop_assert!((spec.bin_freq_hz[256] - 22_050.0).abs() < 1e-9);
        prop_assert!(spec.bin_freq_hz.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(spec.bin_power.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn spectrum_matches_dft_oracle(x in samples(128..129)) {
        let oracle = common::dft_power(&x);
        let spec = power_spectrum(&AudioSignal::mono(x, 8_000).unwrap(), 128, Window::Rectangular).unwrap();
        let scale = oracle.iter().cloned().fold(0.0, f64::max);
        for (a, b) in spec.bin_power.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9 * scale.max(1e-300));
        }
    }

    #[test]
    fn tone_phase_is_periodic(freq in 100.0f64..20_000.0, phase in -10.0f64..10.0, amp in 0.0f64..1.0) {
        let a = generate_tone(freq, 300, amp, phase, 44_100).unwrap();
        let b = generate_tone(freq, 300, amp, phase + 2.0 * std::f64::consts::PI, 44_100).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(a.max_abs() <= amp + 1e-9);
    }

    #[test]
    fn on_bin_tone_concentrates_power(bin in 1usize..2047, phase in 0.0f64..std::f64::consts::TAU) {
        let freq = bin as f64 * 44_100.0 / 4096.0;
        let tone = generate_tone(freq, 4096, 1.0, phase, 44_100).unwrap();
        let spec = power_spectrum(&tone, 4096, Window::Rectangular).unwrap();
        prop_assert!(spec.bin_power[bin] >= 0.9999 * spec.total_power());
        prop_assert!((spec.bin_power[bin] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn wav_round_trip_within_quantisation(x in samples(1..400), stereo in any::<bool>(), rate in 8_000u32..192_000) {
        let sig = if stereo {
            let right: Vec<f64> = x.iter().map(|v| -v * 0.5).collect();
            AudioSignal::stereo(x, right, rate).unwrap()
        } else {
            AudioSignal::mono(x, rate).unwrap()
        };
        let (bytes, clipped) = encode_wav(&sig);
        prop_assert_eq!(clipped, 0);
        let (back, spec) = decode_wav(&bytes).unwrap();
        prop_assert_eq!(spec.sample_rate_hz, rate);
        prop_assert_eq!(back.channel_count(), sig.channel_count());
        for (a, b) in sig.channels().iter().flatten().zip(back.channels().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1.0 / 32767.0 + 1e-12);
        }
        // quantised samples survive a second pass exactly
        prop_assert_eq!(encode_wav(&back).0, bytes);
    }

    #[test]
    fn identity_channel_is_identity(x in samples(1..300), delay in 0usize..50) {
        let sig = AudioSignal::mono(x, 44_100).unwrap();
        let out = apply_channel(&sig, &ChannelSpec::identity()).unwrap();
        prop_assert_eq!(&out.signal, &sig);
        let spec = ChannelSpec { delay_samples: delay, ..ChannelSpec::identity() };
        let out = apply_channel(&sig, &spec).unwrap();
        prop_assert_eq!(out.signal.len(), sig.len() + delay);
        prop_assert!(out.signal.samples()[..delay].iter().all(|&v| v == 0.0));
        prop_assert_eq!(&out.signal.samples()[delay..], sig.samples());
    }

    #[test]
    fn channel_output_is_bounded_and_deterministic(seed in any::<u64>(), snr in -10.0f64..40.0, kind in 0usize..4) {
        let tone = generate_tone(19_200.0, 8192, 0.8, 0.0, 96_000).unwrap();
        let noise = NoiseSpec { kind: NoiseKind::ALL[kind], snr_db_at_carrier: snr, carrier_hz: 19_200.0 };
        let spec = ChannelSpec { seed, ..ChannelSpec::identity().with_noise(noise) };
        let a = apply_channel(&tone, &spec).unwrap();
        let b = apply_channel(&tone, &spec).unwrap();
        prop_assert!(a.signal.max_abs() <= 1.0 + 1e-9);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn tone_peak_at_nearest_bin() {
    let tone = generate_tone(18_000.0, 4096, 0.5, 0.0, 44_100).unwrap();
    let spec = power_spectrum(&tone, 4096, Window::Rectangular).unwrap();
    let oracle = common::dft_power(tone.samples());
    let oracle_peak = (0..oracle.len()).max_by(|&a, &b| oracle[a].total_cmp(&oracle[b])).unwrap();
    assert_eq!(spec.peak_bin(), oracle_peak);
    assert_eq!(spec.peak_bin(), (18_000.0f64 * 4096.0 / 44_100.0).round() as usize);
}

#[test]
fn mixed_tones_show_both_peaks() {
    let a = generate_tone(2_000.0, 4096, 0.5, 0.0, 48_000).unwrap();
    let b = generate_tone(9_000.0, 4096, 0.25, 1.0, 48_000).unwrap();
    let m = mix(&a, &b).unwrap();
    let spec = power_spectrum(&m, 4096, Window::Hann).unwrap();
    let oracle = common::dft_power(m.samples());
    let mut top: Vec<usize> = (0..oracle.len()).collect();
    top.sort_by(|&x, &y| oracle[y].total_cmp(&oracle[x]));
    for f in [2_000.0, 9_000.0] {
        let k = spec.nearest_bin(f);
        assert!(top[..6].contains(&k), "bin {k} not among the oracle's strongest");
        assert!(spec.bin_power[k] > 100.0 * spec.bin_power[spec.nearest_bin(5_000.0)]);
    }
}

#[test]
fn band_power_matches_brute_force_mean() {
    let noise = synth_noise(NoiseKind::White, 44_100, 44_100, 5).unwrap();
    let spec = averaged_power_spectrum(&noise, 4096, Window::Rectangular).unwrap();
    let carriers = [18_000.0, 18_250.0, 18_500.0, 18_750.0];
    let guard = 2.0 * spec.bin_width_hz();
    let got = band_power(&spec, 18_000.0, 19_500.0, &carriers, guard).unwrap();
    let kept: Vec<f64> = spec
        .bin_freq_hz
        .iter()
        .zip(&spec.bin_power)
        .filter(|(f, _)| **f >= 18_000.0 && **f <= 19_500.0)
        .filter(|(f, _)| carriers.iter().all(|c| (**f - c).abs() > guard))
        .map(|(_, p)| *p)
        .collect();
    assert_eq!(got.bin_count, kept.len());
    let oracle = kept.iter().sum::<f64>() / kept.len() as f64;
    assert!((got.mean_power - oracle).abs() <= 1e-12 * oracle);
}

#[test]
fn white_noise_snr_at_carrier() {
    let tone = generate_tone(19_200.0, 96_000, 0.01, 0.0, 96_000).unwrap();
    let noise = NoiseSpec { kind: NoiseKind::White, snr_db_at_carrier: 20.0, carrier_hz: 19_200.0 };
    let out = apply_channel(&tone, &ChannelSpec { seed: 11, ..ChannelSpec::identity().with_noise(noise) }).unwrap();
    assert_eq!(out.clipped_samples, 0);
    let snr = measure_snr_at(&tone, out.noise.as_ref().unwrap(), 19_200.0).unwrap();
    assert!((snr - 20.0).abs() <= 1.0, "measured {snr} dB");
}
