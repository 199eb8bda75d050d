use acoustic_modem::channel::{synth_noise, ChannelSpec, NoiseKind, NoiseSpec};
use acoustic_modem::eval::{sweep, Modem, Scheme, SweepAxis, SweepSpec, SyncMode};
use acoustic_modem::signal::{averaged_power_spectrum, Window};

#[test]
fn lowpass_noise_is_concentrated_below_10k() {
    for kind in [NoiseKind::LowpassVoice, NoiseKind::LowpassMusic] {
        for rate in [44_100, 96_000] {
            let n = synth_noise(kind, rate as usize * 2, rate, 9).unwrap();
            let spec = averaged_power_spectrum(&n, 4096, Window::Hann).unwrap();
            let below = spec.power_between(0.0, 10_000.0) / spec.total_power();
            assert!(below >= 0.9, "{kind} at {rate} Hz: {below:.3} below 10 kHz");
        }
    }
}

#[test]
fn jangle_noise_is_flat_across_band() {
    let n = synth_noise(NoiseKind::BroadbandJangle, 96_000 * 2, 96_000, 4).unwrap();
    let spec = averaged_power_spectrum(&n, 4096, Window::Hann).unwrap();
    let per_hz = |lo: f64, hi: f64| spec.power_between(lo, hi) / (hi - lo);
    let tilt = 10.0 * (per_hz(18_000.0, 19_500.0) / per_hz(1_000.0, 2_000.0)).log10();
    assert!(tilt.abs() <= 3.0, "tilt {tilt:.2} dB");
}

#[test]
fn bit_rate_grid_at_high_and_moderate_snr() {
    let modem = Modem::default_for(Scheme::Dpsk);
    let grid = vec![25.0, 50.0, 100.0, 200.0, 400.0];
    for (snr, seed) in [(30.0, 1u64), (5.0, 2)] {
        let noise = NoiseSpec { kind: NoiseKind::White, snr_db_at_carrier: snr, carrier_hz: 19_200.0 };
        let spec = SweepSpec {
            axis: SweepAxis::BitRate,
            values: grid.clone(),
            trials: 10,
            payload_bits: 200,
            sync: SyncMode::Loopback,
            reuse_seed: false,
        };
        let r = sweep(&modem, &spec, &ChannelSpec { seed, ..ChannelSpec::identity().with_noise(noise) }).unwrap();
        assert!(r.valid.iter().all(|&v| v));
        assert!(r.mean_btsr.iter().all(|m| (0.0..=1.0).contains(m)));
        // slower rates are never meaningfully worse than faster ones
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                assert!(r.mean_btsr[i] >= r.mean_btsr[j] - 0.05, "{snr} dB: {:?}", r.mean_btsr);
            }
        }
        if snr >= 30.0 {
            assert!(r.mean_btsr[3] >= 0.9, "200 bps at {snr} dB: {}", r.mean_btsr[3]);
        }
    }
}

#[test]
fn sweep_is_identical_across_runs() {
    let modem = Modem::default_for(Scheme::Fsk);
    let noise = NoiseSpec { kind: NoiseKind::LowpassMusic, snr_db_at_carrier: 10.0, carrier_hz: 18_000.0 };
    let spec = SweepSpec {
        axis: SweepAxis::SnrDb,
        values: vec![0.0, 10.0],
        trials: 3,
        payload_bits: 8,
        sync: SyncMode::Loopback,
        reuse_seed: false,
    };
    let channel = ChannelSpec { seed: 77, ..ChannelSpec::identity().with_noise(noise) };
    let a = sweep(&modem, &spec, &channel).unwrap();
    let b = sweep(&modem, &spec, &channel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}
