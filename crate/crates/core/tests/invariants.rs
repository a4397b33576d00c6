use popslab::channel::{exponential_profile, reverse, DopplerSpectrum, ScatteringSpec};
use popslab::kernels::{
    brute_force_total_kernel, infinite_kernel, interference_kernel, useful_kernel, Snr, Window,
};
use popslab::lattice::{LatticeConfig, LatticeKind, SampledWaveform};
use popslab::solver::{default_solver, half_step, sinr_of_pair};
use popslab::C64;
use proptest::prelude::*;

const TS: f64 = 1e-6;

fn waveform(parts: &[(f64, f64)], start: i64) -> SampledWaveform {
    SampledWaveform::new(parts.iter().map(|&(re, im)| C64::new(re, im)).collect(), TS, start).unwrap()
}

fn samples(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_filter("nonzero", |v| v.iter().any(|&(a, b)| a.abs() + b.abs() > 1e-3))
}

fn channel(paths: usize, doppler: f64) -> ScatteringSpec {
    ScatteringSpec::new(exponential_profile(paths, 0.6).unwrap(), DopplerSpectrum::Jakes { max_doppler: doppler / TS })
}

fn kind(hex: bool) -> LatticeKind {
    if hex {
        LatticeKind::Hexagonal
    } else {
        LatticeKind::Rectangular
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sinr_ignores_waveform_scale(
        phi in samples(12),
        psi in samples(10),
        a in 0.1f64..10.0,
        b in 0.1f64..10.0,
        hex in any::<bool>(),
    ) {
        let cfg = LatticeConfig::new(kind(hex), 4, 6, TS).unwrap();
        let spec = channel(3, 1e-3);
        let (phi, psi) = (waveform(&phi, 0), waveform(&psi, 1));
        let snr = Snr::Finite(50.0);
        let base = sinr_of_pair(&phi, &psi, &spec, &cfg, snr).unwrap();
        let scaled = sinr_of_pair(&phi.scaled(C64::new(a, 0.0)), &psi.scaled(C64::new(0.0, b)), &spec, &cfg, snr).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9, "{} vs {}", base, scaled);
    }

    #[test]
    fn interference_kernel_is_positive_semidefinite(
        phi in samples(12),
        x in samples(14),
        start in -6i64..8,
        hex in any::<bool>(),
    ) {
        let cfg = LatticeConfig::new(kind(hex), 4, 6, TS).unwrap();
        let spec = channel(2, 5e-3);
        let phi = waveform(&phi, 0);
        let window = Window::new(start, 14).unwrap();
        let ki = interference_kernel(&phi, &spec, &cfg, window).unwrap();
        let x: Vec<C64> = x.iter().map(|&(re, im)| C64::new(re, im)).collect();
        prop_assert!(ki.quadratic_form_slice(&x) >= -1e-12 * ki.trace().abs().max(1.0));
    }

    #[test]
    fn lattice_kernel_matches_direct_sum(phi in samples(9), start in -8i64..10, hex in any::<bool>()) {
        let cfg = LatticeConfig::new(kind(hex), 4, 6, TS).unwrap();
        let spec = channel(3, 2e-3);
        let phi = waveform(&phi, 0);
        let window = Window::new(start, 9).unwrap();
        let fast = infinite_kernel(&phi, &spec, &cfg, window).unwrap();
        let brute = brute_force_total_kernel(&phi, &spec, &cfg, window, (-8, 8));
        prop_assert!(fast.max_abs_diff(&brute) <= 1e-12 * phi.norm_sq());
    }

    #[test]
    fn reversed_channel_swaps_roles(phi in samples(8), psi in samples(7), hex in any::<bool>()) {
        let cfg = LatticeConfig::new(kind(hex), 4, 6, TS).unwrap();
        let mut spec = channel(3, 4e-3);
        spec.time_offset = 1;
        spec.freq_offset = 300.0;
        let back = reverse(&spec);
        let (phi, psi) = (waveform(&phi, -2), waveform(&psi, 3));
        let ks = useful_kernel(&phi, &spec, Window::of(&psi)).unwrap().quadratic_form(&psi);
        let ks_dual = useful_kernel(&psi, &back, Window::of(&phi)).unwrap().quadratic_form(&phi);
        let ki = interference_kernel(&phi, &spec, &cfg, Window::of(&psi)).unwrap().quadratic_form(&psi);
        let ki_dual = interference_kernel(&psi, &back, &cfg, Window::of(&phi)).unwrap().quadratic_form(&phi);
        prop_assert!((ks - ks_dual).abs() <= 1e-10 * ks.abs().max(1e-12));
        prop_assert!((ki - ki_dual).abs() <= 1e-10 * ki.abs().max(1e-12));
    }

    #[test]
    fn half_step_beats_its_warm_start(phi in samples(12), warm in samples(12), hex in any::<bool>()) {
        let cfg = LatticeConfig::new(kind(hex), 4, 6, TS).unwrap();
        let spec = channel(3, 1e-3);
        let phi = waveform(&phi, 0);
        let warm = waveform(&warm, 1);
        let window = Window::of(&warm);
        let noise = 1e-3;
        let step = half_step(&phi, &spec, &cfg, noise, window, Some(&warm), default_solver()).unwrap();
        let ks = useful_kernel(&phi, &spec, window).unwrap();
        let ki = interference_kernel(&phi, &spec, &cfg, window).unwrap();
        let before = ks.quadratic_form(&warm) / (ki.quadratic_form(&warm) + noise * phi.norm_sq() * warm.norm_sq());
        prop_assert!(step.value >= before * (1.0 - 1e-9), "{} < {}", step.value, before);
    }
}
