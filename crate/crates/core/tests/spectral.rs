use std::f64::consts::PI;

use attractors_core::spectral::{
    analyze, filter_harmonics, filter_linear_combinations, find_peaks, power_spectrum, variable_power, AnalysisOptions,
    PeakRole, PeakSet, SpectrumClass, SpectrumOptions, Window,
};
use attractors_core::{burn_in, evolve, make_oracle, Params, Trajectory};
use proptest::prelude::*;

fn signal(n: usize, tones: &[(f64, f64)]) -> Trajectory {
    let data = (0..n)
        .map(|t| tones.iter().map(|(f, a)| a * (2.0 * PI * f * t as f64).cos()).sum())
        .collect();
    Trajectory::from_flat(data, 1, 0, 1.0).unwrap()
}

#[test]
fn two_tones_in_power_order() {
    // Amplitude ratio sqrt(0.5) gives power ratio 0.5.
    let s = power_spectrum(&signal(1024, &[(0.125, 1.0), (0.25, 0.5f64.sqrt())]), &SpectrumOptions::default()).unwrap();
    let p = find_peaks(&s, 0.01);
    assert_eq!(p.len(), 2);
    assert_eq!(p.peaks[0].freq, 0.125);
    assert!((p.peaks[1].power - 0.5).abs() < 1e-9);
}

#[test]
fn white_noise_below_threshold_has_no_peaks() {
    let mut s = power_spectrum(&signal(512, &[(0.1, 1.0)]), &SpectrumOptions::default()).unwrap();
    for (k, p) in s.power.iter_mut().enumerate() {
        *p = 1e-6 * ((k * 7919) % 13) as f64;
    }
    assert!(find_peaks(&s, 0.01).is_empty());
}

#[test]
fn harmonic_stack_reduces_to_one_base() {
    let f = 5.0 / 512.0;
    let s = power_spectrum(&signal(512, &[(f, 1.0), (2.0 * f, 0.7), (3.0 * f, 0.4)]), &SpectrumOptions::default()).unwrap();
    let a = analyze(&s, &AnalysisOptions::default()).unwrap();
    assert_eq!(a.base_frequencies(), vec![f]);
    assert_eq!(a.classification, SpectrumClass::Periodic);
}

#[test]
fn sum_tone_reduces_to_two_bases() {
    let (f1, f2) = (31.0 / 1024.0, 50.0 / 1024.0);
    let s = power_spectrum(&signal(1024, &[(f1, 1.0), (f2, 0.9), (f1 + f2, 0.5)]), &SpectrumOptions::default()).unwrap();
    let a = analyze(&s, &AnalysisOptions::default()).unwrap();
    assert_eq!(a.base_frequencies(), vec![f1, f2]);
    assert_eq!(a.classification, SpectrumClass::QuasiPeriodic(2));
}

#[test]
fn torus_has_two_incommensurate_bases() {
    let sys = make_oracle("torus", &Params::new()).unwrap();
    let x = burn_in(sys.as_ref(), &sys.default_initial_state(), 200).unwrap();
    let t = evolve(sys.as_ref(), &x, 8191, 1).unwrap();
    let s = power_spectrum(&t, &SpectrumOptions::default()).unwrap();
    let a = analyze(&s, &AnalysisOptions::default()).unwrap();
    let mut bases = a.base_frequencies();
    bases.sort_by(f64::total_cmp);
    let truth = [0.06, 0.06 * 1.618_033_988_749_895];
    for (b, t) in bases.iter().zip(truth) {
        assert!((b - t).abs() <= s.resolution(), "{b} vs {t}");
    }
    assert_eq!(a.classification, SpectrumClass::QuasiPeriodic(2));
}

#[test]
fn lorenz_is_broadband() {
    let sys = make_oracle("lorenz", &Params::new()).unwrap();
    let x = burn_in(sys.as_ref(), &sys.default_initial_state(), 2000).unwrap();
    let t = evolve(sys.as_ref(), &x, 8000, 1).unwrap();
    let opts = SpectrumOptions {
        time_per_step: 0.01,
        ..Default::default()
    };
    let a = analyze(&power_spectrum(&t, &opts).unwrap(), &AnalysisOptions::default()).unwrap();
    assert_eq!(a.classification, SpectrumClass::BroadbandChaotic);
    assert!(a.outside_fraction > 0.5);
}

proptest! {
    #[test]
    fn parseval(series in proptest::collection::vec(-100.0f64..100.0, 16..300), hann in any::<bool>()) {
        let window = if hann { Window::Hann } else { Window::None };
        let n = series.len();
        let p = variable_power(&series, false, window);
        let energy: f64 = series
            .iter()
            .enumerate()
            .map(|(t, x)| {
                let w = if hann { 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos() } else { 1.0 };
                (x * w).powi(2)
            })
            .sum();
        let total: f64 = p.iter().sum();
        prop_assert!((total - energy).abs() <= 1e-9 * energy.max(1e-300));
    }

    #[test]
    fn filters_are_idempotent_and_explain_every_peak(
        raw in proptest::collection::vec((1u32..400, 1u32..1000), 1..12),
        tol in 0.0005f64..0.005,
        m in 1i64..6,
    ) {
        let pairs: Vec<(f64, f64)> = raw.iter().map(|&(f, p)| (f as f64 / 1000.0, p as f64 / 1000.0)).collect();
        let set = PeakSet::from_pairs(&pairs);
        let h = filter_harmonics(&set, tol);
        prop_assert_eq!(&filter_harmonics(&h, tol), &h);
        let c = filter_linear_combinations(&h, tol, m);
        prop_assert_eq!(&filter_linear_combinations(&c, tol, m), &c);
        let direct = filter_linear_combinations(&set, tol, m);
        prop_assert_eq!(&filter_linear_combinations(&direct, tol, m), &direct);

        prop_assert!(c.bases().count() <= c.len());
        prop_assert!(c.bases().count() >= 1);
        for (i, p) in c.peaks.iter().enumerate() {
            match p.role {
                PeakRole::Base => {}
                PeakRole::Candidate => prop_assert!(false, "unexamined peak"),
                _ => {
                    let f = c.explained_frequency(i).unwrap();
                    prop_assert!((f - p.freq).abs() <= tol + 1e-15);
                }
            }
        }
    }
}
