use std::f64::consts::TAU;

use mra_core::divergence::{kl_monte_carlo, kl_series_lower_unchecked, kl_series_upper_unchecked, log_density};
use mra_core::estimators::{em_fit, estimate_support, log_likelihood, spectrum_stats, EmOptions};
use mra_core::experiments::fit_log_slope;
use mra_core::io;
use mra_core::moments::{delta_norm, moment_tensor, multiplicity};
use mra_core::signal::{
    apply_shift, dft, idft, orbit_distance, project_support, random_signal, validate_class, GroupElement,
};
use mra_core::{sample, GroupKind, ModelConfig, Observations, Signal, SignalClassParams, SupportSet};
use num_complex::Complex64;
use proptest::prelude::*;

fn odd_len() -> impl Strategy<Value = usize> {
    (1usize..=5).prop_map(|h| 2 * h + 1)
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

fn signal() -> impl Strategy<Value = Signal> {
    odd_len().prop_flat_map(values).prop_map(|v| Signal::from_values(v).unwrap())
}

fn pair() -> impl Strategy<Value = (Signal, Signal)> {
    odd_len()
        .prop_flat_map(|l| (values(l), values(l)))
        .prop_map(|(a, b)| (Signal::from_values(a).unwrap(), Signal::from_values(b).unwrap()))
}

fn conj_symmetric(s: &Signal) -> bool {
    let h = s.half_len() as i64;
    (-h..=h).all(|j| (s.coef(-j) - s.coef(j).conj()).norm() <= 1e-12)
}

fn batch(theta: &Signal, sigma: f64, n: usize, seed: u64) -> Observations {
    let cfg = ModelConfig::new(theta.len(), sigma, GroupKind::Continuous, seed).unwrap();
    sample(theta, &cfg, n).unwrap().into_observations()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_is_unitary_and_invertible(v in odd_len().prop_flat_map(values)) {
        let f = dft(&v).unwrap();
        let a: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b: f64 = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((a - b).abs() <= 1e-12);
        for (x, y) in v.iter().zip(idft(&f).unwrap()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn signal_operations_stay_real(theta in signal(), alpha in 0.0..TAU, factor in -3.0f64..3.0) {
        let moved = apply_shift(&theta, &GroupElement::continuous(alpha)).unwrap();
        prop_assert!((moved.norm() - theta.norm()).abs() <= 1e-12);
        let s = SupportSet::first(theta.half_len().min(1));
        for out in [moved, theta.centered(), theta.scaled(factor), project_support(&theta, &s).unwrap(),
                    theta.map_spectrum(|j, c| c * Complex64::from_polar(1.0, 0.3 * j as f64))] {
            prop_assert!(conj_symmetric(&out));
        }
    }

    #[test]
    fn discrete_shift_matches_continuous_angle(theta in signal(), k in -20i64..20) {
        let l = theta.len();
        let d = apply_shift(&theta, &GroupElement::discrete(k, l).unwrap()).unwrap();
        let c = apply_shift(&theta, &GroupElement::continuous(TAU * k as f64 / l as f64)).unwrap();
        prop_assert!(d.distance(&c) <= 1e-12);
        let g = GroupElement::continuous(7.5 * k as f64);
        prop_assert!((0.0..TAU).contains(&g.angle()));
    }

    #[test]
    fn projection_is_idempotent(theta in signal(), mask in 0u32..32) {
        let h = theta.half_len();
        let s = SupportSet::new((1..=h).filter(|j| mask & (1 << (j - 1)) != 0), theta.len()).unwrap();
        let once = project_support(&theta, &s).unwrap();
        prop_assert!(project_support(&once, &s).unwrap().distance(&once) <= 1e-12);
        prop_assert!((once.dc() - theta.dc()).abs() <= 1e-12);
    }

    #[test]
    fn orbit_distance_ordering((theta, phi) in pair()) {
        let c = orbit_distance(&theta, &phi, GroupKind::Continuous).unwrap();
        let d = orbit_distance(&theta, &phi, GroupKind::Discrete).unwrap();
        prop_assert!(c <= d + 1e-12);
        prop_assert!(d <= theta.distance(&phi) + 1e-12);
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn random_signals_are_in_class(s in 0usize..=3, seed in any::<u64>()) {
        let params = SignalClassParams::with_defaults(s);
        let theta = random_signal(&params, 7, seed).unwrap();
        prop_assert!(validate_class(&theta, &params).passes());
        prop_assert_eq!(&theta, &random_signal(&params, 7, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moments_are_orbit_invariants(theta in signal(), alpha in 0.0..TAU, m in 1usize..=6) {
        let moved = apply_shift(&theta, &GroupElement::continuous(alpha)).unwrap();
        prop_assert!(delta_norm(&theta, &moved, m, GroupKind::Continuous).unwrap() <= 1e-10);
        let k = (alpha * 10.0) as i64;
        let shifted = apply_shift(&theta, &GroupElement::discrete(k, theta.len()).unwrap()).unwrap();
        prop_assert!(delta_norm(&theta, &shifted, m.min(4), GroupKind::Discrete).unwrap() <= 1e-10);
    }

    #[test]
    fn tensor_entries_respect_structure(theta in signal(), m in 1usize..=4, discrete in any::<bool>()) {
        let group = if discrete { GroupKind::Discrete } else { GroupKind::Continuous };
        let t = moment_tensor(&theta, m, group).unwrap();
        let l = theta.len() as i64;
        for key in t.entries.keys() {
            let sum: i64 = key.iter().sum();
            let ok = if discrete { sum.rem_euclid(l) == 0 } else { sum == 0 };
            prop_assert!(ok);
            prop_assert!(key.windows(2).all(|w| w[0] <= w[1]));
        }
        let direct: f64 = t.entries.iter().map(|(k, v)| multiplicity(k) * v.norm_sqr()).sum();
        prop_assert!(t.hs_norm_sq >= 0.0);
        prop_assert!((t.hs_norm_sq - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn tensor_perturbation_bound(v in odd_len().prop_flat_map(|l| (values(l), values(l))), eps in 0.0f64..0.33) {
        let theta = Signal::from_values(v.0).unwrap();
        prop_assume!(theta.norm() > 1e-6);
        let theta = theta.scaled(1.0 / theta.norm());
        let dir = Signal::from_values(v.1).unwrap();
        prop_assume!(dir.norm() > 1e-6);
        let phi = Signal::from_values(
            theta.values().iter().zip(dir.values()).map(|(a, b)| a + eps * b / dir.norm()).collect(),
        ).unwrap();
        let rho = orbit_distance(&theta, &phi, GroupKind::Continuous).unwrap();
        prop_assume!(rho <= 1.0 / 3.0);
        for m in 1..=6 {
            let d = delta_norm(&theta, &phi, m, GroupKind::Continuous).unwrap();
            prop_assert!(d * d <= 12.0 * 2f64.powi(m as i32) * rho * rho + 1e-12, "m={} {} vs rho={}", m, d, rho);
        }
    }

    #[test]
    fn second_moment_lower_bound((theta, phi) in pair()) {
        let d2 = delta_norm(&theta, &phi, 2, GroupKind::Continuous).unwrap();
        let gap = theta.norm_sq() - phi.norm_sq();
        prop_assert!(d2 * d2 >= gap * gap / theta.len() as f64 - 1e-10);
    }

    #[test]
    fn series_bounds_are_ordered((theta, phi) in pair(), sigma in 1.0f64..3.0) {
        prop_assume!(theta.len() <= 7);
        let (t, p) = (theta.centered(), phi.centered());
        let lo = kl_series_lower_unchecked(&t, &p, sigma, 8, GroupKind::Continuous).unwrap();
        let hi = kl_series_upper_unchecked(&t, &p, sigma, 4, GroupKind::Continuous).unwrap();
        prop_assert!(lo.is_finite() && hi.is_finite());
        prop_assert!(lo <= hi);
        let lo4 = kl_series_lower_unchecked(&t, &p, sigma, 4, GroupKind::Continuous).unwrap();
        prop_assert!(lo4 <= lo);
    }

    #[test]
    fn log_density_grid_invariance(theta in signal(), k in 0usize..16, sigma in 1.0f64..3.0) {
        let y: Vec<f64> = (0..theta.len()).map(|i| (i as f64 * 1.3).sin()).collect();
        let ys = Signal::from_values(y.clone()).unwrap();
        let moved = apply_shift(&ys, &GroupElement::continuous(TAU * k as f64 / 16.0)).unwrap();
        let a = log_density(&y, &theta, sigma, 16, GroupKind::Continuous).unwrap();
        let b = log_density(moved.values(), &theta, sigma, 16, GroupKind::Continuous).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        let fine = log_density(&y, &theta, sigma, 512, GroupKind::Continuous).unwrap();
        let coarse = log_density(&y, &theta, sigma, 256, GroupKind::Continuous).unwrap();
        prop_assert!((fine - coarse).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kl_is_nonnegative_up_to_noise((theta, phi) in pair(), sigma in 1.0f64..3.0, seed in any::<u64>()) {
        let d = kl_monte_carlo(&theta, &phi, sigma, 4000, 64, seed, GroupKind::Continuous).unwrap();
        prop_assert!(d.stderr >= 0.0 && d.n_mc == 4000);
        prop_assert!(d.mean >= -3.0 * d.stderr);
    }

    #[test]
    fn power_spectrum_ignores_row_shifts(theta in signal(), seed in any::<u64>()) {
        let obs = batch(&theta, 1.0, 64, seed);
        let rows: Vec<Vec<f64>> = obs.rows().enumerate().map(|(i, r)| {
            let mut v = r.to_vec();
            v.rotate_right(i % r.len());
            v
        }).collect();
        let shifted = Observations::new(obs.config().clone(), rows).unwrap();
        for (a, b) in spectrum_stats(&obs).unwrap().iter().zip(spectrum_stats(&shifted).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn support_is_the_threshold_set(m in prop::collection::vec(-1.0f64..1.0, 1..6), c0 in 0.05f64..1.0) {
        let est = estimate_support(&m, c0).unwrap();
        for (i, v) in m.iter().enumerate() {
            prop_assert_eq!(est.support.contains(i + 1), *v >= c0 * c0 / 2.0);
        }
    }

    #[test]
    fn em_ascends_and_stays_on_support(seed in any::<u64>(), sigma in 0.5f64..2.0, mask in 1u32..4) {
        let theta = random_signal(&SignalClassParams::with_defaults(2), 5, seed).unwrap();
        let obs = batch(&theta, sigma, 300, seed ^ 1);
        let s = SupportSet::new((1..=2).filter(|j| mask & (1 << (j - 1)) != 0), 5).unwrap();
        let opts = EmOptions { k_quad: 32, restarts: 2, max_iter: 100, ..Default::default() };
        let fit = em_fit(&obs, &s, &opts, seed).unwrap();
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8);
        }
        for j in 1..=2 {
            if !s.contains(j) {
                prop_assert!(fit.estimate.coef(j as i64).norm() <= 1e-12);
            }
        }
        prop_assert!((fit.loglik - log_likelihood(&obs, &fit.estimate, 32).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn formats_round_trip(theta in signal(), seed in any::<u64>(), m in 1usize..=3) {
        let text = io::to_json(&theta).unwrap();
        let back: Signal = io::from_json(&text).unwrap();
        prop_assert_eq!(back.fourier(), theta.fourier());
        prop_assert!(back.distance(&theta) <= 1e-12);
        prop_assert_eq!(io::to_json(&back).unwrap(), text);

        let obs = batch(&theta, 0.7, 5, seed);
        let mut first = Vec::new();
        io::write_batch_csv(&mut first, &obs).unwrap();
        let read = io::read_batch_csv(first.as_slice()).unwrap();
        let mut second = Vec::new();
        io::write_batch_csv(&mut second, &read).unwrap();
        prop_assert_eq!(first, second);

        let t = moment_tensor(&theta, m, GroupKind::Continuous).unwrap();
        let text = io::to_json(&t).unwrap();
        let back: mra_core::moments::MomentTensor = io::from_json(&text).unwrap();
        prop_assert_eq!(io::to_json(&back).unwrap(), text);
    }
}

#[test]
fn slope_fit_recovers_injected_power_law() {
    let xs = [1.0, 1.4, 2.0, 2.8, 4.0];
    for b in [-0.5, 3.0, 5.0] {
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 0.37 * x.powf(b)).collect();
        let (slope, _) = fit_log_slope(&xs, &ys).unwrap();
        assert!((slope - b).abs() <= 1e-12, "{slope} vs {b}");
    }
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let theta = random_signal(&SignalClassParams::with_defaults(2), 5, 3).unwrap();
    let phi = random_signal(&SignalClassParams::with_defaults(2), 5, 4).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| kl_monte_carlo(&theta, &phi, 1.5, 10_000, 64, 9, GroupKind::Continuous).unwrap())
    };
    assert_eq!(run(1), run(3));
}
