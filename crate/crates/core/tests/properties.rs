//! Property-based invariants.

mod common;

use common::*;
use pixelcode::antenna_model::{load_model, port_currents, radiation_pattern, save_model, AntennaCoder};
use pixelcode::beamspace::{isotropic_pattern, siso_channel};
use pixelcode::codebook::{train_codebook, GlaConfig, TrainingSet};
use pixelcode::mimo_capacity::{capacity_uniform, capacity_waterfilling, waterfill};
use pixelcode::sebo::{exhaustive_maximize, sebo_maximize, SeboConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random quadratic pseudo-Boolean objective with many local optima.
fn quadratic(q: usize, seed: u64) -> impl Fn(&[u8]) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..q * q).map(|_| rng.random_range(-1.0..1.0)).collect();
    move |x: &[u8]| {
        let mut v = 0.0;
        for i in 0..q {
            for j in 0..q {
                v += w[i * q + j] * (x[i] * x[j]) as f64;
            }
        }
        v
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coder_index_round_trips(q in 1usize..=20, raw in any::<u64>()) {
        let idx = raw % (1u64 << q);
        let c = AntennaCoder::from_index(idx, q);
        prop_assert_eq!(c.to_index(), Some(idx));
        prop_assert_eq!(c.len(), q);
    }

    #[test]
    fn currents_respect_switch_states(q in 1usize..=10, seed in 0u64..1000, raw in any::<u64>()) {
        let m = model(q, 3, seed);
        let coder = AntennaCoder::from_index(raw % (1u64 << q), q);
        let i = port_currents(&m, &coder, c(1.0, 0.0)).unwrap();
        let v = m.z_matrix() * &i;
        let scale = m.z_matrix().norm() * i.norm();
        for (p, &b) in coder.bits().iter().enumerate() {
            if b == 1 {
                prop_assert_eq!(i[p + 1], c(0.0, 0.0));
            } else {
                prop_assert!(v[p + 1].norm() <= 1e-9 * scale);
            }
        }
        let oracle = penalty_currents(&m, &coder);
        prop_assert!((&i - &oracle).norm() <= 1e-6 * i.norm());
    }

    #[test]
    fn currents_and_pattern_scale_linearly(q in 1usize..=8, seed in 0u64..1000, raw in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let m = model(q, 2, seed);
        let coder = AntennaCoder::from_index(raw % (1u64 << q), q);
        let a = c(re, im);
        let unit = port_currents(&m, &coder, c(1.0, 0.0)).unwrap();
        let scaled = port_currents(&m, &coder, a).unwrap();
        prop_assert!((&scaled - &unit * a).norm() <= 1e-12 * unit.norm().max(1.0) * a.norm().max(1.0));
        let e = radiation_pattern(&m, &coder, false).unwrap();
        prop_assert!((m.e_oc() * &scaled - &e * a).norm() <= 1e-9 * e.norm() * a.norm().max(1.0));
    }

    #[test]
    fn all_off_radiates_feed_column(q in 1usize..=10, seed in 0u64..1000) {
        let m = model(q, 3, seed);
        let off = AntennaCoder::all_off(q);
        let i = port_currents(&m, &off, c(1.0, 0.0)).unwrap();
        prop_assert!(i.iter().skip(1).all(|v| *v == c(0.0, 0.0)));
        let e = radiation_pattern(&m, &off, false).unwrap();
        prop_assert_eq!(e, m.e_oc().column(0).into_owned());
    }

    #[test]
    fn normalised_patterns_have_unit_norm(q in 1usize..=10, seed in 0u64..1000, raw in any::<u64>()) {
        let m = model(q, 4, seed);
        let coder = AntennaCoder::from_index(raw % (1u64 << q), q);
        let e = radiation_pattern(&m, &coder, true).unwrap();
        prop_assert!((e.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_rotation_conjugates_channel(seed in 0u64..1000, psi in -3.2f64..3.2) {
        let h = channel(3, seed, 0);
        let e_t = isotropic_pattern(3);
        let e_r = CVector::from_fn(6, |i, _| c(1.0 + i as f64, (seed % 7) as f64 - 3.0));
        let base = siso_channel(&e_r, &h, &e_t).unwrap();
        let rot = num_complex::Complex64::from_polar(1.0, psi);
        let turned = siso_channel(&(e_r.clone() * rot), &h, &e_t).unwrap();
        prop_assert!((turned - base * rot.conj()).norm() <= 1e-12 * base.norm().max(1.0));
    }

    #[test]
    fn model_files_round_trip(q in 1usize..=6, k in 1usize..=4, seed in any::<u64>()) {
        let m = model(q, k, seed);
        let bytes = save_model(&m).unwrap();
        let back = load_model(&bytes).unwrap();
        prop_assert_eq!(save_model(&back).unwrap(), bytes);
        prop_assert_eq!(back, m);
    }

    #[test]
    fn sebo_is_monotone_and_dominated(q in 2usize..=12, j in 1usize..=6, seed in 0u64..10_000, init_raw in any::<u64>()) {
        let f = quadratic(q, seed);
        let init = AntennaCoder::from_index(init_raw % (1u64 << q), q);
        let cfg = SeboConfig::default().with_block_size(j).with_seed(seed);
        let trace = sebo_maximize(&f, q, &cfg, Some(&init)).unwrap();
        prop_assert_eq!(trace.value, f(trace.coder.bits()));
        prop_assert!(trace.value >= f(init.bits()));
        prop_assert!(trace.records.windows(2).all(|w| w[1].value >= w[0].value));
        let (_, best) = exhaustive_maximize(&f, q).unwrap();
        prop_assert!(trace.value <= best);
        let again = sebo_maximize(&f, q, &cfg, Some(&init)).unwrap();
        prop_assert_eq!(again, trace);
    }

    #[test]
    fn one_block_sebo_is_exhaustive(q in 1usize..=10, seed in 0u64..10_000) {
        let f = quadratic(q, seed);
        let cfg = SeboConfig::default().with_block_size(10);
        let trace = sebo_maximize(&f, q, &cfg, None).unwrap();
        let (_, best) = exhaustive_maximize(&f, q).unwrap();
        prop_assert_eq!(trace.value, best);
    }

    #[test]
    fn waterfill_satisfies_kkt(eig in prop::collection::vec(0.0f64..10.0, 1..8), p in 0.01f64..100.0, noise in 0.05f64..5.0) {
        prop_assume!(eig.iter().any(|&v| v > 1e-6));
        let a = waterfill(&eig, p, noise).unwrap();
        let total: f64 = a.powers.iter().sum();
        prop_assert!((total - p).abs() <= 1e-9 * p);
        let lam_max = eig.iter().copied().fold(0.0, f64::max);
        for (&pi, &l) in a.powers.iter().zip(&eig) {
            prop_assert!(pi >= 0.0);
            if l <= 1e-12 * lam_max {
                prop_assert_eq!(pi, 0.0);
            } else if pi > 0.0 {
                prop_assert!((a.water_level - noise / l - pi).abs() <= 1e-9 * a.water_level.max(1.0));
            } else {
                prop_assert!(a.water_level <= noise / l + 1e-9 * a.water_level.max(1.0));
            }
        }
    }

    #[test]
    fn waterfilling_dominates_uniform(nr in 1usize..=4, nt in 1usize..=4, seed in any::<u64>(), snr_db in -20.0f64..40.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian(nr, nt, &mut rng);
        let p = 10f64.powf(snr_db / 10.0);
        let up = capacity_uniform(&h, p, 1.0).unwrap();
        let (wf, _) = capacity_waterfilling(&h, p, 1.0).unwrap();
        prop_assert!(up >= 0.0);
        prop_assert!(wf >= up - 1e-9);
    }

    #[test]
    fn capacity_is_unitarily_invariant(nr in 1usize..=4, nt in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = complex_gaussian(nr, nt, &mut rng);
        let left = random_unitary(nr, &mut rng);
        let right = random_unitary(nt, &mut rng);
        let rotated = &left * &h * &right;
        let up = capacity_uniform(&h, 3.0, 1.0).unwrap();
        let up_rot = capacity_uniform(&rotated, 3.0, 1.0).unwrap();
        prop_assert!((up - up_rot).abs() <= 1e-9);
        let (wf, _) = capacity_waterfilling(&h, 3.0, 1.0).unwrap();
        let (wf_rot, _) = capacity_waterfilling(&rotated, 3.0, 1.0).unwrap();
        prop_assert!((wf - wf_rot).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gla_objective_never_decreases(seed in any::<u64>(), m_size in 2usize..=6) {
        let m = model(6, 3, seed);
        let ts = TrainingSet::sample(3, 60, isotropic_pattern(3), seed ^ 1).unwrap();
        let gla = GlaConfig { seed, ..GlaConfig::default() };
        let cb = train_codebook(&m, &ts, m_size, &gla, &SeboConfig::default()).unwrap();
        let h = &cb.training.objective_history;
        prop_assert!(h.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()), "{:?}", h);
        prop_assert_eq!(cb.len(), m_size);
    }
}
