use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nsqkd_core::attack::intrinsic_info_upper;
use nsqkd_core::keyrate::{
    binary_entropy, chain_quantum, curve, key_rate_chain, key_rate_chain_raw, key_rate_plain,
    key_rate_preprocessed, p_grid, threshold,
};
use proptest::prelude::*;

#[test]
fn noiseless_chsh_rate() {
    assert_abs_diff_eq!(key_rate_chain(2, 1.0).unwrap(), 2f64.sqrt() - 1.0, epsilon = 1e-9);
}

#[test]
fn asymptotic_rate_bound() {
    for n in 2..=50 {
        let n_f = n as f64;
        let k = key_rate_chain(n, 1.0).unwrap();
        assert!(k >= 1.0 - PI * PI / (8.0 * n_f), "N={n}: {k}");
        assert_abs_diff_eq!(k, 1.0 - 2.0 * n_f * (PI / (4.0 * n_f)).sin().powi(2), epsilon = 1e-12);
    }
}

#[test]
fn longer_chains_beat_chsh_near_threshold() {
    for n in 3..=5 {
        for k in 86..=100 {
            let p = k as f64 / 100.0;
            assert!(key_rate_chain(n, p).unwrap() >= key_rate_chain(2, p).unwrap(), "N={n} p={p}");
        }
    }
}

#[test]
fn thresholds_fall_then_rise() {
    let t: Vec<f64> = (2..=8).map(|n| threshold(n, false).unwrap()).collect();
    assert!(t[1] < t[0]);
    for w in t[1..].windows(2) {
        assert!(w[1] > w[0], "{t:?}");
    }
}

#[test]
fn intrinsic_information_cutoff() {
    let sqrt2 = 2f64.sqrt();
    let cutoff = 2.0 / (1.0 + sqrt2);
    let at = |p: f64| intrinsic_info_upper(chain_quantum(2, p), p).unwrap();
    assert_abs_diff_eq!(cutoff, 0.8284, epsilon = 1e-4);
    assert!(at(cutoff) < 1e-12);
    assert_eq!(at(cutoff - 1e-3), 0.0);
    for k in 0..=50 {
        let p = cutoff + (1.0 - cutoff) * k as f64 / 50.0;
        assert_abs_diff_eq!(at(p), ((1.0 + sqrt2) * p - 2.0).max(0.0), epsilon = 1e-9);
    }
}

#[test]
fn preprocessing_never_hurts_on_curve() {
    let grid = p_grid(0.85, 1.0, 0.01).unwrap();
    let plain = curve(&[2, 3, 5, 10], &grid, false).unwrap();
    let pre = curve(&[2, 3, 5, 10], &grid, true).unwrap();
    for (a, b) in plain.iter().zip(&pre) {
        assert_eq!((a.n, a.p), (b.n, b.p));
        assert!(b.key_rate >= a.key_rate - 1e-12, "{a:?} vs {b:?}");
    }
}

#[test]
fn no_preprocessed_key_below_086() {
    for n in [2, 3, 5, 10, 20] {
        for k in 50..86 {
            let p = k as f64 / 100.0;
            let r = key_rate_preprocessed(n, p).unwrap();
            assert!(r.key_rate < 1e-12, "N={n} p={p}: {}", r.key_rate);
        }
    }
}

#[test]
fn long_chain_noiseless_curve_point() {
    let rows = curve(&[10], &[1.0], false).unwrap();
    assert!((rows[0].key_rate - 0.88).abs() <= 0.01);
}

proptest! {
    #[test]
    fn chsh_rate_closed_form(p in 0.0f64..=1.0) {
        let expected = 2f64.sqrt() * p - binary_entropy((1.0 + p) / 2.0).unwrap() - 1.0;
        prop_assert!((key_rate_chain_raw(2, p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn preprocessed_dominates_plain(n in 2usize..=12, p in 0.5f64..=1.0) {
        let plain = key_rate_plain(n, p).unwrap();
        let pre = key_rate_preprocessed(n, p).unwrap();
        prop_assert!(pre.key_rate >= plain.key_rate - 1e-12);
        prop_assert!((0.0..=0.5).contains(&pre.r_opt));
    }

    #[test]
    fn plain_rate_monotone_in_noise(n in 2usize..=12, p in 0.5f64..1.0, dp in 0.0f64..0.1) {
        let q = (p + dp).min(1.0);
        prop_assert!(key_rate_chain(n, q).unwrap() >= key_rate_chain(n, p).unwrap() - 1e-12);
    }
}
