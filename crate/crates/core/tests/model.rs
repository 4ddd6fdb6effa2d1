mod common;

use common::{battery, V_B};
use ehlc_core::model::{
    charge_rate, discharge_delivered, idle_charge_rate, inv_rate, invert_discharge, quantize_gamma_channel, rate,
};
use ehlc_core::{BatteryParams, ChannelDist, Error, FrameConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E: f64 = std::f64::consts::E;

#[test]
fn charge_rate_examples() {
    assert_eq!(charge_rate(0.0, &battery(5.0, 1.0)), 0.0);
    assert_eq!(charge_rate(0.01, &battery(0.0, 1.0)), 0.01);
    let bat = battery(5.0, 1.0);
    assert!((charge_rate(0.225, &bat) - 0.1125).abs() < 1e-15);
    let best = (0..=100_000)
        .map(|i| i as f64 * 1e-5)
        .max_by(|a, b| charge_rate(*a, &bat).total_cmp(&charge_rate(*b, &bat)))
        .unwrap();
    assert!((best - 0.225).abs() < 1e-5);
}

#[test]
fn discharge_examples() {
    let bat = battery(5.0, 1.0);
    assert_eq!(discharge_delivered(0.0, &bat).unwrap(), 0.0);
    assert_eq!(discharge_delivered(0.01, &battery(0.0, 1.0)).unwrap(), 0.01);
    let d = discharge_delivered(0.1, &bat).unwrap();
    assert!((d - (0.1 - 5.0 * 0.01 / 2.25)).abs() < 1e-15);
    assert!((invert_discharge(d, &bat).unwrap() - 0.1).abs() < 1e-12);
    assert!(matches!(discharge_delivered(0.3, &bat), Err(Error::DrainBeyondPeak { .. })));
}

#[test]
fn invert_discharge_examples() {
    let bat = battery(5.0, 1.0);
    assert_eq!(invert_discharge(0.0, &bat).unwrap(), 0.0);
    assert_eq!(invert_discharge(0.37, &battery(0.0, 1.0)).unwrap(), 0.37);
    assert!(matches!(invert_discharge(0.2, &bat), Err(Error::InfeasibleDelivery { .. })));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let p = rng.gen_range(0.0..bat.max_delivery());
        let d = invert_discharge(p, &bat).unwrap();
        assert!(d <= bat.peak());
        assert!((discharge_delivered(d, &bat).unwrap() - p).abs() < 1e-12);
    }
}

#[test]
fn idle_charge_examples() {
    assert_eq!(idle_charge_rate(3.0, &battery(0.0, 1.0)), 3.0);
    assert_eq!(idle_charge_rate(0.01, &battery(5.0, 1.0)), 0.01);
    assert!((idle_charge_rate(1.0, &battery(5.0, 1.0)) - 0.225).abs() < 1e-15);
}

#[test]
fn idle_charge_beats_every_grid_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let bat = battery(rng.gen_range(0.0..20.0), 1.0);
        let u = rng.gen_range(0.0..1.0);
        let v = idle_charge_rate(u, &bat);
        let best = (0..=10_000).map(|i| bat.f_c(u * i as f64 / 1e4)).fold(f64::MIN, f64::max);
        assert!(best <= bat.f_c(v) + 1e-9);
    }
}

#[test]
fn rate_examples() {
    assert_eq!(rate(0.0), 0.0);
    assert!((rate(E - 1.0) - 1.0).abs() < 1e-15);
    assert_eq!(inv_rate(0.0), 0.0);
    assert!((inv_rate(1.0) - (E - 1.0)).abs() < 1e-15);
    let f = FrameConfig::new(1.0, 0.0, 1e6, 1e-9).unwrap();
    let nats = f.bandwidth * rate(1e-3 * f.snr_per_watt());
    assert!((nats - 1e6 * 2f64.ln()).abs() < 1e-6);
}

#[test]
fn rate_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = rng.gen_range(0.0..20.0);
        assert!((rate(inv_rate(x)) - x).abs() < 1e-12);
    }
}

#[test]
fn quantization_examples() {
    let one = quantize_gamma_channel(2.0, 0.5, 5.0, 1).unwrap();
    assert_eq!(one.h(), &[5.0]);
    assert_eq!(one.p(), &[1.0]);
    let d = quantize_gamma_channel(1.0, 1.0, 5.0, 5).unwrap();
    assert_eq!(d.h(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    let simpson = {
        let n = 10_000;
        let h = 1.0 / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * (-(i as f64 * h)).exp()
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    assert!((d.p()[0] - simpson).abs() < 1e-12);
    assert!((d.p()[0] - 0.63212).abs() < 1e-5);
}

#[test]
fn quantization_sums_to_one() {
    for &(x, t, n) in &[(0.5, 5.0, 5), (1.0, 5.0, 3), (2.0, 3.0, 8), (4.0, 5.0, 5), (8.0, 2.0, 12)] {
        let d = quantize_gamma_channel(x, 1.0 / x, t, n).unwrap();
        assert!((d.p().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn channel_tails_are_ordered() {
    let d = quantize_gamma_channel(2.0, 0.5, 5.0, 6).unwrap();
    assert_eq!(d.q()[0], 1.0);
    assert!(d.q().windows(2).all(|w| w[0] >= w[1]));
    assert!(d.h().windows(2).all(|w| w[0] < w[1]));
    assert_eq!(d.s().len(), d.len() + 1);
    assert_eq!(*d.s().last().unwrap(), 0.0);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(BatteryParams::new(-1.0, V_B, 1.0, 0.0).is_err());
    assert!(BatteryParams::new(1.0, 0.0, 1.0, 0.0).is_err());
    assert!(BatteryParams::new(1.0, V_B, 1.0, 2.0).is_err());
    assert!(ChannelDist::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
    assert!(ChannelDist::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    assert!(ChannelDist::new(vec![0.0], vec![1.0]).is_err());
    assert!(FrameConfig::new(0.0, 0.0, 1.0, 1.0).is_err());
    assert!(FrameConfig::new(1.0, -1.0, 1.0, 1.0).is_err());
    assert!(quantize_gamma_channel(1.0, 1.0, 5.0, 0).is_err());
}

proptest! {
    #[test]
    fn losses_are_concave(r in 0.0f64..20.0, a in 0.0f64..0.225, b in 0.0f64..0.225, t in 0.0f64..1.0) {
        let bat = battery(r, 1.0);
        let (a, b) = (a * 0.999 * bat.peak().min(1.0) / 0.225, b * 0.999 * bat.peak().min(1.0) / 0.225);
        let m = t * a + (1.0 - t) * b;
        prop_assert!(bat.f_c(m) >= t * bat.f_c(a) + (1.0 - t) * bat.f_c(b) - 1e-12);
        prop_assert!(bat.f_d(m) >= t * bat.f_d(a) + (1.0 - t) * bat.f_d(b) - 1e-12);
        prop_assert!(bat.f_c(a) <= a && bat.f_d(a) <= a);
    }

    #[test]
    fn losses_grow_with_resistance(r in 0.0f64..20.0, dr in 0.0f64..5.0, v in 0.0f64..1.0) {
        let (lo, hi) = (battery(r, 1.0), battery(r + dr, 1.0));
        prop_assert!(hi.f_c(v) <= lo.f_c(v));
        prop_assert!(hi.f_d(v) <= lo.f_d(v));
    }
}
