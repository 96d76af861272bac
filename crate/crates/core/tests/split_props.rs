use cubemu::split::{split_scalar, sb_bounds, DEFAULT_SB};
use cubemu::Error;
use proptest::prelude::*;

fn value(e: i32, mant: u32, neg: bool) -> f32 {
    let x = (1.0 + mant as f32 / (1u32 << 23) as f32) * 2f32.powi(e);
    if neg {
        -x
    } else {
        x
    }
}

fn err(x: f32, sb: i32) -> f64 {
    let (p, _) = split_scalar(x, sb).unwrap();
    (x as f64 - p.high.to_f64() - p.low_scaled.to_f64() * 2f64.powi(-sb)).abs()
}

#[test]
fn unscaled_split_loses_bits_below_quarter() {
    let mut violations = 0;
    let mut seed = cubemu::rng::SplitMix64::new(9);
    for _ in 0..100_000 {
        let e = seed.range_i64(-12, -3) as i32;
        let x = value(e, (seed.next_u64() >> 41) as u32, false);
        if err(x, 0) > 2f64.powi(e - 22) {
            violations += 1;
        }
    }
    assert!(violations > 0);
}

#[test]
fn scaled_residual_overflows_at_top_exponent() {
    // 2^15 * (1 + 2^-11 - 2^-23): residual just under half an ulp of the top binade
    let x = f32::from_bits(0x4700_0FFF);
    assert!(matches!(split_scalar(x, 13), Err(Error::Overflow(_))));
}

#[test]
fn recommended_scale_is_in_bounds_for_full_range() {
    let b = sb_bounds(-14, 15).unwrap();
    assert!(b.contains(DEFAULT_SB));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn scaled_split_keeps_22_bits(e in -12i32..-2, mant in 0u32..(1 << 23), neg: bool) {
        let x = value(e, mant, neg);
        prop_assert!(err(x, 12) <= 2f64.powi(e - 22));
    }

    #[test]
    fn residual_subtraction_is_exact(e in -14i32..=15, mant in 0u32..(1 << 23), neg: bool) {
        let x = value(e, mant, neg);
        prop_assume!(x.abs() < 65520.0);
        let high = cubemu::Half::from_f32(x).to_f32();
        prop_assert_eq!((x - high) as f64, x as f64 - high as f64);
    }

    #[test]
    fn no_overflow_up_to_sb_12_below_top_binade(e in -14i32..=14, mant in 0u32..(1 << 23), sb in -2i32..=12) {
        prop_assert!(split_scalar(value(e, mant, false), sb).is_ok());
    }

    #[test]
    fn no_overflow_up_to_sb_11_in_top_binade(mant in 0u32..(1 << 23), sb in -2i32..=11) {
        let x = value(15, mant, false);
        prop_assume!(x < 65520.0);
        prop_assert!(split_scalar(x, sb).is_ok());
    }
}
