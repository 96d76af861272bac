mod common;

use common::{assert_bitwise, group_major_reference, median};
use cubemu::gemm::{
    cube_terms, dgemm_oracle, generate_pair, hgemm, relative_error, sgemm_cube, sgemm_cube_blocked, sgemm_f32_reference,
    CubeOrder, SampleSpec,
};
use cubemu::planner::BlockPlan;
use cubemu::Matrix;
use proptest::prelude::*;

fn plan(b_m: usize, b_k: usize, b_n: usize, n_fused: usize) -> BlockPlan {
    BlockPlan { b_m, b_k, b_n, n_fused, f: 0.5 }
}

fn termwise_err(m: usize, k: usize, n: usize, e: i32, sb: i32, seed: u64) -> f64 {
    let (a, b) = generate_pair(m, k, n, SampleSpec::new(e, false, seed)).unwrap();
    let c = sgemm_cube(&a, &b, sb, CubeOrder::Termwise).unwrap();
    relative_error(&dgemm_oracle(&a, &b).unwrap(), &c).unwrap()
}

fn median_termwise(e: i32, sb: i32) -> f64 {
    median((1..=5).map(|s| termwise_err(64, 512, 64, e, sb, s)).collect())
}

#[test]
fn blocked_matches_group_major_reference_at_256() {
    let (a, b) = generate_pair(256, 256, 256, SampleSpec::new(0, true, 11)).unwrap();
    let p = plan(64, 64, 64, 2);
    for order in [CubeOrder::Termwise, CubeOrder::Elementwise] {
        let got = sgemm_cube_blocked(&a, &b, 12, &p, order).unwrap();
        assert_bitwise(&got, &group_major_reference(&a, &b, 12, &p, order));
    }
}

const LOW_EXPONENTS: [i32; 4] = [-12, -10, -8, -6];

#[test]
fn scaling_is_necessary_at_low_exponents() {
    let failures: Vec<String> = LOW_EXPONENTS
        .iter()
        .map(|&e| (e, median_termwise(e, 12), median_termwise(e, 0)))
        .filter(|&(_, scaled, unscaled)| scaled > 0.1 * unscaled)
        .map(|(e, scaled, unscaled)| format!("e={e}: sb=12 {scaled:e}, sb=0 {unscaled:e}"))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn half_scaling_is_worse_than_full() {
    let failures: Vec<String> = LOW_EXPONENTS
        .iter()
        .map(|&e| (e, median_termwise(e, 12), median_termwise(e, 6)))
        .filter(|&(_, full, half)| half <= full)
        .map(|(e, full, half)| format!("e={e}: sb=6 {half:e}, sb=12 {full:e}"))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn bit_identical_across_thread_counts() {
    let (a, b) = generate_pair(96, 200, 80, SampleSpec::new(-4, true, 5)).unwrap();
    let run = |threads: usize| -> Vec<Matrix<f32>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            vec![
                hgemm(&a, &b).unwrap(),
                sgemm_f32_reference(&a, &b).unwrap(),
                sgemm_cube(&a, &b, 12, CubeOrder::Termwise).unwrap(),
                sgemm_cube(&a, &b, 12, CubeOrder::Elementwise).unwrap(),
                sgemm_cube_blocked(&a, &b, 12, &plan(32, 16, 48, 3), CubeOrder::Termwise).unwrap(),
                sgemm_cube_blocked(&a, &b, 12, &plan(16, 32, 16, 2), CubeOrder::Elementwise).unwrap(),
            ]
        })
    };
    let (one, four) = (run(1), run(4));
    for (x, y) in one.iter().zip(&four) {
        assert_bitwise(x, y);
    }
    assert_eq!(dgemm_oracle(&a, &b).unwrap(), dgemm_oracle(&a, &b).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blocked_matches_reference_and_unblocked(
        m in 1usize..80, k in 1usize..150, n in 1usize..80,
        bm in 1usize..4, bk in 1usize..4, bn in 1usize..4, nf in 1usize..4,
        e in -8i32..4, signed: bool, seed in 0u64..1000,
        termwise: bool,
    ) {
        let order = if termwise { CubeOrder::Termwise } else { CubeOrder::Elementwise };
        let (a, b) = generate_pair(m, k, n, SampleSpec::new(e, signed, seed)).unwrap();
        let p = plan(16 * bm, 16 * bk, 16 * bn, nf);
        let got = sgemm_cube_blocked(&a, &b, 12, &p, order).unwrap();
        assert_bitwise(&got, &group_major_reference(&a, &b, 12, &p, order));
        let flat = sgemm_cube(&a, &b, 12, order).unwrap();
        let diff: f64 = got.as_slice().iter().zip(flat.as_slice()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
        let norm: f64 = flat.as_slice().iter().map(|&y| (y as f64).powi(2)).sum();
        prop_assert!(diff.sqrt() <= 2f64.powi(-20) * norm.sqrt());
    }

    #[test]
    fn residual_terms_are_dominated(m in 1usize..24, k in 1usize..64, n in 1usize..24, e in -10i32..6, seed: u64) {
        let (a, b) = generate_pair(m, k, n, SampleSpec::new(e, true, seed)).unwrap();
        let t = cube_terms(&a, &b, 12).unwrap();
        let s = 2f64.powi(-12);
        // product magnitudes stay below 2^(2e)
        let envelope = 2f64.powi(2 * e - 10) * k as f64;
        for idx in 0..m * n {
            let t1 = t.t1.as_slice()[idx].abs() as f64;
            prop_assert!(t.t2.as_slice()[idx].abs() as f64 * s <= t1 + envelope);
            prop_assert!(t.t3.as_slice()[idx].abs() as f64 * s <= t1 + envelope);
        }
    }
}
