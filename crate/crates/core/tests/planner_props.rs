use cubemu::planner::{candidates, check_limits, search, traffic, BlockPlan, HardwareModel};
use proptest::prelude::*;

#[test]
fn fill_fraction_high_in_explored_region() {
    let hw = HardwareModel::default();
    let cap = hw.l1_half_capacity() as f64;
    let region: Vec<BlockPlan> = candidates(&hw)
        .into_iter()
        .filter(|p| {
            let ratio = p.b_n as f64 / p.b_m as f64;
            (0.5..=2.0).contains(&ratio) && cap / (p.b_m * p.b_k) as f64 >= 16.0
        })
        .collect();
    assert!(!region.is_empty());
    let low: Vec<String> = region.iter().filter(|p| p.f < 0.92).map(|p| format!("{p}: f = {:.4}", p.f)).collect();
    assert!(low.is_empty(), "{} of {} shapes below 0.92, first {:#?}", low.len(), region.len(), &low[..low.len().min(5)]);
}

#[test]
fn plan_176_64_176_is_feasible_at_defaults() {
    let hw = HardwareModel::default();
    assert!(check_limits(&hw, 176, 64, 176).is_empty());
    assert_eq!(BlockPlan::new(&hw, 176, 64, 176).unwrap().n_fused, 21);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn searched_plans_are_valid_and_minimal(m in 16usize..3000, k in 16usize..3000, n in 16usize..3000) {
        let hw = HardwareModel::default();
        let best = search(&hw, m, k, n).unwrap();
        let p = best.plan;
        prop_assert!(p.f > 0.0 && p.f <= 1.0);
        prop_assert!(p.n_fused >= 1);
        prop_assert!(check_limits(&hw, p.b_m, p.b_k, p.b_n).is_empty());
        prop_assert!((p.n_fused * p.b_m * p.b_k + 2 * p.b_k * p.b_n) as u64 <= hw.l1_half_capacity());
        let t = &best.traffic;
        prop_assert_eq!(t.total, t.a_read + t.b_read + t.c_readwrite);
        let reference = BlockPlan::new(&hw, 176, 64, 176).unwrap();
        prop_assert!(t.total <= traffic(&hw, m, k, n, &reference).unwrap().total);
    }

    #[test]
    fn every_candidate_fits(l1_kib in 64u64..2048, n_core in 1u64..64) {
        let hw = HardwareModel { l1_bytes: l1_kib * 1024, n_core, ..HardwareModel::default() };
        for p in candidates(&hw) {
            prop_assert!((p.n_fused * p.b_m * p.b_k + 2 * p.b_k * p.b_n) as u64 <= hw.l1_half_capacity());
            prop_assert!(p.f > 0.0 && p.f <= 1.0);
        }
    }
}
