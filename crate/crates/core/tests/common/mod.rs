//! Reference implementations shared by the integration tests. They are
//! written independently of the library code they check.

#![allow(dead_code)]

use cubemu::gemm::CubeOrder;
use cubemu::planner::BlockPlan;
use cubemu::split::{split_matrix_with, SplitPolicy};
use cubemu::Matrix;

/// binary16 round-to-nearest-even of `x`, computed in binary64 from the two
/// representable neighbours. Returns the rounded value (possibly infinite).
pub fn half_rn_oracle(x: f32) -> f64 {
    let v = x as f64;
    if v.is_nan() || v == 0.0 || v.is_infinite() {
        return v;
    }
    let a = v.abs();
    let e = a.log2().floor() as i32;
    // log2 can be off by one near powers of two
    let e = if 2f64.powi(e) > a { e - 1 } else if 2f64.powi(e + 1) <= a { e + 1 } else { e };
    let q = 2f64.powi(e.max(-14) - 10);
    let lo = (a / q).floor() * q;
    let hi = lo + q;
    let pick = match (a - lo).partial_cmp(&(hi - a)).unwrap() {
        std::cmp::Ordering::Less => lo,
        std::cmp::Ordering::Greater => hi,
        std::cmp::Ordering::Equal => {
            if ((lo / q) as u64).is_multiple_of(2) {
                lo
            } else {
                hi
            }
        }
    };
    let r = if pick >= 65536.0 { f64::INFINITY } else { pick };
    r.copysign(v)
}

/// Element-by-element blocked reference: the `k` sum is split into groups of
/// `b_k * n_fused`, each group summed from zero, then added to the total.
pub fn group_major_reference(a: &Matrix<f32>, b: &Matrix<f32>, sb: i32, plan: &BlockPlan, order: CubeOrder) -> Matrix<f32> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let sa = split_matrix_with(a, sb, SplitPolicy::Permissive).unwrap();
    let sbm = split_matrix_with(b, sb, SplitPolicy::Permissive).unwrap();
    let ah = |i: usize, l: usize| sa.high.get(i, l).to_f32();
    let ra = |i: usize, l: usize| sa.low_scaled.get(i, l).to_f32();
    let bh = |l: usize, j: usize| sbm.high.get(l, j).to_f32();
    let rb = |l: usize, j: usize| sbm.low_scaled.get(l, j).to_f32();
    let s = 2f32.powi(-sb);
    let group = plan.b_k * plan.n_fused;

    let grouped = |step: &dyn Fn(f32, usize) -> f32| -> f32 {
        let mut total = 0f32;
        let mut g0 = 0;
        while g0 < k {
            let mut part = 0f32;
            for l in g0..(g0 + group).min(k) {
                part = step(part, l);
            }
            total += part;
            g0 += group;
        }
        total
    };

    Matrix::from_fn(m, n, |i, j| match order {
        CubeOrder::Termwise => {
            let t1 = grouped(&|p, l| p + ah(i, l) * bh(l, j));
            let t2 = grouped(&|p, l| p + ra(i, l) * bh(l, j));
            let t3 = grouped(&|p, l| p + ah(i, l) * rb(l, j));
            (t2 * s + t3 * s) + t1
        }
        CubeOrder::Elementwise => grouped(&|p, l| {
            let mut acc = p;
            acc += (ra(i, l) * bh(l, j)) * s;
            acc += (ah(i, l) * rb(l, j)) * s;
            acc + ah(i, l) * bh(l, j)
        }),
    })
    .unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Bitwise equality of two f32 matrices, reporting the first difference.
pub fn assert_bitwise(x: &Matrix<f32>, y: &Matrix<f32>) {
    assert_eq!(x.shape(), y.shape());
    for (idx, (p, q)) in x.as_slice().iter().zip(y.as_slice()).enumerate() {
        assert_eq!(p.to_bits(), q.to_bits(), "element {idx}: {p:e} vs {q:e}");
    }
}
