//! Dense kernels. Every output element accumulates its products in
//! ascending `l`, one rounding per multiply and per add, so results do not
//! depend on tiling or thread count.

use std::ops::{Add, Mul};

use rayon::prelude::*;

/// Rows of C per parallel task.
const STRIPE: usize = 8;
/// Columns of C kept hot per pass over `l`.
const COL_CHUNK: usize = 256;

pub(crate) trait Scalar: Copy + Send + Sync + Add<Output = Self> + Mul<Output = Self> {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// `c[i,j] += sum_l a[i,l] * b[l,j]` with the product rounded before each add.
pub(crate) fn gemm_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], k: usize, n: usize) {
    debug_assert_eq!(a.len() / k, c.len() / n);
    c.par_chunks_mut(STRIPE * n).enumerate().for_each(|(s, c_stripe)| {
        let row0 = s * STRIPE;
        let rows = c_stripe.len() / n;
        for j0 in (0..n).step_by(COL_CHUNK) {
            let j1 = (j0 + COL_CHUNK).min(n);
            for l in 0..k {
                let b_row = &b[l * n + j0..l * n + j1];
                for r in 0..rows {
                    let a_il = a[(row0 + r) * k + l];
                    let c_row = &mut c_stripe[r * n + j0..r * n + j1];
                    for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                        *cv = *cv + a_il * bv;
                    }
                }
            }
        }
    });
}

/// Per-position combination of the three split products: for every `l`,
/// `acc += (ra*bh)*s; acc += (ah*rb)*s; acc += ah*bh`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn elementwise_acc(
    ah: &[f32],
    ra: &[f32],
    bh: &[f32],
    rb: &[f32],
    scale: f32,
    c: &mut [f32],
    k: usize,
    n: usize,
) {
    c.par_chunks_mut(STRIPE * n).enumerate().for_each(|(s, c_stripe)| {
        let row0 = s * STRIPE;
        let rows = c_stripe.len() / n;
        for j0 in (0..n).step_by(COL_CHUNK) {
            let j1 = (j0 + COL_CHUNK).min(n);
            for l in 0..k {
                let bh_row = &bh[l * n + j0..l * n + j1];
                let rb_row = &rb[l * n + j0..l * n + j1];
                for r in 0..rows {
                    let ah_il = ah[(row0 + r) * k + l];
                    let ra_il = ra[(row0 + r) * k + l];
                    let c_row = &mut c_stripe[r * n + j0..r * n + j1];
                    for ((cv, &bhv), &rbv) in c_row.iter_mut().zip(bh_row).zip(rb_row) {
                        let mut acc = *cv;
                        acc += (ra_il * bhv) * scale;
                        acc += (ah_il * rbv) * scale;
                        acc += ah_il * bhv;
                        *cv = acc;
                    }
                }
            }
        }
    });
}
