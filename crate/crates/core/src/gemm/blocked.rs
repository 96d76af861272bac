//! Blocked execution in the matrix unit's loop order: row stripes of `b_m`,
//! groups of `n_fused` resident A blocks along `k`, column blocks of `b_n`.
//! Each group accumulates a fresh partial tile that is then added to the
//! running sum of C, so the per-element order is group-major.

use rayon::prelude::*;

use super::{combine_terms, split_widened, CubeOrder};
use crate::error::{Error, Result};
use crate::matrix::{check_inner, Matrix};
use crate::planner::{BlockPlan, BLOCK_ALIGN};
use crate::split::pow2;

struct Dims {
    k: usize,
    n: usize,
}

/// Sum over one group and one column block of `x[i,l] * y[l,j]`.
fn term_group(x: &[f32], y: &[f32], d: &Dims, rows: (usize, usize), ls: (usize, usize), js: (usize, usize), part: &mut [f32]) {
    let w = js.1 - js.0;
    for l in ls.0..ls.1 {
        let y_row = &y[l * d.n + js.0..l * d.n + js.1];
        for (r, i) in (rows.0..rows.1).enumerate() {
            let xv = x[i * d.k + l];
            for (p, &yv) in part[r * w..(r + 1) * w].iter_mut().zip(y_row) {
                *p += xv * yv;
            }
        }
    }
}

struct Operands<'a> {
    ah: &'a [f32],
    ra: &'a [f32],
    bh: &'a [f32],
    rb: &'a [f32],
    scale: f32,
}

fn elementwise_group(o: &Operands, d: &Dims, rows: (usize, usize), ls: (usize, usize), js: (usize, usize), part: &mut [f32]) {
    let w = js.1 - js.0;
    for l in ls.0..ls.1 {
        let bh_row = &o.bh[l * d.n + js.0..l * d.n + js.1];
        let rb_row = &o.rb[l * d.n + js.0..l * d.n + js.1];
        for (r, i) in (rows.0..rows.1).enumerate() {
            let ahv = o.ah[i * d.k + l];
            let rav = o.ra[i * d.k + l];
            for ((p, &bhv), &rbv) in part[r * w..(r + 1) * w].iter_mut().zip(bh_row).zip(rb_row) {
                let mut acc = *p;
                acc += (rav * bhv) * o.scale;
                acc += (ahv * rbv) * o.scale;
                acc += ahv * bhv;
                *p = acc;
            }
        }
    }
}

/// Runs the blocked loop nest; `group` fills a zeroed partial tile.
fn blocked<F>(m: usize, d: &Dims, plan: &BlockPlan, group: F) -> Vec<f32>
where
    F: Fn((usize, usize), (usize, usize), (usize, usize), &mut [f32]) + Sync,
{
    let n = d.n;
    let group_len = plan.b_k * plan.n_fused;
    let mut c = vec![0f32; m * n];
    c.par_chunks_mut(plan.b_m * n).enumerate().for_each(|(s, csum)| {
        let i0 = s * plan.b_m;
        let rows = (i0, i0 + csum.len() / n);
        let mut part = vec![0f32; plan.b_m * plan.b_n];
        for g0 in (0..d.k).step_by(group_len) {
            let ls = (g0, (g0 + group_len).min(d.k));
            for j0 in (0..n).step_by(plan.b_n) {
                let js = (j0, (j0 + plan.b_n).min(n));
                let w = js.1 - js.0;
                let tile = &mut part[..(rows.1 - rows.0) * w];
                tile.fill(0.0);
                group(rows, ls, js, tile);
                for r in 0..rows.1 - rows.0 {
                    let dst = &mut csum[r * n + js.0..r * n + js.1];
                    for (cv, &pv) in dst.iter_mut().zip(&tile[r * w..(r + 1) * w]) {
                        *cv += pv;
                    }
                }
            }
        }
    });
    c
}

fn check_plan(plan: &BlockPlan) -> Result<()> {
    for (name, v) in [("b_m", plan.b_m), ("b_k", plan.b_k), ("b_n", plan.b_n)] {
        if v == 0 || v % BLOCK_ALIGN != 0 {
            return Err(Error::Plan(format!("{name} = {v} is not a positive multiple of {BLOCK_ALIGN}")));
        }
    }
    if plan.n_fused == 0 {
        return Err(Error::Plan("n_fused must be at least 1".into()));
    }
    Ok(())
}

/// `sgemm_cube` executed block by block. Dimensions need not be multiples
/// of the block sizes; edge blocks are simply smaller.
pub fn sgemm_cube_blocked(
    a: &Matrix<f32>,
    b: &Matrix<f32>,
    sb: i32,
    plan: &BlockPlan,
    order: CubeOrder,
) -> Result<Matrix<f32>> {
    check_inner(a.shape(), b.shape())?;
    check_plan(plan)?;
    let m = a.rows();
    let d = Dims { k: a.cols(), n: b.cols() };
    let sa = split_widened(a, sb)?;
    let sbm = split_widened(b, sb)?;
    let scale = pow2(-sb);
    let c = match order {
        CubeOrder::Termwise => {
            let term = |x: &[f32], y: &[f32]| blocked(m, &d, plan, |r, l, j, p| term_group(x, y, &d, r, l, j, p));
            let t1 = term(&sa.high, &sbm.high);
            let t2 = term(&sa.low, &sbm.high);
            let t3 = term(&sa.high, &sbm.low);
            combine_terms(&t1, &t2, &t3, scale)
        }
        CubeOrder::Elementwise => {
            let o = Operands { ah: &sa.high, ra: &sa.low, bh: &sbm.high, rb: &sbm.low, scale };
            blocked(m, &d, plan, |r, l, j, p| elementwise_group(&o, &d, r, l, j, p))
        }
    };
    Matrix::from_vec(m, d.n, c)
}
