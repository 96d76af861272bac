//! High/low decomposition of binary32 values into two binary16 values.
//!
//! `x ~= high + low_scaled * 2^-sb`, where `high` is `x` rounded to binary16,
//! and `low_scaled` is the exact residual amplified by `2^sb` and rounded to
//! binary16. The amplification keeps the residual out of the binary16
//! subnormal range for small inputs; too much of it overflows the residual
//! for large inputs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halffp::{self, Half, MAX_EXP, MIN_NORMAL_EXP, MIN_SUBNORMAL_EXP};
use crate::matrix::Matrix;

pub const MIN_SB: i32 = -24;
pub const MAX_SB: i32 = 24;
/// Scaling exponent that is safe across the whole binary16 exponent range.
pub const DEFAULT_SB: i32 = 12;

/// Smallest magnitude that rounds to infinity in binary16.
const HALF_OVERFLOW: f32 = 65520.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPair {
    pub high: Half,
    pub low_scaled: Half,
    pub sb: i32,
}

impl SplitPair {
    /// `high + low_scaled * 2^-sb`, summed in binary32.
    pub fn reconstruct(&self) -> f32 {
        self.high.to_f32() + self.low_scaled.to_f32() * pow2(-self.sb)
    }

    /// Scaling factor `sf = 2^sb`.
    pub fn scale_factor(&self) -> f32 {
        pow2(self.sb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDiagnostics {
    /// Leading zeros `N` of the residual below the rounding bit of the high
    /// part; `-1` for the single-bit residual of a rounding tie, `None` when
    /// the residual is exactly zero.
    pub leading_zeros: Option<i32>,
    /// `R`: the high part was rounded away from zero.
    pub carry: bool,
    /// The residual has the opposite sign of the input.
    pub sign_flipped: bool,
}

/// What to do with nonzero inputs below the smallest binary16 subnormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Reject them: the two-part representation gives no accuracy guarantee
    /// there (the high part would need scaling as well).
    #[default]
    Strict,
    /// Split them anyway, as the GEMM engines do on sampled data.
    Permissive,
}

/// `2^e` as an exact binary32, for `|e| <= 126`.
pub(crate) fn pow2(e: i32) -> f32 {
    debug_assert!((-126..=127).contains(&e));
    f32::from_bits(((e + 127) as u32) << 23)
}

fn check_sb(sb: i32) -> Result<()> {
    if !(MIN_SB..=MAX_SB).contains(&sb) {
        return Err(Error::Domain(format!("scaling exponent {sb} outside [{MIN_SB}, {MAX_SB}]")));
    }
    Ok(())
}

/// Splits `x` with scaling exponent `sb`, rejecting inputs below 2^-24.
pub fn split_scalar(x: f32, sb: i32) -> Result<(SplitPair, SplitDiagnostics)> {
    split_scalar_with(x, sb, SplitPolicy::Strict)
}

pub fn split_scalar_with(
    x: f32,
    sb: i32,
    policy: SplitPolicy,
) -> Result<(SplitPair, SplitDiagnostics)> {
    check_sb(sb)?;
    let (pair, residual) = split_checked(x, sb, policy)?;
    Ok((pair, diagnostics(x, pair.high, residual)))
}

/// The split itself, with every domain check but no diagnostics.
fn split_checked(x: f32, sb: i32, policy: SplitPolicy) -> Result<(SplitPair, f32)> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite input {x}")));
    }
    let mag = x.abs();
    if mag >= HALF_OVERFLOW {
        return Err(Error::Domain(format!("{x} is outside the binary16 range")));
    }
    if policy == SplitPolicy::Strict && mag != 0.0 && mag < pow2(MIN_SUBNORMAL_EXP) {
        return Err(Error::Domain(format!(
            "{x:e} is below the binary16 subnormal threshold 2^-24"
        )));
    }

    let high = Half::from_f32(x);
    // Exact: x and high agree in every bit above the rounding position.
    let residual = x - high.to_f32();
    let low_scaled = Half::from_f32(residual * pow2(sb));
    if !low_scaled.is_finite() {
        return Err(Error::Overflow(format!(
            "residual {residual:e} of {x} scaled by 2^{sb} exceeds the binary16 range"
        )));
    }
    Ok((SplitPair { high, low_scaled, sb }, residual))
}

fn diagnostics(x: f32, high: Half, residual: f32) -> SplitDiagnostics {
    let carry = high.to_f32().abs() > x.abs();
    if residual == 0.0 {
        return SplitDiagnostics { leading_zeros: None, carry, sign_flipped: false };
    }
    // Unit in the last place of the binary16 grid around x.
    let quantum = (halffp::offset_exponent_f32(x) - 10).max(MIN_SUBNORMAL_EXP);
    let n = (quantum - 2) - halffp::offset_exponent_f32(residual);
    SplitDiagnostics {
        leading_zeros: Some(n),
        carry,
        sign_flipped: (residual < 0.0) != (x < 0.0),
    }
}

/// Element-wise split of a matrix with one shared scaling exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub high: Matrix<Half>,
    pub low_scaled: Matrix<Half>,
    pub sb: i32,
}

impl SplitMatrix {
    pub fn rows(&self) -> usize {
        self.high.rows()
    }

    pub fn cols(&self) -> usize {
        self.high.cols()
    }

    pub fn pair(&self, i: usize, j: usize) -> SplitPair {
        SplitPair { high: self.high.get(i, j), low_scaled: self.low_scaled.get(i, j), sb: self.sb }
    }

    pub fn reconstruct(&self) -> Matrix<f32> {
        let inv = pow2(-self.sb);
        let data = self
            .high
            .as_slice()
            .iter()
            .zip(self.low_scaled.as_slice())
            .map(|(h, l)| h.to_f32() + l.to_f32() * inv)
            .collect();
        Matrix::from_vec(self.rows(), self.cols(), data).expect("shape preserved")
    }
}

pub fn split_matrix(m: &Matrix<f32>, sb: i32) -> Result<SplitMatrix> {
    split_matrix_with(m, sb, SplitPolicy::Strict)
}

pub fn split_matrix_with(m: &Matrix<f32>, sb: i32, policy: SplitPolicy) -> Result<SplitMatrix> {
    check_sb(sb)?;
    let cols = m.cols();
    let pairs: Vec<(Half, Half)> = m
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(idx, &x)| {
            split_checked(x, sb, policy)
                .map(|(p, _)| (p.high, p.low_scaled))
                .map_err(|e| Error::AtElement { row: idx / cols, col: idx % cols, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let (high, low): (Vec<Half>, Vec<Half>) = pairs.into_iter().unzip();
    Ok(SplitMatrix {
        high: Matrix::from_vec(m.rows(), cols, high)?,
        low_scaled: Matrix::from_vec(m.rows(), cols, low)?,
        sb,
    })
}

/// Admissible scaling exponents `[lo, hi]`; may be empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbBounds {
    pub lo: i32,
    pub hi: i32,
}

impl SbBounds {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, sb: i32) -> bool {
        self.lo <= sb && sb <= self.hi
    }
}

/// Bounds on `sb` from the smallest and largest binary16 offset exponents of
/// the data. The lower bound keeps 22 bits for the smallest inputs, the upper
/// bound keeps the residual of the largest inputs below the binary16 maximum.
pub fn sb_bounds(e_min: i32, e_max: i32) -> Result<SbBounds> {
    if !(MIN_NORMAL_EXP..=MAX_EXP).contains(&e_min)
        || !(MIN_NORMAL_EXP..=MAX_EXP).contains(&e_max)
        || e_min > e_max
    {
        return Err(Error::Domain(format!(
            "offset exponents ({e_min}, {e_max}) must satisfy {MIN_NORMAL_EXP} <= e_min <= e_max <= {MAX_EXP}"
        )));
    }
    Ok(SbBounds { lo: MIN_SUBNORMAL_EXP + 22 - e_min, hi: MAX_EXP + 12 - e_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbChoice {
    pub sb: i32,
    /// The admissible interval was empty; `sb` protects the small end.
    pub best_effort: bool,
}

pub fn recommend_sb(e_min: i32, e_max: i32) -> Result<SbChoice> {
    let b = sb_bounds(e_min, e_max)?;
    if b.is_empty() {
        return Ok(SbChoice { sb: b.lo, best_effort: true });
    }
    Ok(SbChoice { sb: DEFAULT_SB.clamp(b.lo, b.hi), best_effort: false })
}

/// Range of binary16 offset exponents the high parts of `values` occupy,
/// clamped to the normal range. Zeros are ignored; `None` if all are zero.
pub fn fp16_exponent_range(values: &[f32]) -> Option<(i32, i32)> {
    values
        .iter()
        .filter(|x| **x != 0.0 && x.is_finite())
        .map(|&x| {
            let h = Half::from_f32(x).to_f32();
            if h == 0.0 || !h.is_finite() {
                if h == 0.0 { MIN_NORMAL_EXP } else { MAX_EXP }
            } else {
                halffp::offset_exponent_f32(h).clamp(MIN_NORMAL_EXP, MAX_EXP)
            }
        })
        .fold(None, |acc, e| match acc {
            None => Some((e, e)),
            Some((lo, hi)) => Some((lo.min(e), hi.max(e))),
        })
}
