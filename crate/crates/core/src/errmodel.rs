//! Closed-form model of how often the residual of a binary32 to binary16
//! split underflows, and how many significant bits survive the split.
//!
//! With a uniformly random 23-bit mantissa, the residual below the 10-bit
//! high mantissa has `N` leading zeros below the rounding bit with dyadic
//! probability. Underflow of the residual then depends only on `N` and the
//! input's offset exponent.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halffp::{self, Half, MIN_SUBNORMAL_EXP};
use crate::rng;

/// binary32 mantissa width.
const L_M: i32 = 23;
/// binary16 mantissa width.
const L_M_HIGH: i32 = 10;
/// Largest leading-zero count; beyond it the residual is zero.
pub const N_MAX: i32 = L_M - L_M_HIGH - 1;
pub const N_MIN: i32 = -1;

/// Exact probability `num / 2^log2_den`, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: u64,
    log2_den: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, log2_den: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, log2_den: 0 };

    pub fn new(num: u64, log2_den: u32) -> Self {
        assert!(log2_den < 64, "denominator 2^{log2_den} too large");
        Dyadic { num, log2_den }.reduced()
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic::new(1, k)
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn log2_denominator(&self) -> u32 {
        self.log2_den
    }

    fn reduced(mut self) -> Self {
        if self.num == 0 {
            return Dyadic::ZERO;
        }
        let tz = self.num.trailing_zeros().min(self.log2_den);
        self.num >>= tz;
        self.log2_den -= tz;
        self
    }

    pub fn checked_add(self, rhs: Dyadic) -> Option<Dyadic> {
        let d = self.log2_den.max(rhs.log2_den);
        let a = self.num.checked_shl(d - self.log2_den).filter(|v| v >> (d - self.log2_den) == self.num)?;
        let b = rhs.num.checked_shl(d - rhs.log2_den).filter(|v| v >> (d - rhs.log2_den) == rhs.num)?;
        Some(Dyadic { num: a.checked_add(b)?, log2_den: d }.reduced())
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.log2_den as i32)
    }
}

impl std::ops::Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        self.checked_add(rhs).expect("dyadic overflow")
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.log2_den)
    }
}

/// How the high part was produced from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Rounded toward zero (`T`).
    Truncation,
    /// Rounded away from zero (`R`).
    Rounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventProb {
    pub n: i32,
    pub event: Event,
    pub p: Dyadic,
}

/// Probability that the residual has `n` leading zeros under `event`.
pub fn p_event_exact(n: i32, event: Event) -> Dyadic {
    match n {
        n if n < N_MIN => Dyadic::ZERO,
        N_MIN => Dyadic::pow2_neg((L_M - L_M_HIGH + 1) as u32),
        n if n < N_MAX => Dyadic::pow2_neg((n + 2) as u32),
        N_MAX => match event {
            Event::Truncation => Dyadic::pow2_neg((L_M - L_M_HIGH) as u32),
            Event::Rounding => Dyadic::ZERO,
        },
        _ => Dyadic::ZERO,
    }
}

pub fn p_event(n: i32, event: Event) -> f64 {
    p_event_exact(n, event).to_f64()
}

/// Every `(n, event)` pair with its probability.
pub fn event_table() -> Vec<EventProb> {
    (N_MIN..=N_MAX)
        .flat_map(|n| {
            [Event::Truncation, Event::Rounding]
                .into_iter()
                .map(move |event| EventProb { n, event, p: p_event_exact(n, event) })
        })
        .collect()
}

/// Smallest leading-zero count at which the unscaled residual of an input
/// with offset exponent `e` becomes subnormal (`gradual`) or flushes to zero.
pub fn underflow_threshold(e_offset: i32, include_gradual: bool) -> i64 {
    let bias = i64::from(halffp::FORMAT.fp16_bias);
    let e = i64::from(e_offset);
    if include_gradual {
        e - i64::from(L_M_HIGH) + bias - 2
    } else {
        e + bias - 2
    }
}

pub fn p_underflow_exact(e_offset: i32, include_gradual: bool) -> Dyadic {
    let lo = underflow_threshold(e_offset, include_gradual).max(i64::from(N_MIN));
    if lo > i64::from(N_MAX) {
        return Dyadic::ZERO;
    }
    (lo as i32..=N_MAX)
        .flat_map(|n| [p_event_exact(n, Event::Truncation), p_event_exact(n, Event::Rounding)])
        .sum()
}

/// Probability that the unscaled residual underflows, fully or (with
/// `include_gradual`) into the binary16 subnormal range.
pub fn p_underflow(e_offset: i32, include_gradual: bool) -> f64 {
    p_underflow_exact(e_offset, include_gradual).to_f64()
}

/// Worst-case retained significand bits of the split, over every residual
/// pattern, for inputs with offset exponent `e_offset` and scaling `sb`.
///
/// A pattern with `n` leading zeros keeps all 22 bits while the leading bit
/// of its scaled residual stays at or above 2^-24. Once it drops below, the
/// residual is lost and only the high part's 11 bits plus the `n` known-zero
/// bits under it remain. The high part itself always survives.
pub fn precision_bits(e_offset: i32, sb: i32) -> u32 {
    let high = L_M_HIGH + 1;
    let full = 2 * high;
    (N_MIN..=N_MAX)
        .map(|n| {
            let e_low = e_offset + sb - (L_M_HIGH + 2) - n;
            if e_low >= MIN_SUBNORMAL_EXP {
                full
            } else {
                (high + n).clamp(high, full)
            }
        })
        .min()
        .unwrap_or(full) as u32
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionCurve {
    pub sb: i32,
    pub points: Vec<(i32, u32)>,
}

pub fn precision_curve(e_lo: i32, e_hi: i32, sb: i32) -> PrecisionCurve {
    PrecisionCurve { sb, points: (e_lo..=e_hi).map(|e| (e, precision_bits(e, sb))).collect() }
}

/// One row of the combined underflow / precision table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub e_offset: i32,
    pub p_underflow: f64,
    pub p_underflow_gradual: f64,
    /// Retained bits per requested scaling exponent, in request order.
    pub bits: Vec<u32>,
}

pub fn curve(e_lo: i32, e_hi: i32, sbs: &[i32]) -> Result<Vec<CurveRow>> {
    if e_lo > e_hi {
        return Err(Error::Domain(format!("empty exponent range [{e_lo}, {e_hi}]")));
    }
    if let Some(sb) = sbs.iter().find(|sb| !(-24..=24).contains(*sb)) {
        return Err(Error::Domain(format!("scaling exponent {sb} outside [-24, 24]")));
    }
    Ok((e_lo..=e_hi)
        .map(|e| CurveRow {
            e_offset: e,
            p_underflow: p_underflow(e, false),
            p_underflow_gradual: p_underflow(e, true),
            bits: sbs.iter().map(|&sb| precision_bits(e, sb)).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McUnderflow {
    pub samples: u64,
    /// Residuals that land in the binary16 subnormal range or below.
    pub gradual: u64,
    /// Residuals that flush to zero.
    pub full: u64,
}

impl McUnderflow {
    pub fn p(&self, include_gradual: bool) -> f64 {
        let hits = if include_gradual { self.gradual } else { self.full };
        hits as f64 / self.samples as f64
    }
}

pub const MIN_MC_SAMPLES: u64 = 10_000;

/// Empirical underflow rates of the unscaled split for inputs with offset
/// exponent `e_offset` and a uniformly random mantissa.
///
/// A residual is classified by its own offset exponent, with an exactly
/// zero residual counted as the one-bit pattern below the last residual bit.
pub fn monte_carlo_underflow(e_offset: i32, samples: u64, seed: u64) -> Result<McUnderflow> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_MC_SAMPLES} samples, got {samples}")));
    }
    if !(-126..=127).contains(&e_offset) {
        return Err(Error::Domain(format!("offset exponent {e_offset} outside binary32 normal range")));
    }
    let gradual_below = MIN_SUBNORMAL_EXP + L_M_HIGH;
    let full_below = MIN_SUBNORMAL_EXP;
    let exp_bits = ((e_offset + 127) as u32) << 23;
    let (gradual, full) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let man = (rng::draw(seed, i) >> 41) as u32;
            let x = f32::from_bits(exp_bits | man);
            let r = x - Half::from_f32(x).to_f32();
            let e_r = if r == 0.0 { e_offset - L_M - 1 } else { halffp::offset_exponent_f32(r) };
            (u64::from(e_r < gradual_below), u64::from(e_r < full_below))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(McUnderflow { samples, gradual, full })
}
