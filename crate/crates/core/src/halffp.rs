//! IEEE-754 binary16 values and exact/RN conversions to and from binary32
//! and binary64.
//!
//! All conversions work on bit patterns with integer arithmetic, so the
//! results do not depend on the host's float-conversion instructions.

use std::fmt;

/// Field widths and biases of the two formats involved in the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatParams {
    /// Stored mantissa bits of binary32 (`l_M`).
    pub fp32_mantissa_bits: u32,
    /// Stored mantissa bits of binary16 (`l_M_high`).
    pub fp16_mantissa_bits: u32,
    /// Exponent bias of binary16 (`b_low`).
    pub fp16_bias: i32,
    pub fp32_bias: i32,
}

pub const FORMAT: FormatParams = FormatParams {
    fp32_mantissa_bits: 23,
    fp16_mantissa_bits: 10,
    fp16_bias: 15,
    fp32_bias: 127,
};

/// Offset exponent of the smallest binary16 subnormal, 2^-24.
pub const MIN_SUBNORMAL_EXP: i32 = -24;
/// Offset exponent of the smallest normal binary16, 2^-14.
pub const MIN_NORMAL_EXP: i32 = -14;
/// Offset exponent of the largest finite binary16.
pub const MAX_EXP: i32 = 15;

const SIGN_MASK: u16 = 0x8000;
const EXP_MASK: u16 = 0x7C00;
const MAN_MASK: u16 = 0x03FF;

/// A binary16 value stored as its bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(transparent)]
pub struct Half(u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfClass {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    Nan,
}

impl Half {
    pub const ZERO: Half = Half(0x0000);
    pub const NEG_ZERO: Half = Half(0x8000);
    pub const ONE: Half = Half(0x3C00);
    pub const MAX: Half = Half(0x7BFF);
    pub const MIN_POSITIVE_SUBNORMAL: Half = Half(0x0001);
    pub const MIN_POSITIVE_NORMAL: Half = Half(0x0400);
    pub const INFINITY: Half = Half(0x7C00);
    pub const NEG_INFINITY: Half = Half(0xFC00);
    /// The canonical quiet NaN every NaN input maps to.
    pub const NAN: Half = Half(0x7E00);

    pub const fn from_bits(bits: u16) -> Half {
        Half(bits)
    }

    pub const fn to_bits(self) -> u16 {
        self.0
    }

    /// Sign bit (S').
    pub const fn sign(self) -> u16 {
        self.0 >> 15
    }

    /// Biased 5-bit exponent field (E').
    pub const fn exponent(self) -> u16 {
        (self.0 & EXP_MASK) >> 10
    }

    /// 10-bit stored fraction.
    pub const fn mantissa(self) -> u16 {
        self.0 & MAN_MASK
    }

    pub const fn is_sign_negative(self) -> bool {
        self.0 & SIGN_MASK != 0
    }

    pub const fn is_finite(self) -> bool {
        self.0 & EXP_MASK != EXP_MASK
    }

    pub const fn is_zero(self) -> bool {
        self.0 & !SIGN_MASK == 0
    }

    pub const fn classify(self) -> HalfClass {
        match (self.exponent(), self.mantissa()) {
            (0, 0) => HalfClass::Zero,
            (0, _) => HalfClass::Subnormal,
            (31, 0) => HalfClass::Infinite,
            (31, _) => HalfClass::Nan,
            _ => HalfClass::Normal,
        }
    }

    /// Round-to-nearest-even narrowing from binary32.
    pub fn from_f32(x: f32) -> Half {
        let bits = x.to_bits();
        let sign = ((bits >> 16) & 0x8000) as u16;
        let exp = (bits >> 23) & 0xFF;
        let man = bits & 0x007F_FFFF;
        match exp {
            0xFF if man != 0 => Half::NAN,
            0xFF => Half(sign | EXP_MASK),
            0 if man == 0 => Half(sign),
            0 => Half(round_to_half(sign, man as u64, -149)),
            _ => Half(round_to_half(sign, (man | 0x0080_0000) as u64, exp as i32 - 150)),
        }
    }

    /// Round-to-nearest-even narrowing from binary64 (single rounding).
    pub fn from_f64(x: f64) -> Half {
        let bits = x.to_bits();
        let sign = ((bits >> 48) & 0x8000) as u16;
        let exp = ((bits >> 52) & 0x7FF) as i32;
        let man = bits & 0x000F_FFFF_FFFF_FFFF;
        match exp {
            0x7FF if man != 0 => Half::NAN,
            0x7FF => Half(sign | EXP_MASK),
            0 if man == 0 => Half(sign),
            0 => Half(round_to_half(sign, man, -1074)),
            _ => Half(round_to_half(sign, man | (1 << 52), exp - 1075)),
        }
    }

    /// Exact widening to binary32.
    pub fn to_f32(self) -> f32 {
        let sign = ((self.0 & SIGN_MASK) as u32) << 16;
        let exp = self.exponent() as u32;
        let man = self.mantissa() as u32;
        let bits = match (exp, man) {
            (0, 0) => sign,
            (0, _) => {
                // value = man * 2^-24, with msb at bit p
                let p = 31 - man.leading_zeros();
                let f32_exp = p + 127 - 24;
                let f32_man = (man << (23 - p)) & 0x007F_FFFF;
                sign | (f32_exp << 23) | f32_man
            }
            (31, 0) => sign | 0x7F80_0000,
            (31, _) => 0x7FC0_0000,
            _ => sign | ((exp + 112) << 23) | (man << 13),
        };
        f32::from_bits(bits)
    }

    /// Exact widening to binary64.
    pub fn to_f64(self) -> f64 {
        f64::from(self.to_f32())
    }
}

/// Rounds `sig * 2^exp` (sig > 0) to binary16 with ties to even and
/// returns the bit pattern including `sign`.
fn round_to_half(sign: u16, sig: u64, exp: i32) -> u16 {
    debug_assert!(sig != 0);
    let msb = 63 - sig.leading_zeros() as i32;
    let unbiased = msb + exp;
    // Exponent of the unit in the last place of the binary16 result.
    let mut quantum = (unbiased - 10).max(MIN_SUBNORMAL_EXP);
    let shift = quantum - exp;

    let mut m: u64 = if shift <= 0 {
        sig << (-shift)
    } else if shift > 64 {
        // sig < 2^64 <= half an ulp
        0
    } else {
        let wide = sig as u128;
        let kept = (wide >> shift) as u64;
        let rem = wide & ((1u128 << shift) - 1);
        let half = 1u128 << (shift - 1);
        if rem > half || (rem == half && kept & 1 == 1) {
            kept + 1
        } else {
            kept
        }
    };

    if m == 0 {
        return sign;
    }
    if m >= 1 << 11 {
        // Rounding carried into a new binade.
        m >>= 1;
        quantum += 1;
    }
    if m < 1 << 10 {
        return sign | m as u16;
    }
    let biased = quantum + 10 + FORMAT.fp16_bias;
    if biased >= 31 {
        return sign | EXP_MASK;
    }
    sign | ((biased as u16) << 10) | (m as u16 & MAN_MASK)
}

impl From<f32> for Half {
    fn from(x: f32) -> Half {
        Half::from_f32(x)
    }
}

impl From<Half> for f32 {
    fn from(h: Half) -> f32 {
        h.to_f32()
    }
}

impl From<Half> for f64 {
    fn from(h: Half) -> f64 {
        h.to_f64()
    }
}

impl fmt::Debug for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Half({:#06x} = {:e})", self.0, self.to_f32())
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

/// Offset (unbiased) exponent of a finite nonzero binary32, subnormals
/// included: `floor(log2(|x|))`.
pub fn offset_exponent_f32(x: f32) -> i32 {
    let bits = x.to_bits() & 0x7FFF_FFFF;
    debug_assert!(bits != 0 && bits < 0x7F80_0000);
    let exp = (bits >> 23) as i32;
    if exp == 0 {
        let p = 31 - bits.leading_zeros() as i32;
        p - 149
    } else {
        exp - 127
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn narrowing_examples() {
        assert_eq!(Half::from_f32(1.0).to_bits(), 0x3C00);
        // 1 + 2^-11 is a tie between 1.0 and 1 + 2^-10; the even one wins.
        assert_eq!(Half::from_f32(f32::from_bits(0x3F80_1000)).to_bits(), 0x3C00);
        // 2^-25 is halfway between 0 and 2^-24.
        assert_eq!(Half::from_f32(2f32.powi(-25)).to_bits(), 0x0000);
        assert_eq!(Half::from_f32(-(2f32.powi(-25))).to_bits(), 0x8000);
        assert_eq!(Half::from_f32(65520.0), Half::INFINITY);
        assert_eq!(Half::from_f32(65519.996), Half::MAX);
        assert_eq!(Half::from_f32(-1e9), Half::NEG_INFINITY);
        assert_eq!(Half::from_f32(f32::NAN), Half::NAN);
        assert_eq!(Half::from_f32(-0.0), Half::NEG_ZERO);
        // just above the 2^-25 tie rounds up to the smallest subnormal
        assert_eq!(Half::from_f32(f32::from_bits(0x3300_0001)).to_bits(), 0x0001);
        // f32 subnormals are far below half an ulp
        assert_eq!(Half::from_f32(f32::from_bits(1)).to_bits(), 0);
    }

    #[test]
    fn widening_examples() {
        assert_eq!(Half::ONE.to_f32(), 1.0);
        assert_eq!(Half::from_bits(0x0001).to_f32(), 2f32.powi(-24));
        assert_eq!(Half::from_bits(0xFBFF).to_f32(), -65504.0);
        assert_eq!(Half::from_bits(0x03FF).to_f32(), 1023.0 * 2f32.powi(-24));
        assert_eq!(Half::NEG_ZERO.to_f32().to_bits(), (-0.0f32).to_bits());
        assert!(Half::NAN.to_f32().is_nan());
        assert_eq!(Half::NEG_INFINITY.to_f32(), f32::NEG_INFINITY);
    }

    #[test]
    fn classification() {
        assert_eq!(Half::from_bits(0x0000).classify(), HalfClass::Zero);
        assert_eq!(Half::from_bits(0x8000).classify(), HalfClass::Zero);
        assert_eq!(Half::from_bits(0x03FF).classify(), HalfClass::Subnormal);
        assert_eq!(Half::from_bits(0x0400).classify(), HalfClass::Normal);
        assert_eq!(Half::from_bits(0x7C00).classify(), HalfClass::Infinite);
        assert_eq!(Half::from_bits(0x7C01).classify(), HalfClass::Nan);
    }

    #[test]
    fn field_accessors() {
        let h = Half::from_bits(0xBC01);
        assert_eq!(h.sign(), 1);
        assert_eq!(h.exponent(), 15);
        assert_eq!(h.mantissa(), 1);
    }

    #[test]
    fn exhaustive_round_trip() {
        for bits in 0..=u16::MAX {
            let h = Half::from_bits(bits);
            if !h.is_finite() {
                continue;
            }
            assert_eq!(Half::from_f32(h.to_f32()), h, "bits {bits:#06x}");
            assert_eq!(Half::from_f64(h.to_f64()), h, "bits {bits:#06x}");
        }
    }

    #[test]
    fn f64_single_rounding() {
        // 1 + 2^-11 + 2^-40 is above the tie in f64 but would collapse onto
        // the tie if narrowed through f32 first.
        let x = 1.0 + 2f64.powi(-11) + 2f64.powi(-40);
        assert_eq!(Half::from_f64(x).to_bits(), 0x3C01);
        assert_eq!(Half::from_f32(x as f32).to_bits(), 0x3C00);
    }

    #[test]
    fn offset_exponents() {
        assert_eq!(offset_exponent_f32(1.0), 0);
        assert_eq!(offset_exponent_f32(-0.75), -1);
        assert_eq!(offset_exponent_f32(f32::from_bits(1)), -149);
        assert_eq!(offset_exponent_f32(65504.0), 15);
    }

    proptest! {
        #[test]
        fn narrowing_is_monotone(a in -7.0e4f32..7.0e4, b in -7.0e4f32..7.0e4) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(Half::from_f32(lo).to_f32() <= Half::from_f32(hi).to_f32());
        }

        #[test]
        fn narrowing_is_odd(bits in any::<u32>()) {
            let x = f32::from_bits(bits);
            prop_assume!(!x.is_nan());
            prop_assert_eq!(Half::from_f32(-x).to_bits(), Half::from_f32(x).to_bits() ^ 0x8000);
        }
    }
}
