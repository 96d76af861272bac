use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Uniform sampling over `[-2^e, 2^e]` (signed) or `[0, 2^e]`, rounded to
/// binary32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleSpec {
    pub e_offset: i32,
    pub signed: bool,
    pub seed: u64,
}

/// Offset exponents for which every sample is a finite binary32.
pub const SAMPLE_EXP_RANGE: (i32, i32) = (-125, 126);

impl SampleSpec {
    pub fn new(e_offset: i32, signed: bool, seed: u64) -> Self {
        SampleSpec { e_offset, signed, seed }
    }

    /// Value of draw `index`: the top 53 bits of the SplitMix64 output as a
    /// fixed-point fraction of `2^e`, exact in binary64, rounded once to
    /// binary32.
    pub fn value(&self, index: u64) -> f32 {
        let u = (rng::draw(self.seed, index) >> 11) as i64;
        let (int, shift) = if self.signed {
            (u - (1 << 52), self.e_offset - 52)
        } else {
            (u, self.e_offset - 53)
        };
        (int as f64 * 2f64.powi(shift)) as f32
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = SAMPLE_EXP_RANGE;
        if !(lo..=hi).contains(&self.e_offset) {
            return Err(Error::Domain(format!(
                "sampling exponent {} outside [{lo}, {hi}]",
                self.e_offset
            )));
        }
        Ok(())
    }

    /// Same distribution on an independent stream.
    pub fn substream(&self, stream: u64) -> Self {
        SampleSpec { seed: rng::derive_seed(self.seed, stream), ..*self }
    }
}

pub fn generate_matrix(rows: usize, cols: usize, spec: SampleSpec) -> Result<Matrix<f32>> {
    spec.check()?;
    let data = (0..(rows * cols) as u64).map(|i| spec.value(i)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// `A` (m x k) and `B` (k x n) on independent sub-streams of `spec.seed`.
pub fn generate_pair(m: usize, k: usize, n: usize, spec: SampleSpec) -> Result<(Matrix<f32>, Matrix<f32>)> {
    Ok((generate_matrix(m, k, spec.substream(0))?, generate_matrix(k, n, spec.substream(1))?))
}
