//! GEMM engines on the modeled matrix unit, whose contract is: binary16
//! operands, exact products, binary32 round-to-nearest accumulation in
//! ascending `l`.

mod blocked;
mod kernel;
mod report;
mod sample;

use std::fmt;
use std::str::FromStr;

pub use blocked::sgemm_cube_blocked;
pub use report::{error_norms, relative_error, ErrorNorms, ErrorReport};
pub use sample::{generate_matrix, generate_pair, SampleSpec, SAMPLE_EXP_RANGE};

use crate::error::{Error, Result};
use crate::halffp::Half;
use crate::matrix::{check_inner, Matrix};
use crate::split::{pow2, split_matrix_with, SplitPolicy};

/// How the three split products are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeOrder {
    /// One accumulator per output position takes all three products at each
    /// step of `l`.
    Elementwise,
    /// The three product matrices are formed in full, then summed with the
    /// two scaled residual terms first.
    Termwise,
}

/// `c_accum + ah * bh` under the matrix-unit contract.
pub fn cube_mma(ah: &Matrix<Half>, bh: &Matrix<Half>, c_accum: &Matrix<f32>) -> Result<Matrix<f32>> {
    check_inner(ah.shape(), bh.shape())?;
    if c_accum.shape() != (ah.rows(), bh.cols()) {
        return Err(Error::Dimension(format!(
            "accumulator is {}x{}, product is {}x{}",
            c_accum.rows(),
            c_accum.cols(),
            ah.rows(),
            bh.cols()
        )));
    }
    let a = widen(ah.as_slice());
    let b = widen(bh.as_slice());
    let mut c = c_accum.clone();
    kernel::gemm_acc(&a, &b, c.as_mut_slice(), ah.cols(), bh.cols());
    Ok(c)
}

fn widen(h: &[Half]) -> Vec<f32> {
    h.iter().map(|v| v.to_f32()).collect()
}

fn product(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0f32; m * n];
    kernel::gemm_acc(a, b, &mut c, k, n);
    debug_assert_eq!(a.len(), m * k);
    c
}

/// Half-precision baseline: both operands rounded to binary16 once.
pub fn hgemm(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f32>> {
    check_inner(a.shape(), b.shape())?;
    let ah: Vec<f32> = a.as_slice().iter().map(|&x| Half::from_f32(x).to_f32()).collect();
    let bh: Vec<f32> = b.as_slice().iter().map(|&x| Half::from_f32(x).to_f32()).collect();
    Matrix::from_vec(a.rows(), b.cols(), product(&ah, &bh, a.rows(), a.cols(), b.cols()))
}

/// Plain binary32 multiply-accumulate in ascending `l`.
pub fn sgemm_f32_reference(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f32>> {
    check_inner(a.shape(), b.shape())?;
    Matrix::from_vec(a.rows(), b.cols(), product(a.as_slice(), b.as_slice(), a.rows(), a.cols(), b.cols()))
}

/// binary64 multiply-accumulate of the exactly widened inputs.
pub fn dgemm_oracle(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f64>> {
    check_inner(a.shape(), b.shape())?;
    let a64 = a.to_f64();
    let b64 = b.to_f64();
    let mut c = vec![0f64; a.rows() * b.cols()];
    kernel::gemm_acc(a64.as_slice(), b64.as_slice(), &mut c, a.cols(), b.cols());
    Matrix::from_vec(a.rows(), b.cols(), c)
}

/// Widened high parts and scaled residuals of an operand.
pub(crate) struct Widened {
    pub high: Vec<f32>,
    pub low: Vec<f32>,
}

pub(crate) fn split_widened(m: &Matrix<f32>, sb: i32) -> Result<Widened> {
    let s = split_matrix_with(m, sb, SplitPolicy::Permissive)?;
    Ok(Widened { high: widen(s.high.as_slice()), low: widen(s.low_scaled.as_slice()) })
}

/// The three product matrices of the split, unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeTerms {
    /// `A_high * B_high`.
    pub t1: Matrix<f32>,
    /// `R_A * B_high`, still amplified by `2^sb`.
    pub t2: Matrix<f32>,
    /// `A_high * R_B`, still amplified by `2^sb`.
    pub t3: Matrix<f32>,
    pub sb: i32,
}

impl CubeTerms {
    /// `(t2 * 2^-sb + t3 * 2^-sb) + t1`.
    pub fn combine(&self) -> Matrix<f32> {
        let data = combine_terms(self.t1.as_slice(), self.t2.as_slice(), self.t3.as_slice(), pow2(-self.sb));
        Matrix::from_vec(self.t1.rows(), self.t1.cols(), data).expect("shape preserved")
    }
}

pub(crate) fn combine_terms(t1: &[f32], t2: &[f32], t3: &[f32], scale: f32) -> Vec<f32> {
    t1.iter()
        .zip(t2)
        .zip(t3)
        .map(|((&p1, &p2), &p3)| (p2 * scale + p3 * scale) + p1)
        .collect()
}

pub fn cube_terms(a: &Matrix<f32>, b: &Matrix<f32>, sb: i32) -> Result<CubeTerms> {
    check_inner(a.shape(), b.shape())?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let sa = split_widened(a, sb)?;
    let sbm = split_widened(b, sb)?;
    let mk = |v| Matrix::from_vec(m, n, v);
    Ok(CubeTerms {
        t1: mk(product(&sa.high, &sbm.high, m, k, n))?,
        t2: mk(product(&sa.low, &sbm.high, m, k, n))?,
        t3: mk(product(&sa.high, &sbm.low, m, k, n))?,
        sb,
    })
}

/// Single-precision GEMM from three half-precision products.
pub fn sgemm_cube(a: &Matrix<f32>, b: &Matrix<f32>, sb: i32, order: CubeOrder) -> Result<Matrix<f32>> {
    match order {
        CubeOrder::Termwise => Ok(cube_terms(a, b, sb)?.combine()),
        CubeOrder::Elementwise => {
            check_inner(a.shape(), b.shape())?;
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            let sa = split_widened(a, sb)?;
            let sbm = split_widened(b, sb)?;
            let mut c = vec![0f32; m * n];
            kernel::elementwise_acc(&sa.high, &sa.low, &sbm.high, &sbm.low, pow2(-sb), &mut c, k, n);
            Matrix::from_vec(m, n, c)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GemmMethod {
    Hgemm,
    CubeElementwise { sb: i32 },
    CubeTermwise { sb: i32 },
    F32Reference,
    OracleF64,
}

impl GemmMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            GemmMethod::Hgemm => "hgemm",
            GemmMethod::CubeElementwise { .. } => "cube_elementwise",
            GemmMethod::CubeTermwise { .. } => "cube_termwise",
            GemmMethod::F32Reference => "f32_reference",
            GemmMethod::OracleF64 => "oracle_f64",
        }
    }

    pub fn sb(&self) -> Option<i32> {
        match *self {
            GemmMethod::CubeElementwise { sb } | GemmMethod::CubeTermwise { sb } => Some(sb),
            _ => None,
        }
    }

    /// Parses a tag; cube methods take `sb`.
    pub fn from_tag(tag: &str, sb: i32) -> Result<Self> {
        Ok(match tag {
            "hgemm" => GemmMethod::Hgemm,
            "cube_elementwise" => GemmMethod::CubeElementwise { sb },
            "cube_termwise" => GemmMethod::CubeTermwise { sb },
            "f32_reference" => GemmMethod::F32Reference,
            "oracle_f64" | "oracle" => GemmMethod::OracleF64,
            other => return Err(Error::Domain(format!("unknown GEMM method '{other}'"))),
        })
    }

    /// Result widened to binary64.
    pub fn run(&self, a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f64>> {
        let c = match *self {
            GemmMethod::Hgemm => hgemm(a, b)?,
            GemmMethod::CubeElementwise { sb } => sgemm_cube(a, b, sb, CubeOrder::Elementwise)?,
            GemmMethod::CubeTermwise { sb } => sgemm_cube(a, b, sb, CubeOrder::Termwise)?,
            GemmMethod::F32Reference => sgemm_f32_reference(a, b)?,
            GemmMethod::OracleF64 => return dgemm_oracle(a, b),
        };
        Ok(c.to_f64())
    }
}

impl fmt::Display for GemmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sb() {
            Some(sb) => write!(f, "{}(sb={sb})", self.tag()),
            None => f.write_str(self.tag()),
        }
    }
}

impl FromStr for CubeOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elementwise" => Ok(CubeOrder::Elementwise),
            "termwise" => Ok(CubeOrder::Termwise),
            other => Err(Error::Domain(format!("unknown accumulation order '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f32]) -> Matrix<f32> {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    fn ints(rows: usize, cols: usize) -> Matrix<f32> {
        Matrix::from_fn(rows, cols, |i, j| ((i * 7 + j * 3) % 17) as f32 - 8.0).unwrap()
    }

    #[test]
    fn cube_identity_and_exact_product() {
        let bh = ints(2, 3).map(|&x| Half::from_f32(x));
        let eye = Matrix::identity(2).unwrap().map(|&x| Half::from_f32(x));
        let c = cube_mma(&eye, &bh, &Matrix::zeros(2, 3).unwrap()).unwrap();
        assert_eq!(c, bh.to_f32());
        let h = Matrix::from_vec(1, 1, vec![Half::from_f32(1.5)]).unwrap();
        assert_eq!(cube_mma(&h, &h, &Matrix::zeros(1, 1).unwrap()).unwrap().get(0, 0), 2.25);
        assert!(cube_mma(&h, &eye, &Matrix::zeros(1, 2).unwrap()).is_err());
        assert!(cube_mma(&eye, &h, &Matrix::zeros(2, 1).unwrap()).is_err());
    }

    #[test]
    fn cube_accumulates_in_binary32_from_the_seed() {
        // 1 + 2^-24 + 2^-24: each add rounds back to 1 in binary32
        let tiny = Half::from_f32(2f32.powi(-12));
        let a = Matrix::from_vec(1, 2, vec![tiny, tiny]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![tiny, tiny]).unwrap();
        let c = cube_mma(&a, &b, &m(1, 1, &[1.0])).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        let c = cube_mma(&a, &b, &m(1, 1, &[0.0])).unwrap();
        assert_eq!(c.get(0, 0), 2f32.powi(-23));
    }

    #[test]
    fn hgemm_examples() {
        let b = ints(4, 5);
        assert_eq!(hgemm(&Matrix::identity(4).unwrap(), &b).unwrap(), b);
        let c = hgemm(&m(1, 1, &[1.0 + 2f32.powi(-23)]), &m(1, 1, &[1.0])).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
    }

    #[test]
    fn cube_recovers_residual() {
        let a = m(1, 1, &[1.0 + 2f32.powi(-23)]);
        let one = m(1, 1, &[1.0]);
        for order in [CubeOrder::Termwise, CubeOrder::Elementwise] {
            assert_eq!(sgemm_cube(&a, &one, 12, order).unwrap().get(0, 0), 1.0 + 2f32.powi(-23));
        }
        let t = cube_terms(&a, &one, 12).unwrap();
        assert_eq!(t.t1.get(0, 0), 1.0);
        assert_eq!(t.t2.get(0, 0), 2f32.powi(-11));
        assert_eq!(t.t3.get(0, 0), 0.0);
    }

    #[test]
    fn cube_identity_is_exact() {
        let b = ints(4, 6);
        let eye = Matrix::identity(4).unwrap();
        for order in [CubeOrder::Termwise, CubeOrder::Elementwise] {
            assert_eq!(sgemm_cube(&eye, &b, 12, order).unwrap(), b);
        }
    }

    #[test]
    fn reference_and_oracle() {
        let b = ints(3, 3);
        assert_eq!(sgemm_f32_reference(&Matrix::identity(3).unwrap(), &b).unwrap(), b);
        let x = 1.0 + 2f32.powi(-20);
        let c = sgemm_f32_reference(&m(1, 1, &[x]), &m(1, 1, &[x])).unwrap();
        assert_eq!(c.get(0, 0), x * x);
        let ones = Matrix::filled(2, 2, 1.0f32).unwrap();
        assert_eq!(dgemm_oracle(&ones, &ones).unwrap().as_slice(), &[2.0; 4]);
        assert!(dgemm_oracle(&ones, &ints(3, 1)).is_err());
    }

    #[test]
    fn method_tags_round_trip() {
        for meth in [
            GemmMethod::Hgemm,
            GemmMethod::CubeElementwise { sb: 12 },
            GemmMethod::CubeTermwise { sb: 12 },
            GemmMethod::F32Reference,
            GemmMethod::OracleF64,
        ] {
            assert_eq!(GemmMethod::from_tag(meth.tag(), 12).unwrap(), meth);
        }
        assert!(GemmMethod::from_tag("dgemm", 0).is_err());
    }

    #[test]
    fn split_errors_propagate() {
        let big = m(1, 1, &[70000.0]);
        assert!(sgemm_cube(&big, &m(1, 1, &[1.0]), 12, CubeOrder::Termwise).is_err());
        let tiny = m(1, 1, &[1e-30]);
        assert!(sgemm_cube(&tiny, &m(1, 1, &[1.0]), 12, CubeOrder::Termwise).is_ok());
    }
}
