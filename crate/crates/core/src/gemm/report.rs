use super::GemmMethod;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub err: f64,
    pub l2_true: f64,
    pub l2_diff: f64,
}

/// `||C_true - C_calc||_2 / ||C_true||_2` over all elements, in binary64.
pub fn error_norms(c_true: &Matrix<f64>, c_calc: &Matrix<f64>) -> Result<ErrorNorms> {
    if c_true.shape() != c_calc.shape() {
        return Err(Error::Dimension(format!(
            "reference is {}x{}, result is {}x{}",
            c_true.rows(),
            c_true.cols(),
            c_calc.rows(),
            c_calc.cols()
        )));
    }
    let (mut sq_true, mut sq_diff) = (0f64, 0f64);
    for (&t, &c) in c_true.as_slice().iter().zip(c_calc.as_slice()) {
        sq_true += t * t;
        sq_diff += (t - c) * (t - c);
    }
    if sq_true == 0.0 {
        return Err(Error::Degenerate);
    }
    let (l2_true, l2_diff) = (sq_true.sqrt(), sq_diff.sqrt());
    Ok(ErrorNorms { err: l2_diff / l2_true, l2_true, l2_diff })
}

pub fn relative_error(c_true: &Matrix<f64>, c_calc: &Matrix<f32>) -> Result<f64> {
    Ok(error_norms(c_true, &c_calc.to_f64())?.err)
}

/// One method's error against the binary64 oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: GemmMethod,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Sampling exponent; `None` for file inputs.
    pub e_offset: Option<i32>,
    pub signed: Option<bool>,
    pub seed: Option<u64>,
    pub norms: ErrorNorms,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "method,m,k,n,e_offset,signed,sb,seed,err";

    pub fn csv_row(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{:e}",
            self.method.tag(),
            self.m,
            self.k,
            self.n,
            opt(self.e_offset),
            opt(self.signed),
            opt(self.method.sb()),
            opt(self.seed),
            self.norms.err
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let t = Matrix::from_vec(1, 2, vec![1.0, 0.5]).unwrap();
        assert_eq!(relative_error(&t, &Matrix::from_vec(1, 2, vec![1.0f32, 0.5]).unwrap()).unwrap(), 0.0);
        let one = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let c = Matrix::from_vec(1, 1, vec![1.0f32 + 2f32.powi(-20)]).unwrap();
        assert_eq!(relative_error(&one, &c).unwrap(), 2f64.powi(-20));
        let zero = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        assert!(matches!(relative_error(&zero, &c), Err(Error::Degenerate)));
        assert!(relative_error(&t, &c).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let r = ErrorReport {
            method: GemmMethod::CubeTermwise { sb: 12 },
            m: 2,
            k: 3,
            n: 4,
            e_offset: Some(-6),
            signed: Some(true),
            seed: Some(7),
            norms: ErrorNorms { err: 0.25, l2_true: 4.0, l2_diff: 1.0 },
        };
        assert_eq!(r.csv_row(), "cube_termwise,2,3,4,-6,true,12,7,2.5e-1");
        let r = ErrorReport { method: GemmMethod::Hgemm, e_offset: None, signed: None, seed: None, ..r };
        assert_eq!(r.csv_row(), "hgemm,2,3,4,,,,,2.5e-1");
    }
}
