//! SGCM matrix files: magic `SGCM`, version `u32 = 1`, dtype `u8`
//! (0 = f32, 1 = f64, 2 = f16), `rows: u64`, `cols: u64`, then the row-major
//! payload. All integers and elements are little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::halffp::Half;
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"SGCM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
    F16 = 2,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::F16 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    F32(Matrix<f32>),
    F64(Matrix<f64>),
    F16(Matrix<Half>),
}

impl AnyMatrix {
    pub fn dtype(&self) -> Dtype {
        match self {
            AnyMatrix::F32(_) => Dtype::F32,
            AnyMatrix::F64(_) => Dtype::F64,
            AnyMatrix::F16(_) => Dtype::F16,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            AnyMatrix::F32(m) => m.shape(),
            AnyMatrix::F64(m) => m.shape(),
            AnyMatrix::F16(m) => m.shape(),
        }
    }

    pub fn into_f32(self) -> Result<Matrix<f32>> {
        match self {
            AnyMatrix::F32(m) => Ok(m),
            other => Err(Error::Format {
                offset: 8,
                msg: format!("expected an f32 matrix, found {:?}", other.dtype()),
            }),
        }
    }
}

pub fn write<W: Write>(w: &mut W, m: &AnyMatrix) -> io::Result<()> {
    let (rows, cols) = m.shape();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[m.dtype() as u8])?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    match m {
        AnyMatrix::F32(m) => m.as_slice().iter().try_for_each(|v| w.write_all(&v.to_le_bytes())),
        AnyMatrix::F64(m) => m.as_slice().iter().try_for_each(|v| w.write_all(&v.to_le_bytes())),
        AnyMatrix::F16(m) => m.as_slice().iter().try_for_each(|v| w.write_all(&v.to_bits().to_le_bytes())),
    }
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let mut filled = 0;
        while filled < N {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: self.offset + filled as u64,
                        msg: format!("file ends inside {what}"),
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += N as u64;
        Ok(buf)
    }
}

pub fn read<R: Read>(r: R) -> Result<AnyMatrix> {
    let mut c = Cursor { inner: r, offset: 0 };
    if &c.take::<4>("magic")? != MAGIC {
        return Err(Error::Format { offset: 0, msg: "bad magic, expected SGCM".into() });
    }
    let version = u32::from_le_bytes(c.take("version")?);
    if version != VERSION {
        return Err(Error::Format { offset: 4, msg: format!("unsupported version {version}") });
    }
    let dtype = match c.take::<1>("dtype")?[0] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        2 => Dtype::F16,
        d => return Err(Error::Format { offset: 8, msg: format!("unknown dtype {d}") }),
    };
    let rows = u64::from_le_bytes(c.take("rows")?);
    let cols = u64::from_le_bytes(c.take("cols")?);
    if rows == 0 || cols == 0 {
        return Err(Error::Format { offset: 9, msg: format!("empty shape {rows}x{cols}") });
    }
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(dtype.width() as u64).is_some_and(|b| b < (1 << 40)))
        .ok_or_else(|| Error::Format { offset: 9, msg: format!("shape {rows}x{cols} too large") })?
        as usize;
    let (rows, cols) = (rows as usize, cols as usize);

    let nonfinite = |off: u64, idx: usize| Error::Format {
        offset: off,
        msg: format!("non-finite element at ({}, {})", idx / cols, idx % cols),
    };
    let m = match dtype {
        Dtype::F32 => {
            let mut v = Vec::with_capacity(count);
            for i in 0..count {
                let off = c.offset;
                let x = f32::from_le_bytes(c.take("payload")?);
                if !x.is_finite() {
                    return Err(nonfinite(off, i));
                }
                v.push(x);
            }
            AnyMatrix::F32(Matrix::from_vec(rows, cols, v)?)
        }
        Dtype::F64 => {
            let mut v = Vec::with_capacity(count);
            for i in 0..count {
                let off = c.offset;
                let x = f64::from_le_bytes(c.take("payload")?);
                if !x.is_finite() {
                    return Err(nonfinite(off, i));
                }
                v.push(x);
            }
            AnyMatrix::F64(Matrix::from_vec(rows, cols, v)?)
        }
        Dtype::F16 => {
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                v.push(Half::from_bits(u16::from_le_bytes(c.take("payload")?)));
            }
            AnyMatrix::F16(Matrix::from_vec(rows, cols, v)?)
        }
    };
    let mut extra = [0u8; 1];
    if c.inner.read(&mut extra)? != 0 {
        return Err(Error::Format { offset: c.offset, msg: "trailing bytes after payload".into() });
    }
    Ok(m)
}

pub fn load(path: &Path) -> Result<AnyMatrix> {
    read(BufReader::new(File::open(path)?))
}

pub fn save(path: &Path, m: &AnyMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, m)?;
    w.flush()?;
    Ok(())
}
