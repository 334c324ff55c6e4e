//! Binary snapshots and CSV export of Fourier coefficients.
//!
//! Snapshot layout: `b"NLSF"`, version `u32`, `n` `u32`, `count` `u32`, then
//! `count * n` little-endian `(re, im)` `f64` pairs in FFT order.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::field::Field;
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NLSF";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, fields: &[Field]) -> Result<()> {
    let n = fields.first().map(|f| f.n()).unwrap_or(0);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    for f in fields {
        if f.n() != n {
            return Err(Error::GridMismatch(n, f.n()));
        }
        for c in f.coeffs() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Vec<Field>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("bad snapshot magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Io(format!("unsupported snapshot version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    let grid = Grid::new(n)?;
    let mut out = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            r.read_exact(&mut b)?;
            let im = f64::from_le_bytes(b);
            c.push(C64::new(re, im));
        }
        out.push(Field::from_coeffs(&grid, c));
    }
    Ok(out)
}

/// One row per mode, FFT order, header `k_re,k_im`.
pub fn coeffs_csv(f: &Field) -> String {
    let mut s = String::from("k_re,k_im\n");
    for c in f.coeffs() {
        s.push_str(&format!("{:.17e},{:.17e}\n", c.re, c.im));
    }
    s
}
