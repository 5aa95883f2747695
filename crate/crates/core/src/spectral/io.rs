//! `HQF1` field and `HQM1` matrix binary formats (little endian).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;

use super::field::Field;
use super::grid::GridSpec;
use crate::error::{LabError, Result};
use crate::scalar::Scalar;

const FIELD_MAGIC: &[u8; 4] = b"HQF1";
const MATRIX_MAGIC: &[u8; 4] = b"HQM1";

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn write_field<T: Scalar>(w: &mut impl Write, f: &Field<T>) -> Result<()> {
    let g = f.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.period().to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.re.f64().to_le_bytes())?;
        w.write_all(&v.im.f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<Field<f64>> {
    if &read_array::<4>(r)? != FIELD_MAGIC {
        return Err(LabError::Format("missing HQF1 magic".into()));
    }
    let dim = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let period = read_f64(r)?;
    let grid = GridSpec::new(dim, n, period)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        values.push(Complex::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(LabError::Format("trailing bytes after HQF1 payload".into()));
    }
    Field::new(grid, values)
}

pub fn save_field<T: Scalar>(path: impl AsRef<Path>, f: &Field<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field<f64>> {
    read_field(&mut BufReader::new(File::open(path)?))
}

pub fn write_matrix(w: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u32).to_le_bytes())?;
    w.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix(r: &mut impl Read) -> Result<DMatrix<f64>> {
    if &read_array::<4>(r)? != MATRIX_MAGIC {
        return Err(LabError::Format("missing HQM1 magic".into()));
    }
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(read_f64(r)?);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_matrix(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let g = GridSpec::plane(8, 1.5).unwrap();
        let f = Field::from_fn(g, |[x, y]| Complex::new(x.sin() * 1e-300, y.exp())).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 16 * 64);
        let back = read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let g = GridSpec::line(8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::<f64>::zeros(g)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field(&mut bad.as_slice()).is_err());
        assert!(read_field(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_fn(3, 2, |i, j| i as f64 - 0.25 * j as f64);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(&mut buf.as_slice()).unwrap(), m);
    }
}
