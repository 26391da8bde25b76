//! VNMT tensor containers and CSV fallbacks.
//!
//! Container layout, all little-endian:
//!
//! ```text
//! 0x56 0x4E 0x4D 0x54          magic "VNMT"
//! u16  version   (= 1)
//! u8   dtype     (0 = dense f32, 1 = packed V:N:M)
//! u8   ndim
//! u64  dims[ndim]
//! ...  payload
//! ```
//!
//! dtype 0 payload is the row-major f32 buffer. dtype 1 payload is
//! `u32 v, n, m, rows, cols` followed by A_n (f32), A_i1 (u8), A_i2 (u8).
//! Round trips are bit-exact for every finite f32 including negative zero.
//! CSV fallback for 2-D matrices: comma-separated decimal rows.

use crate::error::{Result, VnmError};
use crate::matrix::DenseMatrix;
use crate::packed::PackedVnm;
use crate::pattern::VnmPattern;
use std::fs;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"VNMT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_PACKED: u8 = 1;

/// A decoded dtype-0 container: 1-D or 2-D.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Vector(Vec<f32>),
    Matrix(DenseMatrix),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(VnmError::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32_slice(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>> {
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self, what: &'static str) -> Result<()> {
        if self.pos != self.buf.len() {
            // Trailing garbage means the dims and payload disagree.
            return Err(VnmError::DimOverflow(format!(
                "{what}: {} bytes of payload beyond declared dims",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn header(bytes: &mut Vec<u8>, dtype: u8, dims: &[u64]) {
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.push(dtype);
    bytes.push(dims.len() as u8);
    for &d in dims {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
}

fn parse_header<'a>(r: &mut Reader<'a>) -> Result<(u8, Vec<u64>)> {
    let magic = r.take(4, "header")?;
    if magic != MAGIC {
        return Err(VnmError::BadMagic);
    }
    let version = r.u16("header")?;
    if version != VERSION {
        return Err(VnmError::Unsupported(format!("version {version}")));
    }
    let dtype = r.u8("header")?;
    let ndim = r.u8("header")? as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.u64("header dims")?);
    }
    Ok((dtype, dims))
}

fn dim_to_usize(d: u64) -> Result<usize> {
    usize::try_from(d).map_err(|_| VnmError::DimOverflow(format!("dim {d}")))
}

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16 + m.values().len() * 4);
    header(&mut bytes, DTYPE_F32, &[m.rows() as u64, m.cols() as u64]);
    for v in m.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn encode_vector(v: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16 + v.len() * 4);
    header(&mut bytes, DTYPE_F32, &[v.len() as u64]);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    bytes
}

pub fn decode_tensor(buf: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(buf);
    let (dtype, dims) = parse_header(&mut r)?;
    if dtype != DTYPE_F32 {
        return Err(VnmError::Unsupported(format!(
            "dtype {dtype}, expected dense f32"
        )));
    }
    match dims.len() {
        1 => {
            let n = dim_to_usize(dims[0])?;
            let values = r.f32_slice(n, "vector payload")?;
            r.done("vector")?;
            Ok(Tensor::Vector(values))
        }
        2 => {
            let rows = dim_to_usize(dims[0])?;
            let cols = dim_to_usize(dims[1])?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| VnmError::DimOverflow(format!("{rows}x{cols}")))?;
            let values = r.f32_slice(n, "matrix payload")?;
            r.done("matrix")?;
            Ok(Tensor::Matrix(DenseMatrix::from_vec(rows, cols, values)?))
        }
        n => Err(VnmError::Unsupported(format!("ndim {n}, expected 1 or 2"))),
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    match decode_tensor(&fs::read(path)?)? {
        Tensor::Matrix(m) => Ok(m),
        Tensor::Vector(_) => Err(VnmError::Unsupported(
            "expected a 2-D tensor, found 1-D".into(),
        )),
    }
}

pub fn write_vector(path: &Path, v: &[f32]) -> Result<()> {
    fs::write(path, encode_vector(v))?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f32>> {
    match decode_tensor(&fs::read(path)?)? {
        Tensor::Vector(v) => Ok(v),
        Tensor::Matrix(_) => Err(VnmError::Unsupported(
            "expected a 1-D tensor, found 2-D".into(),
        )),
    }
}

pub fn encode_packed(p: &PackedVnm) -> Vec<u8> {
    let mut bytes = Vec::new();
    header(
        &mut bytes,
        DTYPE_PACKED,
        &[p.rows() as u64, p.cols() as u64],
    );
    for x in [
        p.pattern().v() as u32,
        p.pattern().n() as u32,
        p.pattern().m() as u32,
        p.rows() as u32,
        p.cols() as u32,
    ] {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    for v in p.a_n() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(p.a_i1());
    bytes.extend_from_slice(p.a_i2());
    bytes
}

pub fn decode_packed(buf: &[u8]) -> Result<PackedVnm> {
    let mut r = Reader::new(buf);
    let (dtype, dims) = parse_header(&mut r)?;
    if dtype != DTYPE_PACKED {
        return Err(VnmError::Unsupported(format!(
            "dtype {dtype}, expected packed"
        )));
    }
    if dims.len() != 2 {
        return Err(VnmError::Unsupported(format!(
            "ndim {}, expected 2 for packed",
            dims.len()
        )));
    }
    let v = r.u32("packed header")? as usize;
    let n = r.u32("packed header")? as usize;
    let m = r.u32("packed header")? as usize;
    let rows = r.u32("packed header")? as usize;
    let cols = r.u32("packed header")? as usize;
    if dims[0] != rows as u64 || dims[1] != cols as u64 {
        return Err(VnmError::DimOverflow(
            "packed dims disagree with container dims".into(),
        ));
    }
    if n != 2 {
        return Err(VnmError::InvalidPattern(format!("N must be 2, got {n}")));
    }
    let pattern = VnmPattern::new(v, m)?;
    if rows == 0 || cols == 0 || !rows.is_multiple_of(v) || !cols.is_multiple_of(m) {
        return Err(VnmError::NotDivisible { rows, cols, v, m });
    }
    let nnz_per_row = 2 * cols / m;
    let a_n = r.f32_slice(rows * nnz_per_row, "packed A_n")?;
    let a_i1 = r.take((rows / v) * (cols / m) * 4, "packed A_i1")?.to_vec();
    let a_i2 = r.take(rows * nnz_per_row, "packed A_i2")?.to_vec();
    r.done("packed")?;
    PackedVnm::from_parts(pattern, rows, cols, a_n, a_i1, a_i2)
}

pub fn write_packed(path: &Path, p: &PackedVnm) -> Result<()> {
    fs::write(path, encode_packed(p))?;
    Ok(())
}

pub fn read_packed(path: &Path) -> Result<PackedVnm> {
    decode_packed(&fs::read(path)?)
}

/// Parse a CSV matrix: one row per line, comma-separated decimals.
pub fn decode_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f32> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f32>()
                    .map_err(|_| VnmError::Csv(format!("line {}: bad number {tok:?}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(VnmError::Csv(format!(
                    "line {}: ragged row ({} vs {} columns)",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(VnmError::Csv("empty matrix".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    DenseMatrix::from_vec(r, c, rows.into_iter().flatten().collect())
}

pub fn encode_matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    decode_matrix_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, encode_matrix_csv(m))?;
    Ok(())
}

/// Read a matrix by extension: `.csv` falls back to the text format,
/// anything else is treated as a VNMT container.
pub fn read_matrix_auto(path: &Path) -> Result<DenseMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_matrix_csv(path),
        _ => read_matrix(path),
    }
}

/// Read a 1-D activation-norm vector: VNMT 1-D tensor, or a single CSV row.
pub fn read_vector_auto(path: &Path) -> Result<Vec<f32>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let m = read_matrix_csv(path)?;
            if m.rows() != 1 {
                return Err(VnmError::Csv(format!(
                    "expected a single CSV row, got {} rows",
                    m.rows()
                )));
            }
            Ok(m.values().to_vec())
        }
        _ => read_vector(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = DenseMatrix::from_vec(2, 3, vec![1.0, -2.5, 0.0, -0.0, 3.25, 1e-38]).unwrap();
        let decoded = match decode_tensor(&encode_matrix(&m)).unwrap() {
            Tensor::Matrix(m) => m,
            _ => panic!(),
        };
        for (a, b) in m.values().iter().zip(decoded.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // negative zero keeps its sign bit
        assert_eq!(decoded.values()[3].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = encode_matrix(&DenseMatrix::zeros(2, 2));
        bytes[0] = b'X';
        assert!(matches!(decode_tensor(&bytes), Err(VnmError::BadMagic)));

        assert!(matches!(
            decode_tensor(&[]),
            Err(VnmError::Truncated("header"))
        ));

        let bytes = encode_matrix(&DenseMatrix::zeros(2, 2));
        assert!(matches!(
            decode_tensor(&bytes[..bytes.len() - 1]),
            Err(VnmError::Truncated(_))
        ));
    }

    #[test]
    fn rejects_wrong_version_and_dtype() {
        let mut bytes = encode_matrix(&DenseMatrix::zeros(1, 1));
        bytes[4] = 9; // version lo byte
        assert!(matches!(
            decode_tensor(&bytes),
            Err(VnmError::Unsupported(_))
        ));

        let mut bytes = encode_matrix(&DenseMatrix::zeros(1, 1));
        bytes[6] = 7; // dtype
        assert!(matches!(
            decode_tensor(&bytes),
            Err(VnmError::Unsupported(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let m = DenseMatrix::from_vec(2, 2, vec![1.5, -2.0, 0.125, 7.0]).unwrap();
        let parsed = decode_matrix_csv(&encode_matrix_csv(&m)).unwrap();
        assert_eq!(m, parsed);
        assert!(matches!(
            decode_matrix_csv("1,2\n3\n"),
            Err(VnmError::Csv(_))
        ));
    }
}
