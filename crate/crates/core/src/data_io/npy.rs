//! NPY version 1.0 reader and writer for `<f4`, `<f8` and `<i8` arrays of
//! rank 1 or 2.
//!
//! Layout: the magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16`
//! header length, then an ASCII Python dict literal with the keys `descr`,
//! `fortran_order` and `shape`, padded with spaces and a final newline so the
//! payload starts on a 64-byte boundary.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NpyError {
    #[error("not an NPY file (bad magic)")]
    BadMagic,
    #[error("unsupported NPY version {0}.{1}; only 1.0 is supported")]
    UnsupportedVersion(u8, u8),
    #[error("unsupported dtype '{0}'; expected '<f4', '<f8' or '<i8'")]
    UnsupportedDtype(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} unexpected trailing bytes after the array payload")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
    I64,
}

impl DType {
    fn descr(self) -> &'static str {
        match self {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
            DType::I64 => "<i8",
        }
    }

    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }

    fn from_descr(s: &str) -> Option<Self> {
        match s {
            "<f4" => Some(DType::F32),
            "<f8" => Some(DType::F64),
            "<i8" => Some(DType::I64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I64(Vec<i64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
            ArrayData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::F32(_) => DType::F32,
            ArrayData::F64(_) => DType::F64,
            ArrayData::I64(_) => DType::I64,
        }
    }
}

/// A rank-1 or rank-2 array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    shape: Vec<usize>,
    data: ArrayData,
}

impl ArrayFile {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self, NpyError> {
        check_rank(&shape)?;
        let count = element_count(&shape)?;
        if count != data.len() {
            return Err(NpyError::UnsupportedShape(format!(
                "shape {shape:?} needs {count} elements, buffer has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn into_parts(self) -> (Vec<usize>, ArrayData) {
        (self.shape, self.data)
    }
}

fn check_rank(shape: &[usize]) -> Result<(), NpyError> {
    match shape.len() {
        1 | 2 => Ok(()),
        0 => Err(NpyError::UnsupportedShape("scalar (empty shape) arrays are not supported".into())),
        n => Err(NpyError::UnsupportedShape(format!("rank {n}; only 1-D and 2-D arrays are supported"))),
    }
}

fn element_count(shape: &[usize]) -> Result<usize, NpyError> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
        NpyError::UnsupportedShape(format!("shape {shape:?} overflows the address space"))
    })
}

pub fn read_npy(path: &Path) -> Result<ArrayFile> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_npy(&bytes).map_err(|source| Error::Npy { path: path.to_path_buf(), source })
}

pub fn write_npy(path: &Path, arr: &ArrayFile) -> Result<()> {
    fs::write(path, encode_npy(arr)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn encode_npy(arr: &ArrayFile) -> Vec<u8> {
    let shape = match arr.shape.as_slice() {
        [n] => format!("({n},)"),
        [r, c] => format!("({r}, {c})"),
        _ => unreachable!("rank checked at construction"),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape}, }}",
        arr.dtype().descr()
    );
    let unpadded = PREAMBLE_LEN + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + arr.data.len() * arr.dtype().size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &arr.data {
        ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

pub fn parse_npy(bytes: &[u8]) -> Result<ArrayFile, NpyError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(NpyError::Truncated { expected: PREAMBLE_LEN, actual: bytes.len() });
    }
    if (bytes[6], bytes[7]) != (1, 0) {
        return Err(NpyError::UnsupportedVersion(bytes[6], bytes[7]));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let payload_start = PREAMBLE_LEN + header_len;
    if bytes.len() < payload_start {
        return Err(NpyError::Truncated { expected: payload_start, actual: bytes.len() });
    }
    let header = std::str::from_utf8(&bytes[PREAMBLE_LEN..payload_start])
        .ok()
        .filter(|h| h.is_ascii())
        .ok_or_else(|| NpyError::MalformedHeader("header is not ASCII".into()))?;
    let dict = HeaderDict::parse(header)?;
    check_rank(&dict.shape)?;

    // Validate the declared size against the bytes actually present before
    // allocating anything sized by the header.
    let count = element_count(&dict.shape)?;
    let nbytes = count
        .checked_mul(dict.dtype.size())
        .ok_or_else(|| NpyError::UnsupportedShape(format!("shape {:?} is too large", dict.shape)))?;
    let payload = &bytes[payload_start..];
    if payload.len() < nbytes {
        return Err(NpyError::Truncated { expected: payload_start + nbytes, actual: bytes.len() });
    }
    if payload.len() > nbytes {
        return Err(NpyError::TrailingBytes(payload.len() - nbytes));
    }

    let mut data = match dict.dtype {
        DType::F32 => ArrayData::F32(
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
        DType::F64 => ArrayData::F64(
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
        DType::I64 => ArrayData::I64(
            payload.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
    };
    if dict.fortran_order {
        if let [rows, cols] = dict.shape[..] {
            data = match data {
                ArrayData::F32(v) => ArrayData::F32(transpose(&v, rows, cols)),
                ArrayData::F64(v) => ArrayData::F64(transpose(&v, rows, cols)),
                ArrayData::I64(v) => ArrayData::I64(transpose(&v, rows, cols)),
            };
        }
    }
    Ok(ArrayFile { shape: dict.shape, data })
}

// Column-major `rows × cols` to row-major.
fn transpose<T: Copy>(v: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    for r in 0..rows {
        for c in 0..cols {
            out.push(v[c * rows + r]);
        }
    }
    out
}

struct HeaderDict {
    dtype: DType,
    fortran_order: bool,
    shape: Vec<usize>,
}

#[derive(Debug)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

impl HeaderDict {
    fn parse(text: &str) -> Result<Self, NpyError> {
        let mut p = LiteralParser { s: text.as_bytes(), pos: 0 };
        let entries = p.dict()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(malformed("unexpected text after the header dict"));
        }
        let mut descr = None;
        let mut fortran = None;
        let mut shape = None;
        for (key, value) in entries {
            match (key.as_str(), value) {
                ("descr", Literal::Str(s)) => descr = Some(s),
                ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
                ("shape", Literal::Tuple(t)) => shape = Some(t),
                (k @ ("descr" | "fortran_order" | "shape"), v) => {
                    return Err(malformed(&format!("key '{k}' has the wrong type: {v:?}")))
                }
                (k, _) => return Err(malformed(&format!("unexpected key '{k}'"))),
            }
        }
        let descr = descr.ok_or_else(|| malformed("missing key 'descr'"))?;
        let dtype = DType::from_descr(&descr).ok_or(NpyError::UnsupportedDtype(descr))?;
        Ok(Self {
            dtype,
            fortran_order: fortran.ok_or_else(|| malformed("missing key 'fortran_order'"))?,
            shape: shape.ok_or_else(|| malformed("missing key 'shape'"))?,
        })
    }
}

fn malformed(msg: &str) -> NpyError {
    NpyError::MalformedHeader(msg.to_string())
}

struct LiteralParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl LiteralParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), NpyError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(malformed(&format!("expected '{}' at offset {}", c as char, self.pos)))
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>, NpyError> {
        self.expect(b'{')?;
        let mut out = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                return Ok(out);
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            out.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(malformed(&format!("expected ',' or '}}' at offset {}", self.pos))),
            }
        }
    }

    fn string(&mut self) -> Result<String, NpyError> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(malformed(&format!("expected a string at offset {}", self.pos))),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return Err(malformed("unterminated string"));
        }
        let s = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn value(&mut self) -> Result<Literal, NpyError> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Literal::Str),
            Some(b'(') => self.tuple().map(Literal::Tuple),
            Some(b'T') if self.s[self.pos..].starts_with(b"True") => {
                self.pos += 4;
                Ok(Literal::Bool(true))
            }
            Some(b'F') if self.s[self.pos..].starts_with(b"False") => {
                self.pos += 5;
                Ok(Literal::Bool(false))
            }
            _ => Err(malformed(&format!("unsupported value at offset {}", self.pos))),
        }
    }

    fn tuple(&mut self) -> Result<Vec<usize>, NpyError> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(c) if c.is_ascii_digit() => {
                    let start = self.pos;
                    while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    // Python 2 era writers append 'L' to longs.
                    if self.s.get(self.pos) == Some(&b'L') {
                        self.pos += 1;
                    }
                    let digits = std::str::from_utf8(&self.s[start..self.pos]).unwrap().trim_end_matches('L');
                    let d = digits
                        .parse::<usize>()
                        .map_err(|_| NpyError::UnsupportedShape(format!("dimension {digits} is too large")))?;
                    out.push(d);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(malformed(&format!("expected ',' or ')' at offset {}", self.pos))),
                    }
                }
                _ => return Err(malformed(&format!("expected a dimension at offset {}", self.pos))),
            }
        }
    }
}
