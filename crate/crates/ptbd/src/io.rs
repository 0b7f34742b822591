//! DTEN1 tensor files.
//!
//! An ASCII header line `DTEN1 <r|c> <m> <n_1> ... <n_m>\n` followed by the
//! entries in colexicographic order as little-endian `f64`. Complex entries
//! are stored as interleaved `(re, im)` pairs.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ptbd_core::{Complex64, Field, Matrix, Scalar, Tensor};

const MAGIC: &str = "DTEN1";
/// Longest accepted header line, in bytes.
const MAX_HEADER: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed DTEN1 header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("payload has {0} bytes past the last entry")]
    TrailingBytes(usize),
    #[error("file holds a {found} tensor, expected {expected}")]
    FieldMismatch { expected: Field, found: Field },
    #[error(transparent)]
    Core(#[from] ptbd_core::Error),
}

/// A tensor of either field, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    Real(Tensor<f64>),
    Complex(Tensor<Complex64>),
}

impl AnyTensor {
    pub fn field(&self) -> Field {
        match self {
            AnyTensor::Real(_) => Field::Real,
            AnyTensor::Complex(_) => Field::Complex,
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            AnyTensor::Real(t) => t.dims(),
            AnyTensor::Complex(t) => t.dims(),
        }
    }
}

impl From<Tensor<f64>> for AnyTensor {
    fn from(t: Tensor<f64>) -> Self {
        AnyTensor::Real(t)
    }
}

impl From<Tensor<Complex64>> for AnyTensor {
    fn from(t: Tensor<Complex64>) -> Self {
        AnyTensor::Complex(t)
    }
}

/// Scalars with a fixed on-disk layout.
pub trait DiskScalar: Scalar {
    const WIDTH: usize;
    fn push_le(self, out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Self;
    fn wrap(t: Tensor<Self>) -> AnyTensor;
    fn unwrap(t: AnyTensor) -> Result<Tensor<Self>, FormatError>;
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

impl DiskScalar for f64 {
    const WIDTH: usize = 8;

    fn push_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        f64_at(bytes, 0)
    }

    fn wrap(t: Tensor<Self>) -> AnyTensor {
        AnyTensor::Real(t)
    }

    fn unwrap(t: AnyTensor) -> Result<Tensor<Self>, FormatError> {
        match t {
            AnyTensor::Real(t) => Ok(t),
            other => Err(FormatError::FieldMismatch { expected: Field::Real, found: other.field() }),
        }
    }
}

impl DiskScalar for Complex64 {
    const WIDTH: usize = 16;

    fn push_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        Complex64::new(f64_at(bytes, 0), f64_at(bytes, 8))
    }

    fn wrap(t: Tensor<Self>) -> AnyTensor {
        AnyTensor::Complex(t)
    }

    fn unwrap(t: AnyTensor) -> Result<Tensor<Self>, FormatError> {
        match t {
            AnyTensor::Complex(t) => Ok(t),
            other => Err(FormatError::FieldMismatch { expected: Field::Complex, found: other.field() }),
        }
    }
}

pub fn write_tensor<S: DiskScalar>(mut w: impl Write, t: &Tensor<S>) -> Result<(), FormatError> {
    let dims: Vec<String> = t.dims().iter().map(usize::to_string).collect();
    writeln!(w, "{MAGIC} {} {} {}", S::FIELD.tag(), t.order(), dims.join(" "))?;
    let mut buf = Vec::with_capacity(t.len() * S::WIDTH);
    for &x in t.as_slice() {
        x.push_le(&mut buf);
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Header {
    field: Field,
    dims: Vec<usize>,
}

fn parse_header(line: &str) -> Result<Header, FormatError> {
    let bad = |msg: String| FormatError::MalformedHeader(msg);
    let mut words = line.split_ascii_whitespace();
    if words.next() != Some(MAGIC) {
        return Err(bad(format!("expected `{MAGIC}` at the start of `{line}`")));
    }
    let field = match words.next() {
        Some("r") => Field::Real,
        Some("c") => Field::Complex,
        other => return Err(bad(format!("field tag must be r or c, got {other:?}"))),
    };
    let order: usize = words
        .next()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| bad("missing or invalid order".into()))?;
    let dims = words
        .map(|w| w.parse::<usize>().map_err(|_| bad(format!("invalid extent `{w}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if dims.len() != order || order == 0 {
        return Err(bad(format!("order {order} but {} extents", dims.len())));
    }
    if dims.contains(&0) {
        return Err(bad("zero extent".into()));
    }
    Ok(Header { field, dims })
}

pub fn read_tensor(r: impl Read) -> Result<AnyTensor, FormatError> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(FormatError::MalformedHeader("missing newline after header".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > MAX_HEADER {
            return Err(FormatError::MalformedHeader("header line too long".into()));
        }
    }
    let line = String::from_utf8(line).map_err(|_| FormatError::MalformedHeader("header is not UTF-8".into()))?;
    let header = parse_header(&line)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    match header.field {
        Field::Real => decode::<f64>(&header.dims, &payload),
        Field::Complex => decode::<Complex64>(&header.dims, &payload),
    }
}

fn decode<S: DiskScalar>(dims: &[usize], payload: &[u8]) -> Result<AnyTensor, FormatError> {
    let expected = dims
        .iter()
        .try_fold(S::WIDTH, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| FormatError::MalformedHeader(format!("extents {dims:?} overflow")))?;
    if payload.len() < expected {
        return Err(FormatError::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes(payload.len() - expected));
    }
    let data = payload.chunks_exact(S::WIDTH).map(S::from_le).collect();
    Ok(S::wrap(Tensor::new(dims.to_vec(), data)?))
}

/// Reads a tensor that must have field `S`.
pub fn read_tensor_as<S: DiskScalar>(r: impl Read) -> Result<Tensor<S>, FormatError> {
    S::unwrap(read_tensor(r)?)
}

pub fn save_tensor<S: DiskScalar>(path: impl AsRef<Path>, t: &Tensor<S>) -> Result<(), FormatError> {
    write_tensor(BufWriter::new(File::create(path)?), t)
}

pub fn save_any(path: impl AsRef<Path>, t: &AnyTensor) -> Result<(), FormatError> {
    match t {
        AnyTensor::Real(t) => save_tensor(path, t),
        AnyTensor::Complex(t) => save_tensor(path, t),
    }
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<AnyTensor, FormatError> {
    read_tensor(File::open(path)?)
}

/// Writes a matrix as a 2-mode DTEN1 file.
pub fn save_matrix<S: DiskScalar>(path: impl AsRef<Path>, m: &Matrix<S>) -> Result<(), FormatError> {
    let t = Tensor::new(vec![m.rows(), m.cols()], m.as_slice().to_vec())?;
    save_tensor(path, &t)
}

pub fn load_matrix<S: DiskScalar>(path: impl AsRef<Path>) -> Result<Matrix<S>, FormatError> {
    let t: Tensor<S> = read_tensor_as(File::open(path)?)?;
    if t.order() != 2 {
        return Err(FormatError::MalformedHeader(format!("expected a matrix, got order {}", t.order())));
    }
    let (rows, cols) = (t.dims()[0], t.dims()[1]);
    Ok(Matrix::from_col_major(rows, cols, t.into_vec())?)
}
