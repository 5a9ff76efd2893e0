//! Little-endian model files.
//!
//! `BCPD`: magic, version `u32`, kind `u8`, `N_e`, `N_r`, `D` as `u64`, then
//! A, B (absent when tied) and C as row-major `f64`.
//!
//! `BCPB`: same header, then `Δ` as `f64`, three per-matrix `f64` scales when
//! the VQ flag is set, then A, B (absent when tied) and C as packed rows of
//! `⌈D/64⌉` `u64` words.

use std::fs;
use std::path::Path;

use crate::binarize::{BinaryFactors, Scale};
use crate::bits::{words_for, BitMatrix};
use crate::dense::{DenseFactors, Matrix, ModelKind};
use crate::error::{Error, Result};
use crate::eval::Scorer;

pub const DENSE_MAGIC: &[u8; 4] = b"BCPD";
pub const BINARY_MAGIC: &[u8; 4] = b"BCPB";
pub const FORMAT_VERSION: u32 = 1;

/// `BCPB` kind flags.
pub const FLAG_TIED: u8 = 1;
pub const FLAG_VQ: u8 = 2;

/// Bytes before the first matrix in either format.
pub const HEADER_LEN: usize = 4 + 4 + 1 + 3 * 8;

fn kind_code(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Cp => 0,
        ModelKind::DistMult => 1,
        ModelKind::BinaryCp => 2,
        ModelKind::BinaryDistMult => 3,
    }
}

fn kind_from_code(code: u8) -> Result<ModelKind> {
    Ok(match code {
        0 => ModelKind::Cp,
        1 => ModelKind::DistMult,
        2 => ModelKind::BinaryCp,
        3 => ModelKind::BinaryDistMult,
        _ => return Err(Error::Format(format!("unknown dense model kind {code}"))),
    })
}

fn header(out: &mut Vec<u8>, magic: &[u8; 4], kind: u8, n_e: usize, n_r: usize, dim: usize) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind);
    for v in [n_e, n_r, dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
}

/// `kind` is stored as given; for binarized kinds the file holds the
/// latent real factors.
pub fn dense_to_bytes(f: &DenseFactors, kind: ModelKind) -> Result<Vec<u8>> {
    if kind.is_tied() != f.is_tied() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} does not match factor tying"
        )));
    }
    let mut out = Vec::with_capacity(dense_file_len(f.n_entities(), f.n_relations(), f.dim(), f.is_tied()));
    header(&mut out, DENSE_MAGIC, kind_code(kind), f.n_entities(), f.n_relations(), f.dim());
    let mut mats = vec![f.a()];
    if !f.is_tied() {
        mats.push(f.b());
    }
    mats.push(f.c());
    for m in mats {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn binary_to_bytes(f: &BinaryFactors) -> Vec<u8> {
    let (mut flags, delta, scales) = match f.scale() {
        Scale::Uniform(d) => (0, d, None),
        Scale::PerMatrix(s) => (FLAG_VQ, 1.0, Some(s)),
    };
    if f.is_tied() {
        flags |= FLAG_TIED;
    }
    let mut out = Vec::with_capacity(binary_file_len(f.n_entities(), f.n_relations(), f.dim(), f.is_tied(), scales.is_some()));
    header(&mut out, BINARY_MAGIC, flags, f.n_entities(), f.n_relations(), f.dim());
    out.extend_from_slice(&delta.to_le_bytes());
    for s in scales.into_iter().flatten() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let mut mats = vec![f.a()];
    if !f.is_tied() {
        mats.push(f.b());
    }
    mats.push(f.c());
    for m in mats {
        for w in m.data() {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

/// Exact byte size of a `BCPD` file.
pub fn dense_file_len(n_e: usize, n_r: usize, dim: usize, tied: bool) -> usize {
    let rows = if tied { n_e + n_r } else { 2 * n_e + n_r };
    HEADER_LEN + rows * dim * 8
}

/// Exact byte size of a `BCPB` file.
pub fn binary_file_len(n_e: usize, n_r: usize, dim: usize, tied: bool, vq: bool) -> usize {
    let rows = if tied { n_e + n_r } else { 2 * n_e + n_r };
    HEADER_LEN + 8 + if vq { 24 } else { 0 } + rows * words_for(dim) * 8
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated model file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("size {v} does not fit in memory")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "{} trailing bytes after model data",
                self.buf.len() - self.pos
            )))
        }
    }
}

struct Header {
    kind: u8,
    n_e: usize,
    n_r: usize,
    dim: usize,
}

fn read_header(c: &mut Cursor<'_>, magic: &[u8; 4]) -> Result<Header> {
    if c.take(4)? != magic {
        return Err(Error::Format(format!(
            "bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(Header {
        kind: c.u8()?,
        n_e: c.usize()?,
        n_r: c.usize()?,
        dim: c.usize()?,
    })
}

fn checked_len(rows: usize, cols: usize, width: usize, available: usize) -> Result<usize> {
    rows.checked_mul(cols)
        .and_then(|n| n.checked_mul(width).map(|_| n))
        .filter(|&n| n * width <= available)
        .ok_or_else(|| Error::Format("matrix larger than file".into()))
}

pub fn dense_from_bytes(buf: &[u8]) -> Result<(ModelKind, DenseFactors)> {
    let mut c = Cursor { buf, pos: 0 };
    let h = read_header(&mut c, DENSE_MAGIC)?;
    let kind = kind_from_code(h.kind)?;
    let mut read = |rows: usize| -> Result<Matrix> {
        let n = checked_len(rows, h.dim, 8, buf.len() - c.pos)?;
        let data = c
            .take(n * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, h.dim, data)
    };
    let a = read(h.n_e)?;
    let b = if kind.is_tied() { None } else { Some(read(h.n_e)?) };
    let cm = read(h.n_r)?;
    c.finish()?;
    Ok((kind, DenseFactors::from_parts(a, b, cm)?))
}

pub fn binary_from_bytes(buf: &[u8]) -> Result<BinaryFactors> {
    let mut c = Cursor { buf, pos: 0 };
    let h = read_header(&mut c, BINARY_MAGIC)?;
    if h.kind & !(FLAG_TIED | FLAG_VQ) != 0 {
        return Err(Error::Format(format!("unknown binary model flags {:#x}", h.kind)));
    }
    let delta = c.f64()?;
    let scale = if h.kind & FLAG_VQ != 0 {
        Scale::PerMatrix([c.f64()?, c.f64()?, c.f64()?])
    } else {
        Scale::Uniform(delta)
    };
    let wpr = words_for(h.dim);
    let mut read = |rows: usize| -> Result<BitMatrix> {
        let n = checked_len(rows, wpr, 8, buf.len() - c.pos)?;
        let data = c
            .take(n * 8)?
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        BitMatrix::from_words(rows, h.dim, data)
    };
    let a = read(h.n_e)?;
    let b = if h.kind & FLAG_TIED != 0 { None } else { Some(read(h.n_e)?) };
    let cm = read(h.n_r)?;
    c.finish()?;
    match scale {
        Scale::Uniform(d) => BinaryFactors::new(a, b, cm, d),
        s => BinaryFactors::with_scale(a, b, cm, s),
    }
}

pub fn save_dense(path: &Path, f: &DenseFactors, kind: ModelKind) -> Result<()> {
    Ok(fs::write(path, dense_to_bytes(f, kind)?)?)
}

pub fn save_binary(path: &Path, f: &BinaryFactors) -> Result<()> {
    Ok(fs::write(path, binary_to_bytes(f))?)
}

/// A loaded model file of either format.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dense { kind: ModelKind, factors: DenseFactors },
    Binary(BinaryFactors),
}

impl Model {
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        match buf.get(..4) {
            Some(m) if m == DENSE_MAGIC => {
                let (kind, factors) = dense_from_bytes(buf)?;
                Ok(Model::Dense { kind, factors })
            }
            Some(m) if m == BINARY_MAGIC => Ok(Model::Binary(binary_from_bytes(buf)?)),
            _ => Err(Error::Format("not a BCPD or BCPB model file".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Model::Dense { kind, factors } => dense_to_bytes(factors, *kind),
            Model::Binary(f) => Ok(binary_to_bytes(f)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_bytes()?)?)
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Dense { factors, .. } => factors.dim(),
            Model::Binary(f) => f.dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Model::Dense { kind, factors } => format!(
                "dense {kind}: {} entities, {} relations, D={}",
                factors.n_entities(),
                factors.n_relations(),
                factors.dim()
            ),
            Model::Binary(f) => format!(
                "binary{}{}: {} entities, {} relations, D={}, scale {:?}",
                if f.is_tied() { " tied" } else { "" },
                if matches!(f.scale(), Scale::PerMatrix(_)) { " vq" } else { "" },
                f.n_entities(),
                f.n_relations(),
                f.dim(),
                f.scale()
            ),
        }
    }
}

impl Scorer for Model {
    fn n_entities(&self) -> usize {
        match self {
            Model::Dense { factors, .. } => factors.n_entities(),
            Model::Binary(f) => f.n_entities(),
        }
    }

    fn n_relations(&self) -> usize {
        match self {
            Model::Dense { factors, .. } => factors.n_relations(),
            Model::Binary(f) => f.n_relations(),
        }
    }

    fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        match self {
            Model::Dense { factors, .. } => factors.score_unchecked(i, j, k),
            Model::Binary(f) => f.score_bitwise_unchecked(i, j, k),
        }
    }
}
