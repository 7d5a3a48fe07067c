//! Binary tensor envelope shared by every file the tools write.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "SPKT" | version u16 | tensor count u32
//! per tensor: name length u16 | UTF-8 name | dtype u8 | rank u8 | dims u64 × rank | payload
//! CRC32 (IEEE) of every preceding byte, u32
//! ```
//!
//! Complex payloads are interleaved `re, im`.

use std::path::Path;

use crate::error::{AppError, AppResult};

pub const MAGIC: &[u8; 4] = b"SPKT";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
    Complex32 = 2,
    Complex64 = 3,
}

impl Dtype {
    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Dtype::F32,
            1 => Dtype::F64,
            2 => Dtype::Complex32,
            3 => Dtype::Complex64,
            _ => return None,
        })
    }

    fn is_complex(self) -> bool {
        matches!(self, Dtype::Complex32 | Dtype::Complex64)
    }

    fn scalar_bytes(self) -> usize {
        match self {
            Dtype::F32 | Dtype::Complex32 => 4,
            Dtype::F64 | Dtype::Complex64 => 8,
        }
    }
}

/// One named array. `values` holds `dims.product()` reals, or twice that for
/// complex dtypes; single-precision dtypes round on write.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dtype: Dtype,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl NamedTensor {
    pub fn real(name: impl Into<String>, dims: Vec<usize>, values: Vec<f64>) -> Self {
        Self { name: name.into(), dtype: Dtype::F64, dims, values }
    }

    pub fn complex(name: impl Into<String>, dims: Vec<usize>, values: &[spokenet_core::Complex64]) -> Self {
        let values = values.iter().flat_map(|z| [z.re, z.im]).collect();
        Self { name: name.into(), dtype: Dtype::Complex64, dims, values }
    }

    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self::real(name, vec![1], vec![v])
    }

    fn expected_len(&self) -> usize {
        let n: usize = self.dims.iter().product();
        if self.dtype.is_complex() { 2 * n } else { n }
    }

    pub fn to_complex(&self) -> Vec<spokenet_core::Complex64> {
        self.values.chunks_exact(2).map(|c| spokenet_core::Complex64::new(c[0], c[1])).collect()
    }
}

/// An ordered collection of tensors looked up by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    pub tensors: Vec<NamedTensor>,
}

impl TensorFile {
    pub fn push(&mut self, t: NamedTensor) {
        self.tensors.push(t);
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn encode(&self) -> Result<Vec<u8>, String> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32::try_from(self.tensors.len()).map_err(|_| "too many tensors")?.to_le_bytes());
        for t in &self.tensors {
            if t.values.len() != t.expected_len() {
                return Err(format!("tensor {}: {} values for dims {:?}", t.name, t.values.len(), t.dims));
            }
            let name = t.name.as_bytes();
            out.extend_from_slice(&u16::try_from(name.len()).map_err(|_| "tensor name too long")?.to_le_bytes());
            out.extend_from_slice(name);
            out.push(t.dtype as u8);
            out.push(u8::try_from(t.dims.len()).map_err(|_| "rank above 255")?);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match t.dtype.scalar_bytes() {
                4 => t.values.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
                _ => t.values.iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 14 {
            return Err("file too short".into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not a tensor file (bad magic)".into());
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let count = u32::from_le_bytes(r.array()?) as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = u16::from_le_bytes(r.array()?) as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|_| "tensor name is not UTF-8")?.to_string();
            let [tag] = r.array()?;
            let dtype = Dtype::from_tag(tag).ok_or_else(|| format!("tensor {name}: unknown dtype tag {tag}"))?;
            let [rank] = r.array()?;
            let mut dims = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                let d = u64::from_le_bytes(r.array()?);
                dims.push(usize::try_from(d).map_err(|_| format!("tensor {name}: dimension {d} too large"))?);
            }
            let n = dims
                .iter()
                .try_fold(if dtype.is_complex() { 2usize } else { 1 }, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format!("tensor {name}: size overflow"))?;
            let width = dtype.scalar_bytes();
            let payload = r.take(n.checked_mul(width).ok_or("size overflow")?)?;
            let values = if width == 4 {
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect()
            } else {
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
            };
            tensors.push(NamedTensor { name, dtype, dims, values });
        }
        if r.pos != body.len() {
            return Err(format!("{} trailing bytes before the checksum", body.len() - r.pos));
        }
        Ok(Self { tensors })
    }

    pub fn write(&self, path: &Path) -> AppResult<()> {
        let bytes = self.encode().map_err(|m| AppError::format(path, m))?;
        std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
        Self::decode(&bytes).map_err(|m| AppError::format(path, m))
    }

    /// Looks up a tensor and checks its dtype and, where given, its dims.
    pub fn require(&self, name: &str, dtype: Dtype, dims: Option<&[usize]>) -> Result<&NamedTensor, String> {
        let t = self.get(name).ok_or_else(|| format!("missing tensor `{name}`"))?;
        if t.dtype != dtype {
            return Err(format!("tensor `{name}` has dtype {:?}, expected {dtype:?}", t.dtype));
        }
        if let Some(d) = dims {
            if t.dims != d {
                return Err(format!("tensor `{name}` has dims {:?}, expected {d:?}", t.dims));
            }
        }
        Ok(t)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated file")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}
