//! Binary container: magic `RRT1`, u64 LE header length, UTF-8 JSON header,
//! then the float64 LE payload. Complex payloads interleave (re, im).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RRT1";
pub const SCHEMA: u32 = 1;
const MAX_HEADER: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C128,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64 => 1,
            Dtype::C128 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: u32,
    /// Content tag, e.g. `tangent_sinogram`.
    pub kind: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Human-readable description of the index order.
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom_hash: Option<String>,
    #[serde(default)]
    pub meta: Value,
}

impl Header {
    pub fn new(kind: &str, dtype: Dtype, shape: Vec<usize>, order: &str) -> Self {
        Self {
            schema: SCHEMA,
            kind: kind.to_string(),
            dtype,
            shape,
            order: order.to_string(),
            phantom_hash: None,
            meta: Value::Null,
        }
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Header,
    /// Raw f64 words: one per element for `f64`, two for `c128`.
    pub payload: Vec<f64>,
}

impl Container {
    pub fn real(header: Header, data: Vec<f64>) -> Result<Self> {
        let c = Self { header, payload: data };
        c.check()?;
        Ok(c)
    }

    pub fn complex(header: Header, data: &[Complex64]) -> Result<Self> {
        let payload = data.iter().flat_map(|z| [z.re, z.im]).collect();
        let c = Self { header, payload };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        let want = self.header.element_count() * self.header.dtype.width();
        if want != self.payload.len() {
            return Err(Error::Format(format!(
                "payload holds {} words, header shape {:?} ({:?}) needs {want}",
                self.payload.len(),
                self.header.shape,
                self.header.dtype
            )));
        }
        if self.header.schema != SCHEMA {
            return Err(Error::Format(format!("unsupported schema {}", self.header.schema)));
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Validation(format!(
                "container holds `{}`, expected `{kind}`",
                self.header.kind
            )));
        }
        Ok(())
    }

    pub fn as_complex(&self) -> Result<Vec<Complex64>> {
        if self.header.dtype != Dtype::C128 {
            return Err(Error::Format("container payload is not complex".into()));
        }
        Ok(self.payload.chunks_exact(2).map(|w| Complex64::new(w[0], w[1])).collect())
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        if self.header.dtype != Dtype::F64 {
            return Err(Error::Format("container payload is not real".into()));
        }
        Ok(&self.payload)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic: not an RRT1 container".into()));
        }
        let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
        if len > MAX_HEADER || 12 + len as usize > bytes.len() {
            return Err(Error::Format(format!("header length {len} exceeds the file")));
        }
        let end = 12 + len as usize;
        let header: Header = serde_json::from_slice(&bytes[12..end])
            .map_err(|e| Error::Format(format!("bad header: {e}")))?;
        let body = &bytes[end..];
        if body.len() % 8 != 0 {
            return Err(Error::Format("payload is not a whole number of f64 words".into()));
        }
        let payload = body
            .chunks_exact(8)
            .map(|w| f64::from_le_bytes(w.try_into().expect("8 bytes")))
            .collect();
        let c = Self { header, payload };
        c.check()?;
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
