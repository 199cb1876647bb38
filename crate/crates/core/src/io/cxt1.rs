//! CXT1: a small self-describing tensor container.
//!
//! Layout, all integers little-endian:
//! `"CXT1"`, `u16` version, `u16` ndims, `ndims × u64` dims, `u16` dtype
//! (0 complex128 interleaved, 1 float64), `u32` metadata length, UTF-8 JSON
//! metadata, row-major payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numerics::C64;

pub const MAGIC: &[u8; 4] = b"CXT1";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Complex(v) => v.len(),
            Payload::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> u16 {
        match self {
            Payload::Complex(_) => 0,
            Payload::Real(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cxt1 {
    pub dims: Vec<usize>,
    /// JSON object; keys serialize in sorted order.
    pub metadata: Map<String, Value>,
    pub payload: Payload,
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

impl Cxt1 {
    pub fn new(dims: Vec<usize>, metadata: Map<String, Value>, payload: Payload) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != payload.len() {
            return format_err(format!(
                "dims {dims:?} describe {n} values but the payload holds {}",
                payload.len()
            ));
        }
        Ok(Self {
            dims,
            metadata,
            payload,
        })
    }

    pub fn kind(&self) -> Option<&str> {
        self.metadata.get("kind").and_then(Value::as_str)
    }

    /// Fail unless the `kind` metadata entry equals `expected`.
    pub fn expect_kind(&self, expected: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == expected => Ok(()),
            other => format_err(format!("expected a {expected} container, found {other:?}")),
        }
    }

    pub fn meta<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .metadata
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing metadata entry '{key}'")))?;
        serde_json::from_value(v.clone()).map_err(|e| Error::Format(format!("metadata '{key}': {e}")))
    }

    pub fn complex(&self) -> Result<&[C64]> {
        match &self.payload {
            Payload::Complex(v) => Ok(v),
            Payload::Real(_) => format_err("expected complex payload"),
        }
    }

    pub fn real(&self) -> Result<&[f64]> {
        match &self.payload {
            Payload::Real(v) => Ok(v),
            Payload::Complex(_) => format_err("expected real payload"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_string(&self.metadata).expect("metadata is valid JSON");
        let mut out = Vec::with_capacity(32 + meta.len() + self.payload.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u16).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.payload.dtype().to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        match &self.payload {
            Payload::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            Payload::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return format_err("not a CXT1 file (bad magic)");
        }
        let version = r.u16()?;
        if version != VERSION {
            return format_err(format!("unsupported CXT1 version {version}"));
        }
        let ndims = r.u16()? as usize;
        let dims = (0..ndims)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let dtype = r.u16()?;
        let meta_len = r.u32()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let metadata: Map<String, Value> = if meta_text.is_empty() {
            Map::new()
        } else {
            serde_json::from_str(meta_text).map_err(|e| Error::Format(format!("metadata: {e}")))?
        };
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("dims overflow".into()))?;
        let rest = &bytes[r.pos..];
        let payload = match dtype {
            0 => {
                if Some(rest.len()) != n.checked_mul(16) {
                    return format_err(format!("payload holds {} bytes, expected {} complex values", rest.len(), n));
                }
                Payload::Complex(
                    rest.chunks_exact(16)
                        .map(|c| C64::new(f64_at(c, 0), f64_at(c, 8)))
                        .collect(),
                )
            }
            1 => {
                if Some(rest.len()) != n.checked_mul(8) {
                    return format_err(format!("payload holds {} bytes, expected {} reals", rest.len(), n));
                }
                Payload::Real(rest.chunks_exact(8).map(|c| f64_at(c, 0)).collect())
            }
            d => return format_err(format!("unknown dtype code {d}")),
        };
        Self::new(dims, metadata, payload)
    }

    /// Write via a temporary sibling file and rename, so readers never see
    /// a partial file.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return format_err("truncated CXT1 header");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Cxt1 {
        let mut meta = Map::new();
        meta.insert("kind".into(), json!("test"));
        meta.insert("alpha".into(), json!([1, 2.5, "x"]));
        let data = (0..6).map(|k| C64::new(k as f64 * 0.1, -(k as f64))).collect();
        Cxt1::new(vec![2, 3], meta, Payload::Complex(data)).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[..4], b"CXT1");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u16::from_le_bytes([b[6], b[7]]), 2);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(u16::from_le_bytes([b[24], b[25]]), 0);
        let mlen = u32::from_le_bytes(b[26..30].try_into().unwrap()) as usize;
        assert_eq!(&b[30..30 + mlen], br#"{"alpha":[1,2.5,"x"],"kind":"test"}"#);
        assert_eq!(b.len(), 30 + mlen + 6 * 16);
    }

    #[test]
    fn round_trips_both_dtypes() {
        let c = sample();
        assert_eq!(Cxt1::from_bytes(&c.to_bytes()).unwrap(), c);
        let r = Cxt1::new(vec![4], Map::new(), Payload::Real(vec![1.0, -0.0, f64::MAX, 1e-300])).unwrap();
        let back = Cxt1::from_bytes(&r.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), r.to_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let mut b = sample().to_bytes();
        b[0] = b'X';
        assert!(matches!(Cxt1::from_bytes(&b), Err(Error::Format(_))));
        let mut b = sample().to_bytes();
        b[4] = 9;
        assert!(matches!(Cxt1::from_bytes(&b), Err(Error::Format(_))));
        let b = sample().to_bytes();
        assert!(matches!(Cxt1::from_bytes(&b[..b.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(Cxt1::from_bytes(&b[..10]), Err(Error::Format(_))));
        assert!(Cxt1::new(vec![5], Map::new(), Payload::Real(vec![0.0; 4])).is_err());
    }

    #[test]
    fn atomic_write_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.cxt1");
        sample().write(&p).unwrap();
        assert_eq!(Cxt1::read(&p).unwrap(), sample());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
