//! Versioned little-endian binary container: 4-byte magic, `u32` version,
//! payload, then a SHA-256 of everything before it.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DIGEST_LEN: usize = 32;
const HEADER_LEN: usize = 8;

#[derive(Debug)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, v: &[f32]) {
        self.buf.reserve(v.len() * 4);
        v.iter().for_each(|x| self.buf.extend_from_slice(&x.to_le_bytes()));
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.buf.reserve(v.len() * 8);
        v.iter().for_each(|x| self.buf.extend_from_slice(&x.to_le_bytes()));
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    /// Appends the digest trailer.
    pub fn finish(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.buf);
        self.buf.extend_from_slice(&digest);
        self.buf
    }
}

/// Hex SHA-256 trailer of a finished container.
pub(crate) fn trailer_hex(bytes: &[u8]) -> String {
    hex::encode(&bytes[bytes.len().saturating_sub(DIGEST_LEN)..])
}

#[derive(Debug)]
pub(crate) struct Reader<'a> {
    what: &'a str,
    body: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and digest, in that order.
    pub fn open(bytes: &'a [u8], magic: &[u8; 4], version: u32, what: &'a str) -> Result<Self> {
        if bytes.len() < HEADER_LEN + DIGEST_LEN || &bytes[..4] != magic {
            return Err(Error::CorruptFile {
                what: what.into(),
                reason: format!("not a {} file", String::from_utf8_lossy(magic)),
            });
        }
        let found = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if found != version {
            return Err(Error::VersionMismatch {
                what: what.into(),
                reason: format!("format version {found}, this build reads {version}"),
            });
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::CorruptFile {
                what: what.into(),
                reason: "checksum mismatch (truncated or modified)".into(),
            });
        }
        Ok(Self {
            what,
            body,
            pos: HEADER_LEN,
        })
    }

    pub fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptFile {
            what: self.what.into(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.body.len() - self.pos < n {
            return Err(self.corrupt(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.body[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A `u64` that must fit in memory as a count.
    pub fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.body.len())
            .ok_or_else(|| self.corrupt(format!("implausible length {v}")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| self.corrupt("length overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.corrupt("length overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.corrupt("invalid UTF-8 text"))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.body.len() {
            return Err(self.corrupt(format!("{} trailing bytes", self.body.len() - self.pos)));
        }
        Ok(())
    }
}
