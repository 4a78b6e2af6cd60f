//! Primitive little-endian reads and writes shared by the AuxData value
//! codec and the IR wire format.

use thiserror::Error;

use crate::uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("truncated input at byte {position}")]
    Truncated { position: usize },
    #[error("invalid UTF-8 string at byte {position}")]
    InvalidUtf8 { position: usize },
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn slice(&self, start: usize, end: usize) -> &'a [u8] {
        &self.buf[start..end]
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ReadError> {
        if self.remaining() < n {
            return Err(ReadError::Truncated { position: self.buf.len() });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, ReadError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, ReadError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, ReadError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, ReadError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn uuid(&mut self) -> Result<Uuid, ReadError> {
        Ok(Uuid::from_bytes(self.take(16)?.try_into().unwrap()))
    }

    /// A u64 length followed by that many bytes.
    pub fn bytes(&mut self) -> Result<&'a [u8], ReadError> {
        let len = self.u64()?;
        if len > self.remaining() as u64 {
            return Err(ReadError::Truncated { position: self.buf.len() });
        }
        self.take(len as usize)
    }

    pub fn string(&mut self) -> Result<String, ReadError> {
        let start = self.pos;
        let raw = self.bytes()?;
        std::str::from_utf8(raw)
            .map(str::to_owned)
            .map_err(|_| ReadError::InvalidUtf8 { position: start })
    }

    /// An element count, capped for preallocation by the bytes left.
    pub fn count(&mut self) -> Result<(u64, usize), ReadError> {
        let n = self.u64()?;
        Ok((n, n.min(self.remaining() as u64) as usize))
    }
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_bytes(out, s.as_bytes());
}

pub(crate) fn put_uuid(out: &mut Vec<u8>, id: &Uuid) {
    out.extend_from_slice(id.as_bytes());
}

/// Writes `count` then the pre-encoded items sorted by their bytes.
pub(crate) fn put_sorted(out: &mut Vec<u8>, mut items: Vec<Vec<u8>>) {
    items.sort();
    put_u64(out, items.len() as u64);
    for item in items {
        out.extend_from_slice(&item);
    }
}
