//! "LORG" binary container shared by datasets, networks, bases and models.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    4 bytes  "LORG"
//! version  u32
//! kind     u32      1 dataset, 2 pretrained pair, 3 personalized model, 4 network, 5 basis
//! count    u32      number of sections
//! section* tag (4 ASCII bytes), length u64, payload
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LORG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    Dataset = 1,
    Pretrained = 2,
    Model = 3,
    Network = 4,
    Basis = 5,
}

impl Kind {
    fn from_u32(v: u32) -> Result<Self> {
        Ok(match v {
            1 => Kind::Dataset,
            2 => Kind::Pretrained,
            3 => Kind::Model,
            4 => Kind::Network,
            5 => Kind::Basis,
            other => return Err(Error::Format(format!("unknown container kind {other}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Container {
    pub kind: Kind,
    pub version: u32,
    sections: Vec<([u8; 4], Vec<u8>)>,
}

impl Container {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            version: FORMAT_VERSION,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, tag: &[u8; 4], payload: Vec<u8>) {
        self.sections.push((*tag, payload));
    }

    pub fn section(&self, tag: &[u8; 4]) -> Result<&[u8]> {
        self.sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| Error::Format(format!("missing section {}", String::from_utf8_lossy(tag))))
    }

    pub fn sections<'a>(&'a self, tag: &'a [u8; 4]) -> impl Iterator<Item = &'a [u8]> + 'a {
        self.sections
            .iter()
            .filter(move |(t, _)| t == tag)
            .map(|(_, p)| p.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(&MAGIC);
        w.u32(self.version);
        w.u32(self.kind as u32);
        w.u32(self.sections.len() as u32);
        for (tag, payload) in &self.sections {
            w.bytes(tag);
            w.u64(payload.len() as u64);
            w.bytes(payload);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = Kind::from_u32(r.u32()?)?;
        let count = r.u32()? as usize;
        let mut sections = Vec::with_capacity(count);
        for _ in 0..count {
            let mut tag = [0u8; 4];
            tag.copy_from_slice(r.take(4)?);
            let len = r.u64()? as usize;
            sections.push((tag, r.take(len)?.to_vec()));
        }
        r.finish()?;
        Ok(Self {
            kind,
            version,
            sections,
        })
    }

    pub fn expect_kind(self, kind: Kind) -> Result<Self> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected {:?} container, found {:?}",
                kind, self.kind
            )));
        }
        Ok(self)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Default)]
pub struct ByteWriter(Vec<u8>);

impl ByteWriter {
    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
    pub fn f64s(&mut self, v: impl IntoIterator<Item = f64>) {
        for x in v {
            self.f64(x);
        }
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }
    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    /// Errors if unread bytes remain.
    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}
