//! Little-endian read/write helpers shared by the payload codecs.

use byteorder::{ReadBytesExt, WriteBytesExt, LE};

use crate::action::Pose;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("payload truncated")]
    Truncated,
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid {what}: {value}")]
    Invalid { what: &'static str, value: u64 },
    #[error("string is not utf-8")]
    Utf8,
    #[error("non-unit or non-canonical quaternion")]
    Quaternion,
    #[error("image {id}: {detail}")]
    Image { id: String, detail: String },
}

impl From<std::io::Error> for DecodeError {
    fn from(_: std::io::Error) -> Self {
        DecodeError::Truncated
    }
}

pub(crate) fn invalid(what: &'static str, value: impl Into<u64>) -> DecodeError {
    DecodeError::Invalid {
        what,
        value: value.into(),
    }
}

pub(crate) trait PutExt {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u32(&mut self, v: u32);
    fn put_u64(&mut self, v: u64);
    fn put_f64(&mut self, v: f64);
    fn put_str8(&mut self, s: &str);
    fn put_pose(&mut self, p: &Pose);
}

impl PutExt for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }
    fn put_u16(&mut self, v: u16) {
        self.write_u16::<LE>(v).expect("vec write");
    }
    fn put_u32(&mut self, v: u32) {
        self.write_u32::<LE>(v).expect("vec write");
    }
    fn put_u64(&mut self, v: u64) {
        self.write_u64::<LE>(v).expect("vec write");
    }
    fn put_f64(&mut self, v: f64) {
        self.write_f64::<LE>(v).expect("vec write");
    }
    /// u8 length prefix; longer strings are truncated at a char boundary.
    fn put_str8(&mut self, s: &str) {
        let mut end = s.len().min(255);
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        self.push(end as u8);
        self.extend_from_slice(&s.as_bytes()[..end]);
    }
    /// position xyz then quaternion wxyz, seven f64
    fn put_pose(&mut self, p: &Pose) {
        for v in p.position().iter() {
            self.put_f64(*v);
        }
        for v in p.wxyz() {
            self.put_f64(v);
        }
    }
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.buf.read_u8()?)
    }
    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(self.buf.read_u16::<LE>()?)
    }
    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(self.buf.read_u32::<LE>()?)
    }
    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(self.buf.read_u64::<LE>()?)
    }
    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(self.buf.read_f64::<LE>()?)
    }
    pub fn f64s<const N: usize>(&mut self) -> Result<[f64; N], DecodeError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64()?;
        }
        Ok(out)
    }
    pub fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(invalid("bool", v)),
        }
    }
    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    pub fn str8(&mut self) -> Result<String, DecodeError> {
        let n = self.u8()? as usize;
        let b = self.bytes(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| DecodeError::Utf8)
    }
    pub fn pose(&mut self) -> Result<Pose, DecodeError> {
        let p = self.f64s::<3>()?;
        let q = self.f64s::<4>()?;
        Pose::from_canonical_parts(p, q).ok_or(DecodeError::Quaternion)
    }
    pub fn rest(&mut self) -> &'a [u8] {
        std::mem::take(&mut self.buf)
    }
    pub fn finish(self) -> Result<(), DecodeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::Trailing(self.buf.len()))
        }
    }
}
