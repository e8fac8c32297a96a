//! Binary checkpoint format for parameter vectors.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ANISO1"
//! u32                      segment count
//! per segment: u16 name length, name bytes (UTF-8), u32 start, u32 len
//! f64 × Σ len              values
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::params::{ParamError, ParamVector, Segment};

pub const MAGIC: &[u8; 6] = b"ANISO1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated checkpoint at byte {offset}")]
    Truncated { offset: usize },
    #[error("segment name at byte {offset} is not UTF-8")]
    BadName { offset: usize },
    #[error("segment name `{0}` exceeds 65535 bytes")]
    NameTooLong(String),
    #[error(transparent)]
    Layout(#[from] ParamError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(theta: &ParamVector) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::with_capacity(16 + theta.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(theta.layout().len() as u32).to_le_bytes());
    for seg in theta.layout() {
        let name = seg.name.as_bytes();
        let len = u16::try_from(name.len()).map_err(|_| CheckpointError::NameTooLong(seg.name.clone()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(seg.start as u32).to_le_bytes());
        out.extend_from_slice(&(seg.len as u32).to_le_bytes());
    }
    for v in theta.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated { offset: self.pos });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamVector, CheckpointError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(MAGIC.len()).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let count = c.u32()? as usize;
    let mut layout = Vec::with_capacity(count.min(1 << 16));
    let mut total = 0usize;
    for _ in 0..count {
        let name_len = c.u16()? as usize;
        let offset = c.pos;
        let name = std::str::from_utf8(c.take(name_len)?).map_err(|_| CheckpointError::BadName { offset })?;
        let start = c.u32()? as usize;
        let len = c.u32()? as usize;
        total = total.saturating_add(len);
        layout.push(Segment {
            name: name.to_string(),
            start,
            len,
        });
    }
    let payload = c.take(total.checked_mul(8).ok_or(CheckpointError::Truncated { offset: c.pos })?)?;
    let values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(ParamVector::with_layout(values, layout)?)
}

pub fn write_params<W: Write>(theta: &ParamVector, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(&encode(theta)?)?;
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<ParamVector, CheckpointError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_bytes() {
        let p = ParamVector::from_segments(vec![("w", vec![1.5])]);
        let bytes = encode(&p).unwrap();
        let mut expect = b"ANISO1".to_vec();
        expect.extend_from_slice(&[1, 0, 0, 0, 1, 0, b'w', 0, 0, 0, 0, 1, 0, 0, 0]);
        expect.extend_from_slice(&1.5f64.to_le_bytes());
        assert_eq!(bytes, expect);
        assert_eq!(decode(&bytes).unwrap(), p);
    }

    #[test]
    fn truncation_and_magic_errors() {
        let p = ParamVector::from_segments(vec![("w", vec![1.0, 2.0])]);
        let bytes = encode(&p).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(CheckpointError::BadMagic)));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            segs in proptest::collection::vec(("[a-z.0-9]{1,12}", proptest::collection::vec(any::<f64>(), 0..6)), 0..5)
        ) {
            let p = ParamVector::from_segments(segs);
            let back = decode(&encode(&p).unwrap()).unwrap();
            prop_assert_eq!(back.layout(), p.layout());
            let a: Vec<u64> = p.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
