//! Big-endian fixed-width wire formats.

use crate::error::{invalid, Error, Result};
use crate::geometry::Vector;

pub const FORMAT_VERSION: u8 = 0x01;

/// Cursor over a byte slice that reports the offset of the first failure.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn err(&self, reason: &'static str) -> Error {
        Error::Decode { position: self.pos, reason }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("truncated buffer"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let at = self.pos;
        let v = f64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::Decode { position: at, reason: "non-finite coordinate" });
        }
        Ok(v)
    }

    pub(crate) fn version(&mut self) -> Result<()> {
        if self.u8()? != FORMAT_VERSION {
            self.pos -= 1;
            return Err(self.err("unsupported format version"));
        }
        Ok(())
    }

    /// u16 dimension followed by that many coordinates.
    pub(crate) fn vector(&mut self) -> Result<Vector> {
        let at = self.pos;
        let dim = self.u16()? as usize;
        if dim == 0 {
            return Err(Error::Decode { position: at, reason: "zero dimension" });
        }
        let coords = (0..dim).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Vector::from_raw(coords))
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

pub(crate) fn put_u16_len(out: &mut Vec<u8>, len: usize, what: &str) -> Result<()> {
    let v = u16::try_from(len).map_err(|_| invalid(format!("{what} of {len} exceeds 65535")))?;
    out.extend_from_slice(&v.to_be_bytes());
    Ok(())
}

pub(crate) fn put_u32_len(out: &mut Vec<u8>, len: usize, what: &str) -> Result<()> {
    let v = u32::try_from(len).map_err(|_| invalid(format!("{what} of {len} exceeds u32")))?;
    out.extend_from_slice(&v.to_be_bytes());
    Ok(())
}

pub(crate) fn put_vector(out: &mut Vec<u8>, v: &Vector) -> Result<()> {
    put_u16_len(out, v.dim(), "dimension")?;
    for c in v.as_slice() {
        out.extend_from_slice(&c.to_be_bytes());
    }
    Ok(())
}

/// `0x01 || u16 pk len || pk || u16 dim || f64 coords`, all big-endian.
pub fn encode_report(pk: &[u8], report: &Vector) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(5 + pk.len() + 8 * report.dim());
    out.push(FORMAT_VERSION);
    put_u16_len(&mut out, pk.len(), "public key length")?;
    out.extend_from_slice(pk);
    put_vector(&mut out, report)?;
    Ok(out)
}

pub fn decode_report(bytes: &[u8]) -> Result<(Vec<u8>, Vector)> {
    let mut r = Reader::new(bytes);
    r.version()?;
    let len = r.u16()? as usize;
    let pk = r.take(len)?.to_vec();
    let v = r.vector()?;
    r.finish()?;
    Ok((pk, v))
}

/// `0x01 || u32 length || payload`.
pub fn frame(payload: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.push(FORMAT_VERSION);
    put_u32_len(&mut out, payload.len(), "ciphertext")?;
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn unframe(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader::new(bytes);
    r.version()?;
    let len = r.u32()? as usize;
    let body = r.take(len)?.to_vec();
    r.finish()?;
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn report_length() {
        let buf = encode_report(&[7u8; 32], &Vector::new(vec![1.0, -1.0]).unwrap()).unwrap();
        assert_eq!(buf.len(), 53);
        assert_eq!(&buf[..3], &[0x01, 0x00, 0x20]);
        assert_eq!(&buf[35..37], &[0x00, 0x02]);
        assert_eq!(&buf[37..45], &1.0f64.to_be_bytes());
    }

    #[test]
    fn truncated_is_error() {
        let buf = encode_report(&[1, 2, 3], &Vector::new(vec![0.5]).unwrap()).unwrap();
        for cut in 0..buf.len() {
            assert!(matches!(decode_report(&buf[..cut]), Err(Error::Decode { .. })));
        }
    }

    #[test]
    fn decode_errors_carry_position() {
        let mut buf = encode_report(&[1, 2], &Vector::new(vec![0.5, 0.25]).unwrap()).unwrap();
        buf[0] = 2;
        assert!(matches!(decode_report(&buf), Err(Error::Decode { position: 0, .. })));
        buf[0] = 1;
        buf[15..23].copy_from_slice(&f64::NAN.to_be_bytes());
        assert!(matches!(decode_report(&buf), Err(Error::Decode { position: 15, .. })));
        let mut long = encode_report(&[1], &Vector::new(vec![0.5]).unwrap()).unwrap();
        long.push(0);
        assert!(matches!(decode_report(&long), Err(Error::Decode { position: 14, .. })));
    }

    #[test]
    fn framing() {
        let f = frame(b"abc").unwrap();
        assert_eq!(f, vec![1, 0, 0, 0, 3, b'a', b'b', b'c']);
        assert_eq!(unframe(&f).unwrap(), b"abc");
        assert!(unframe(&f[..6]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn report_round_trip(
            pk in prop::collection::vec(any::<u8>(), 0..100),
            coords in prop::collection::vec(
                any::<f64>().prop_filter("finite", |c| c.is_finite()), 1..20),
        ) {
            let v = Vector::new(coords).unwrap();
            let buf = encode_report(&pk, &v).unwrap();
            let (pk2, v2) = decode_report(&buf).unwrap();
            prop_assert_eq!(pk2, pk);
            let bits = |x: &Vector| x.as_slice().iter().map(|c| c.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&v2), bits(&v));
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_report(&bytes);
            let _ = unframe(&bytes);
        }
    }
}
