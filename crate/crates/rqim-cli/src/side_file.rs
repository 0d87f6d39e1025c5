//! Binary side-information file for the histogram-shifting method.
//!
//! HS preprocessing is a keyed stateful transform: extraction and recovery
//! need the pair position, shift, peak/valley bins, payload length, and the
//! per-weight digit records. Layout (all integers little-endian):
//!
//! ```text
//! magic "RQHS" | version u8 | pair_index u8 | shift_v i32 | q u8
//! peak i16 | valley i16 | n_bits u64 | count u64
//! count records of: sign u8 (0 = +, 1 = -) | p u16 | q digit bytes
//! ```

use rqim_core::error::{Error, Result};
use rqim_core::hs::{DigitRecord, HsParams, HsSideInfo};

const MAGIC: &[u8; 4] = b"RQHS";
const VERSION: u8 = 1;

pub fn encode_side(info: &HsSideInfo) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + info.side.len() * (3 + info.q));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(info.pair_index as u8);
    out.extend_from_slice(&info.shift_v.to_le_bytes());
    out.push(info.q as u8);
    out.extend_from_slice(&info.params.peak.to_le_bytes());
    out.extend_from_slice(&info.params.valley.to_le_bytes());
    out.extend_from_slice(&info.n_bits.to_le_bytes());
    out.extend_from_slice(&(info.side.len() as u64).to_le_bytes());
    for record in &info.side {
        out.push(if record.sign < 0 { 1 } else { 0 });
        out.extend_from_slice(&(record.p as u16).to_le_bytes());
        out.extend_from_slice(&record.digits);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format("truncated side-information file".into()));
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_side(bytes: &[u8]) -> Result<HsSideInfo> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a side-information file (bad magic)".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported side-file version {version}")));
    }
    let pair_index = r.u8()? as usize;
    let shift_v = r.i32()?;
    let q = r.u8()? as usize;
    if q < 2 || pair_index < 1 || pair_index >= q {
        return Err(Error::Format(format!("inconsistent q = {q}, pair index = {pair_index}")));
    }
    let peak = r.i16()?;
    let valley = r.i16()?;
    let n_bits = r.u64()?;
    let count = r.u64()? as usize;
    let mut side = Vec::with_capacity(count);
    for _ in 0..count {
        let sign: i8 = match r.u8()? {
            0 => 1,
            1 => -1,
            other => return Err(Error::Format(format!("invalid sign byte {other}"))),
        };
        let p = r.u16()? as u32;
        let digits = r.take(q)?.to_vec();
        if digits.iter().any(|&d| d > 9) {
            return Err(Error::Format("digit byte out of range".into()));
        }
        side.push(DigitRecord { sign, p, digits });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes in side-information file".into()));
    }
    Ok(HsSideInfo { pair_index, shift_v, q, params: HsParams { peak, valley }, n_bits, side })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let info = HsSideInfo {
            pair_index: 3,
            shift_v: -2,
            q: 8,
            params: HsParams { peak: 17, valley: 19 },
            n_bits: 5,
            side: vec![
                DigitRecord { sign: 1, p: 0, digits: vec![1, 2, 3, 4, 5, 6, 7, 8] },
                DigitRecord { sign: -1, p: 3, digits: vec![9, 0, 0, 1, 2, 3, 4, 5] },
            ],
        };
        let bytes = encode_side(&info);
        let back = decode_side(&bytes).unwrap();
        assert_eq!(back.pair_index, info.pair_index);
        assert_eq!(back.shift_v, info.shift_v);
        assert_eq!(back.q, info.q);
        assert_eq!(back.params, info.params);
        assert_eq!(back.n_bits, info.n_bits);
        assert_eq!(back.side, info.side);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_side(b"XXXX").is_err());
        let info = HsSideInfo {
            pair_index: 1,
            shift_v: 0,
            q: 2,
            params: HsParams { peak: 0, valley: 1 },
            n_bits: 0,
            side: vec![],
        };
        let mut bytes = encode_side(&info);
        bytes.push(0); // trailing garbage
        assert!(decode_side(&bytes).is_err());
        let bytes = encode_side(&info);
        assert!(decode_side(&bytes[..bytes.len() - 1]).is_err());
    }
}
