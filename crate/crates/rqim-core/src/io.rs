//! Bit-exact persistence: the weight-tensor container, the text payload
//! codec, and CSV emission shared by the CLI.

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RQWT";
const VERSION: u8 = 1;

/// Stored element precision of a tensor. Arithmetic is always binary64;
/// binary32 covers are widened on read and narrowed on write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Binary32,
    Binary64,
}

impl Precision {
    pub fn dtype_byte(self) -> u8 {
        match self {
            Precision::Binary32 => 1,
            Precision::Binary64 => 2,
        }
    }

    pub fn from_dtype_byte(byte: u8) -> Result<Self> {
        match byte {
            1 => Ok(Precision::Binary32),
            2 => Ok(Precision::Binary64),
            other => Err(Error::Format(format!("unknown dtype byte {other}"))),
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            Precision::Binary32 => 4,
            Precision::Binary64 => 8,
        }
    }
}

/// A flat sequence of finite weights with its element precision tag.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub data: Vec<f64>,
    pub precision: Precision,
}

impl WeightTensor {
    pub fn new(data: Vec<f64>, precision: Precision) -> Result<Self> {
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite element {bad}")));
        }
        Ok(Self { data, precision })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Applies the stored precision: a binary32 tensor is narrowed the way a
    /// file write would narrow it.
    pub fn canonicalized(mut self) -> Self {
        if self.precision == Precision::Binary32 {
            for v in &mut self.data {
                *v = *v as f32 as f64;
            }
        }
        self
    }
}

/// Serializes a tensor into the container format
/// (magic `RQWT`, version, dtype, count u64, little-endian payload).
pub fn write_tensor(tensor: &WeightTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + tensor.len() * tensor.precision.element_size());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(tensor.precision.dtype_byte());
    out.extend_from_slice(&(tensor.len() as u64).to_le_bytes());
    match tensor.precision {
        Precision::Binary32 => {
            for &v in &tensor.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Precision::Binary64 => {
            for &v in &tensor.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn read_tensor(bytes: &[u8]) -> Result<WeightTensor> {
    if bytes.len() < 14 {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic (expected RQWT)".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let precision = Precision::from_dtype_byte(bytes[5])?;
    let count = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    read_payload(&bytes[14..], precision, count)
}

/// Imports a headerless little-endian float dump.
pub fn read_raw(bytes: &[u8], precision: Precision, count: Option<usize>) -> Result<WeightTensor> {
    let size = precision.element_size();
    let count = match count {
        Some(c) => c,
        None => {
            if bytes.len() % size != 0 {
                return Err(Error::Format(format!(
                    "raw dump of {} bytes is not a multiple of the element size {size}",
                    bytes.len()
                )));
            }
            bytes.len() / size
        }
    };
    read_payload(bytes, precision, count)
}

fn read_payload(payload: &[u8], precision: Precision, count: usize) -> Result<WeightTensor> {
    let size = precision.element_size();
    let expected = count
        .checked_mul(size)
        .ok_or_else(|| Error::Format("element count overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "truncated payload: expected {expected} bytes for {count} elements, got {}",
            payload.len()
        )));
    }
    let mut data = Vec::with_capacity(count);
    match precision {
        Precision::Binary32 => {
            for chunk in payload.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        Precision::Binary64 => {
            for chunk in payload.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    WeightTensor::new(data, precision)
}

// ------------------------------------------------------------ payload codec

/// A watermark payload: the data bits plus the |M|-ary symbol view.
/// `pad_bits` zero bits are appended when grouping into symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkMessage {
    /// Data bits, each 0 or 1, MSB-first per source byte.
    pub bits: Vec<u8>,
    pub m_card: u32,
    /// Trailing zero bits in the symbol view beyond `bits`.
    pub pad_bits: u32,
}

fn bits_per_symbol(m_card: u32) -> Result<u32> {
    if m_card < 2 || !m_card.is_power_of_two() {
        return Err(Error::Domain(format!(
            "alphabet size must be a power of two >= 2, got {m_card}"
        )));
    }
    Ok(m_card.trailing_zeros())
}

impl WatermarkMessage {
    pub fn from_bits(bits: Vec<u8>, m_card: u32) -> Result<Self> {
        let b = bits_per_symbol(m_card)?;
        if bits.iter().any(|&bit| bit > 1) {
            return Err(Error::Domain("bits must be 0 or 1".into()));
        }
        let pad_bits = (b - (bits.len() as u32 % b)) % b;
        Ok(Self { bits, m_card, pad_bits })
    }

    /// Symbol count L = ceil(bit count / log2 |M|).
    pub fn symbol_len(&self) -> usize {
        (self.bits.len() + self.pad_bits as usize) / bits_per_symbol(self.m_card).unwrap() as usize
    }

    /// The |M|-ary view: consecutive groups of log2|M| bits, MSB first.
    pub fn symbols(&self) -> Vec<u32> {
        let b = bits_per_symbol(self.m_card).unwrap() as usize;
        let mut padded = self.bits.clone();
        padded.resize(self.bits.len() + self.pad_bits as usize, 0);
        padded
            .chunks(b)
            .map(|chunk| chunk.iter().fold(0u32, |acc, &bit| (acc << 1) | bit as u32))
            .collect()
    }

    /// Rebuilds a message from an extracted symbol stream, assuming minimal
    /// byte-aligned padding.
    pub fn from_symbols(symbols: &[u32], m_card: u32) -> Result<Self> {
        let b = bits_per_symbol(m_card)?;
        if let Some(bad) = symbols.iter().find(|&&s| s >= m_card) {
            return Err(Error::Domain(format!("symbol {bad} out of range for |M| = {m_card}")));
        }
        let total = symbols.len() * b as usize;
        let pad_bits = (total % 8) as u32;
        let mut bits = Vec::with_capacity(total);
        for &s in symbols {
            for shift in (0..b).rev() {
                bits.push(((s >> shift) & 1) as u8);
            }
        }
        bits.truncate(total - pad_bits as usize);
        Ok(Self { bits, m_card, pad_bits })
    }
}

/// UTF-8 text to bit payload, MSB-first.
pub fn encode_message(text: &str, m_card: u32) -> Result<WatermarkMessage> {
    bits_per_symbol(m_card)?;
    let mut bits = Vec::with_capacity(text.len() * 8);
    for byte in text.bytes() {
        for shift in (0..8).rev() {
            bits.push((byte >> shift) & 1);
        }
    }
    WatermarkMessage::from_bits(bits, m_card)
}

/// Decodes the data bits back into text. The boolean is a corruption warning:
/// true when the byte-alignment remainder bits are nonzero.
pub fn decode_message(message: &WatermarkMessage) -> Result<(String, bool)> {
    let usable = message.bits.len() - message.bits.len() % 8;
    let suspicious = message.bits[usable..].iter().any(|&b| b != 0);
    let mut bytes = Vec::with_capacity(usable / 8);
    for chunk in message.bits[..usable].chunks_exact(8) {
        bytes.push(chunk.iter().fold(0u8, |acc, &bit| (acc << 1) | bit));
    }
    let text = String::from_utf8_lossy(&bytes).into_owned();
    Ok((text, suspicious))
}

/// On-disk message format: one pad-length byte, then the bits packed
/// MSB-first (zero-padded to a byte boundary).
pub fn pack_message_file(message: &WatermarkMessage) -> Vec<u8> {
    let n_bits = message.bits.len();
    let file_pad = (8 - n_bits % 8) % 8;
    let mut out = Vec::with_capacity(1 + n_bits.div_ceil(8));
    out.push(file_pad as u8);
    for chunk in message.bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &bit) in chunk.iter().enumerate() {
            byte |= bit << (7 - i);
        }
        out.push(byte);
    }
    out
}

pub fn unpack_message_file(bytes: &[u8], m_card: u32) -> Result<WatermarkMessage> {
    let Some((&file_pad, packed)) = bytes.split_first() else {
        return Err(Error::Format("empty message file".into()));
    };
    if file_pad >= 8 {
        return Err(Error::Format(format!("invalid pad length {file_pad}")));
    }
    let total = packed.len() * 8;
    if (file_pad as usize) > total {
        return Err(Error::Format("pad length exceeds payload".into()));
    }
    let n_bits = total - file_pad as usize;
    let mut bits = Vec::with_capacity(n_bits);
    for (i, &byte) in packed.iter().enumerate() {
        for shift in (0..8).rev() {
            if i * 8 + (7 - shift) < n_bits {
                bits.push((byte >> shift) & 1);
            }
        }
    }
    WatermarkMessage::from_bits(bits, m_card)
}

// ----------------------------------------------------------------------- csv

/// Shortest round-trip decimal form (1.0 -> "1", 0.1 -> "0.1").
pub fn csv_float(value: f64) -> String {
    format!("{value}")
}

/// RFC-4180-style serialization with deterministic byte output.
pub fn write_csv(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let width = rows.first().map(|r| r.len());
    let mut out = Vec::new();
    for row in rows {
        if Some(row.len()) != width {
            return Err(Error::Format(format!(
                "ragged csv row: expected {} fields, got {}",
                width.unwrap_or(0),
                row.len()
            )));
        }
        let mut first = true;
        for field in row {
            if !first {
                out.push(b',');
            }
            first = false;
            if field.contains([',', '"', '\n', '\r']) {
                out.push(b'"');
                out.extend_from_slice(field.replace('"', "\"\"").as_bytes());
                out.push(b'"');
            } else {
                out.extend_from_slice(field.as_bytes());
            }
        }
        out.push(b'\n');
    }
    Ok(out)
}
