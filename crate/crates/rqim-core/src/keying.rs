//! Deterministic embedding-location construction and side-information files.
//!
//! The location sequence is the prefix of a Fisher-Yates shuffle driven by
//! SplitMix64, fixed by constant so sequences are portable test vectors.
//! The scaling factor α travels in its own file: extraction rights can be
//! granted without recovery rights.

use crate::error::{Error, Result};

/// The owner's secret key `sk = [k, cl, Δ]` (α deliberately excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecretKey {
    pub k: f64,
    pub cl: u64,
    pub delta: f64,
}

/// Public-ish watermark info `w_info = [L, |M|]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatermarkInfo {
    pub length: u64,
    pub m_card: u32,
}

/// `L` distinct cover indices, a deterministic function of (cl, L, N).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationSequence {
    pub indices: Vec<usize>,
}

/// SplitMix64 with the standard constants.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// First `count` outputs of a partial Fisher-Yates shuffle of `[0, cover_len)`
/// seeded with `clue`. Bit-identical on every platform.
pub fn construct_locations(clue: u64, count: usize, cover_len: usize) -> Result<LocationSequence> {
    if count > cover_len {
        return Err(Error::Capacity(format!(
            "cannot select {count} locations from a cover of {cover_len}"
        )));
    }
    let mut rng = SplitMix64::new(clue);
    let mut pool: Vec<usize> = (0..cover_len).collect();
    for i in 0..count {
        let remaining = (cover_len - i) as u64;
        let j = i + (rng.next_u64() % remaining) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    Ok(LocationSequence { indices: pool })
}

// ---------------------------------------------------------------- key files

/// Formats a finite f64 as a lowercase hexadecimal float literal, bit-exact
/// on round trip.
pub fn format_hex_f64(value: f64) -> String {
    assert!(value.is_finite(), "only finite values are serialized");
    let bits = value.to_bits();
    if value == 0.0 {
        return if bits >> 63 == 1 { "-0x0p+0".into() } else { "0x0p+0".into() };
    }
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let raw_exp = ((bits >> 52) & 0x7FF) as i64;
    let frac = bits & 0x000F_FFFF_FFFF_FFFF;
    let (lead, exp, frac) = if raw_exp == 0 {
        // subnormal: keep the 0x0. form at the minimum exponent
        ("0", -1022i64, frac)
    } else {
        ("1", raw_exp - 1023, frac)
    };
    let mut hex = format!("{frac:013x}");
    while hex.len() > 1 && hex.ends_with('0') {
        hex.pop();
    }
    if frac == 0 {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{hex}p{exp:+}")
    }
}

/// Parses either a hexadecimal float literal or a plain decimal float.
pub fn parse_float(text: &str) -> Result<f64> {
    let text = text.trim();
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, text),
    };
    let Some(body) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return body
            .parse::<f64>()
            .map(|v| sign * v)
            .map_err(|_| Error::Parse(format!("invalid float literal `{text}`")));
    };
    let (mantissa, exp) = body
        .split_once(['p', 'P'])
        .ok_or_else(|| Error::Parse(format!("hex float `{text}` is missing a p-exponent")))?;
    let exp: i64 = exp
        .parse()
        .map_err(|_| Error::Parse(format!("invalid exponent in `{text}`")))?;
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("empty mantissa in `{text}`")));
    }
    let mut mant: u128 = 0;
    for ch in int_part.chars().chain(frac_part.chars()) {
        let digit = ch
            .to_digit(16)
            .ok_or_else(|| Error::Parse(format!("invalid hex digit `{ch}` in `{text}`")))?;
        mant = mant
            .checked_mul(16)
            .and_then(|m| m.checked_add(digit as u128))
            .ok_or_else(|| Error::Parse(format!("mantissa overflow in `{text}`")))?;
    }
    let scale = exp - 4 * frac_part.len() as i64;
    let mut value = mant as f64;
    // two-step power-of-two scaling to stay in range mid-computation
    let mut remaining = scale;
    while remaining > 0 {
        let step = remaining.min(512);
        value *= 2f64.powi(step as i32);
        remaining -= step;
    }
    while remaining < 0 {
        let step = (-remaining).min(512);
        value /= 2f64.powi(step as i32);
        remaining += step;
    }
    Ok(sign * value)
}

fn parse_kv_lines<'a>(text: &'a str, what: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("{what}: line {}: expected `name = value`", lineno + 1))
        })?;
        pairs.push((name.trim(), value.trim()));
    }
    Ok(pairs)
}

pub fn serialize_key(key: &SecretKey) -> String {
    format!(
        "version = 1\nk = {}\ncl = {}\ndelta = {}\n",
        format_hex_f64(key.k),
        key.cl,
        format_hex_f64(key.delta)
    )
}

pub fn parse_key(text: &str) -> Result<SecretKey> {
    let mut k = None;
    let mut cl = None;
    let mut delta = None;
    for (name, value) in parse_kv_lines(text, "key file")? {
        match name {
            "version" => {
                if value != "1" {
                    return Err(Error::Parse(format!("key file: unsupported version {value}")));
                }
            }
            "k" => k = Some(parse_float(value)?),
            "cl" => {
                cl = Some(value.parse::<u64>().map_err(|_| {
                    Error::Parse(format!("key file: invalid clue `{value}`"))
                })?)
            }
            "delta" => delta = Some(parse_float(value)?),
            other => return Err(Error::Parse(format!("key file: unknown field `{other}`"))),
        }
    }
    Ok(SecretKey {
        k: k.ok_or_else(|| Error::Parse("key file: missing field `k`".into()))?,
        cl: cl.ok_or_else(|| Error::Parse("key file: missing field `cl`".into()))?,
        delta: delta.ok_or_else(|| Error::Parse("key file: missing field `delta`".into()))?,
    })
}

pub fn serialize_info(info: &WatermarkInfo) -> String {
    format!("version = 1\nlength = {}\nm_card = {}\n", info.length, info.m_card)
}

pub fn parse_info(text: &str) -> Result<WatermarkInfo> {
    let mut length = None;
    let mut m_card = None;
    for (name, value) in parse_kv_lines(text, "info file")? {
        match name {
            "version" => {
                if value != "1" {
                    return Err(Error::Parse(format!("info file: unsupported version {value}")));
                }
            }
            "length" => {
                length = Some(value.parse::<u64>().map_err(|_| {
                    Error::Parse(format!("info file: invalid length `{value}`"))
                })?)
            }
            "m_card" => {
                m_card = Some(value.parse::<u32>().map_err(|_| {
                    Error::Parse(format!("info file: invalid m_card `{value}`"))
                })?)
            }
            other => return Err(Error::Parse(format!("info file: unknown field `{other}`"))),
        }
    }
    let info = WatermarkInfo {
        length: length.ok_or_else(|| Error::Parse("info file: missing field `length`".into()))?,
        m_card: m_card.ok_or_else(|| Error::Parse("info file: missing field `m_card`".into()))?,
    };
    if info.m_card < 2 {
        return Err(Error::Parse("info file: m_card must be >= 2".into()));
    }
    Ok(info)
}

pub fn serialize_alpha(alpha: f64) -> String {
    format!("version = 1\nalpha = {}\n", format_hex_f64(alpha))
}

pub fn parse_alpha(text: &str) -> Result<f64> {
    let mut alpha = None;
    for (name, value) in parse_kv_lines(text, "alpha file")? {
        match name {
            "version" => {
                if value != "1" {
                    return Err(Error::Parse(format!("alpha file: unsupported version {value}")));
                }
            }
            "alpha" => alpha = Some(parse_float(value)?),
            other => return Err(Error::Parse(format!("alpha file: unknown field `{other}`"))),
        }
    }
    alpha.ok_or_else(|| Error::Parse("alpha file: missing field `alpha`".into()))
}
