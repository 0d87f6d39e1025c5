//! Histogram-shifting baseline: digit-pair preprocessing of floating-point
//! weights into integers in [-99, 99], HS embed/extract/recover, and the
//! peak-count capacity rule.
//!
//! Preprocessing is a keyed, stateful transform: the per-weight side records
//! (sign, leading-zero count, digit string) are required to invert it.

use crate::error::{Error, Result};

/// Decimal decomposition of one weight `±0.0…0 n₁n₂…n_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitRecord {
    /// +1 or -1.
    pub sign: i8,
    /// Leading zeros after the decimal point (0 for the zero weight).
    pub p: u32,
    /// The q significant digits, each 0..=9.
    pub digits: Vec<u8>,
}

/// Peak and valley bins bounding the shifted interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsParams {
    pub peak: i16,
    pub valley: i16,
}

/// Index partition relative to the peak (Region i: below, ii: at, iii: above).
#[derive(Debug, Clone, Default)]
pub struct RegionMasks {
    pub region_i: Vec<usize>,
    pub region_ii: Vec<usize>,
    pub region_iii: Vec<usize>,
}

pub fn region_masks(host: &[i16], peak: i16) -> RegionMasks {
    let mut masks = RegionMasks::default();
    for (i, &h) in host.iter().enumerate() {
        if h < peak {
            masks.region_i.push(i);
        } else if h == peak {
            masks.region_ii.push(i);
        } else {
            masks.region_iii.push(i);
        }
    }
    masks
}

/// Integer host plus everything needed to invert the preprocessing.
#[derive(Debug, Clone)]
pub struct PreprocessedHost {
    /// Host values, each in [-99, 99].
    pub host: Vec<i16>,
    /// Chosen digit-pair position c (1-based); the pair is (n_c, n_{c+1}).
    pub pair_index: usize,
    /// The adjustable shift V applied after the sign.
    pub shift_v: i32,
    /// Digit count q.
    pub q: usize,
    /// Per-weight digit records.
    pub side: Vec<DigitRecord>,
    /// Source weights, returned verbatim by [`deprocess`] for untouched
    /// entries. Empty when reconstructing from persisted side information.
    pub originals: Vec<f64>,
}

const MAX_Q: usize = 12;

/// Decomposes `w` into sign, leading-zero count and its first `q` significant
/// decimal digits (correctly rounded at digit q).
pub fn decompose_weight(w: f64, q: usize) -> Result<DigitRecord> {
    if !(2..=MAX_Q).contains(&q) {
        return Err(Error::Domain(format!("digit count q must be in 2..={MAX_Q}, got {q}")));
    }
    if !w.is_finite() {
        return Err(Error::Domain(format!("non-finite weight {w}")));
    }
    let a = w.abs();
    if a >= 1.0 {
        return Err(Error::Domain(format!("weight {w} is outside the form ±0.00…0n₁n₂…")));
    }
    if a == 0.0 {
        return Ok(DigitRecord { sign: 1, p: 0, digits: vec![0; q] });
    }
    let sign = if w < 0.0 { -1 } else { 1 };
    // "{:.*e}" rounds correctly to q significant digits, e.g. 0.00347 -> "3.470e-3".
    let text = format!("{:.*e}", q - 1, a);
    let (mantissa, exponent) = text
        .split_once('e')
        .ok_or_else(|| Error::Domain(format!("unexpected float format {text}")))?;
    let exponent: i32 = exponent
        .parse()
        .map_err(|_| Error::Domain(format!("unexpected exponent in {text}")))?;
    if exponent >= 0 {
        // e.g. 0.99999999995 at q = 8 rounds up to 1.0.
        return Err(Error::Domain(format!("weight {w} rounds to magnitude >= 1 at q = {q}")));
    }
    let digits: Vec<u8> = mantissa
        .bytes()
        .filter(|b| b.is_ascii_digit())
        .map(|b| b - b'0')
        .collect();
    debug_assert_eq!(digits.len(), q);
    Ok(DigitRecord { sign, p: (-exponent - 1) as u32, digits })
}

/// Reassembles `±0.0…0 n₁…n_q` as the nearest binary64.
pub fn compose_weight(record: &DigitRecord) -> f64 {
    if record.digits.iter().all(|&d| d == 0) {
        return 0.0;
    }
    let mut text = String::with_capacity(record.p as usize + record.digits.len() + 3);
    if record.sign < 0 {
        text.push('-');
    }
    text.push_str("0.");
    for _ in 0..record.p {
        text.push('0');
    }
    for &d in &record.digits {
        text.push((b'0' + d) as char);
    }
    text.parse().expect("constructed decimal always parses")
}

fn pair_value(digits: &[u8], c: usize) -> i32 {
    10 * digits[c - 1] as i32 + digits[c] as i32
}

/// Picks the pair position c in 1..q minimizing the empirical Shannon entropy
/// of the two-digit value across the host; ties go to the smallest c.
pub fn select_pair_index(side: &[DigitRecord], q: usize) -> Result<usize> {
    if q < 2 {
        return Err(Error::Domain("q must be at least 2".into()));
    }
    if side.is_empty() {
        return Err(Error::Domain("empty host".into()));
    }
    let mut best_c = 1usize;
    let mut best_entropy = f64::INFINITY;
    for c in 1..q {
        let mut counts = [0usize; 100];
        for record in side {
            counts[pair_value(&record.digits, c) as usize] += 1;
        }
        let n = side.len() as f64;
        let entropy: f64 = counts
            .iter()
            .filter(|&&cnt| cnt > 0)
            .map(|&cnt| {
                let p = cnt as f64 / n;
                -p * p.log2()
            })
            .sum();
        if entropy < best_entropy {
            best_entropy = entropy;
            best_c = c;
        }
    }
    Ok(best_c)
}

/// Digit-pair preprocessing with the min-entropy pair position.
pub fn preprocess(weights: &[f64], q: usize, shift_v: i32) -> Result<PreprocessedHost> {
    let side: Vec<DigitRecord> = weights
        .iter()
        .map(|&w| decompose_weight(w, q))
        .collect::<Result<_>>()?;
    let c = select_pair_index(&side, q)?;
    preprocess_at(weights, side, q, shift_v, c)
}

/// Same as [`preprocess`] but with a caller-fixed pair position.
pub fn preprocess_with_index(
    weights: &[f64],
    q: usize,
    shift_v: i32,
    pair_index: usize,
) -> Result<PreprocessedHost> {
    if pair_index < 1 || pair_index >= q {
        return Err(Error::Domain(format!("pair index {pair_index} not in 1..{q}")));
    }
    let side: Vec<DigitRecord> = weights
        .iter()
        .map(|&w| decompose_weight(w, q))
        .collect::<Result<_>>()?;
    preprocess_at(weights, side, q, shift_v, pair_index)
}

fn preprocess_at(
    weights: &[f64],
    side: Vec<DigitRecord>,
    q: usize,
    shift_v: i32,
    c: usize,
) -> Result<PreprocessedHost> {
    let mut host = Vec::with_capacity(side.len());
    for record in &side {
        let h = record.sign as i32 * pair_value(&record.digits, c) + shift_v;
        if !(-99..=99).contains(&h) {
            return Err(Error::Range(format!(
                "host value {h} outside [-99, 99]; choose a different V (current V = {shift_v})"
            )));
        }
        host.push(h as i16);
    }
    Ok(PreprocessedHost {
        host,
        pair_index: c,
        shift_v,
        q,
        side,
        originals: weights.to_vec(),
    })
}

/// Inverts the preprocessing: writes the (possibly modified) pair digits back
/// into each stored digit string. Untouched entries reproduce the source
/// weight verbatim when it is available.
pub fn deprocess(pre: &PreprocessedHost) -> Result<Vec<f64>> {
    let c = pre.pair_index;
    let mut out = Vec::with_capacity(pre.host.len());
    for (i, (&h, record)) in pre.host.iter().zip(pre.side.iter()).enumerate() {
        let pv = h as i32 - pre.shift_v;
        if pv.abs() > 99 {
            return Err(Error::Corruption(format!(
                "host value {h} cannot be re-digitized (|h - V| = {} > 99)",
                pv.abs()
            )));
        }
        let pair = pv.unsigned_abs();
        // A zero pair erases the sign in the host encoding; fall back to the
        // recorded one.
        let sign = if pair != 0 { pv.signum() as i8 } else { record.sign };
        let mut digits = record.digits.clone();
        digits[c - 1] = (pair / 10) as u8;
        digits[c] = (pair % 10) as u8;
        if sign == record.sign && digits == record.digits {
            if let Some(&orig) = pre.originals.get(i) {
                out.push(orig);
                continue;
            }
        }
        out.push(compose_weight(&DigitRecord { sign, p: record.p, digits }));
    }
    Ok(out)
}

/// Peak = most frequent bin (ties to the smallest value, bin 99 excluded so
/// an embedded 1 cannot overflow); valley = smallest vacant bin above it.
pub fn choose_peak_valley(host: &[i16]) -> Result<HsParams> {
    if host.is_empty() {
        return Err(Error::Domain("empty host".into()));
    }
    let mut counts = [0usize; 199];
    for &h in host {
        counts[(h as i32 + 99) as usize] += 1;
    }
    let mut peak = None;
    let mut peak_count = 0usize;
    for v in -99i32..=98 {
        let cnt = counts[(v + 99) as usize];
        if cnt > peak_count {
            peak_count = cnt;
            peak = Some(v);
        }
    }
    let peak = peak.ok_or_else(|| Error::Domain("no admissible peak bin below 99".into()))?;
    for v in (peak + 1)..=99 {
        if counts[(v + 99) as usize] == 0 {
            return Ok(HsParams { peak: peak as i16, valley: v as i16 });
        }
    }
    Err(Error::NoValley(format!(
        "no zero-count bin to the right of the peak {peak}; choose a different V"
    )))
}

/// Shifts the interior interval right by one and writes each bit onto a
/// peak-valued entry, in index order.
pub fn hs_embed(host: &[i16], bits: &[u8], params: &HsParams) -> Result<Vec<i16>> {
    let capacity = host.iter().filter(|&&h| h == params.peak).count();
    if bits.len() > capacity {
        return Err(Error::Capacity(format!(
            "{} bits exceed the peak-bin capacity {capacity}",
            bits.len()
        )));
    }
    let mut next_bit = bits.iter();
    let out = host
        .iter()
        .map(|&h| {
            if h == params.peak {
                match next_bit.next() {
                    Some(&b) => h + b as i16,
                    None => h,
                }
            } else if h > params.peak && h < params.valley {
                h + 1
            } else {
                h
            }
        })
        .collect();
    Ok(out)
}

/// Reads bits back: peak -> 0, peak+1 -> 1, in index order. The caller trims
/// to the known payload length.
pub fn hs_extract(host: &[i16], params: &HsParams) -> Vec<u8> {
    host.iter()
        .filter_map(|&h| {
            if h == params.peak {
                Some(0)
            } else if h == params.peak + 1 {
                Some(1)
            } else {
                None
            }
        })
        .collect()
}

/// Undoes [`hs_embed`]: values in (peak, valley] decrement by one.
pub fn hs_recover(host: &[i16], params: &HsParams) -> Vec<i16> {
    host.iter()
        .map(|&h| {
            if h > params.peak && h <= params.valley {
                h - 1
            } else {
                h
            }
        })
        .collect()
}

/// Maximum watermark length: the count of the most frequent admissible bin.
pub fn hs_capacity(host: &[i16]) -> usize {
    let mut counts = [0usize; 199];
    for &h in host {
        counts[(h as i32 + 99) as usize] += 1;
    }
    counts[..198].iter().copied().max().unwrap_or(0)
}

/// Everything the file-based HS workflow must persist to extract and restore
/// later.
#[derive(Debug, Clone)]
pub struct HsSideInfo {
    pub pair_index: usize,
    pub shift_v: i32,
    pub q: usize,
    pub params: HsParams,
    pub n_bits: u64,
    pub side: Vec<DigitRecord>,
}

/// End-to-end HS marking: preprocess with an automatic search over
/// V ∈ [-9, 9] when the default V = 0 hits a range or no-valley error, embed,
/// and reassemble the watermarked weights.
pub fn hs_mark(weights: &[f64], bits: &[u8], q: usize) -> Result<(Vec<f64>, HsSideInfo)> {
    let mut last_err = None;
    for v in shift_candidates() {
        let pre = match preprocess(weights, q, v) {
            Ok(pre) => pre,
            Err(e @ (Error::Range(_) | Error::NoValley(_))) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let params = match choose_peak_valley(&pre.host) {
            Ok(p) => p,
            Err(e @ (Error::NoValley(_) | Error::Domain(_))) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let embedded = hs_embed(&pre.host, bits, &params)?;
        let mut marked = pre.clone();
        marked.host = embedded;
        let watermarked = deprocess(&marked)?;
        let info = HsSideInfo {
            pair_index: pre.pair_index,
            shift_v: v,
            q,
            params,
            n_bits: bits.len() as u64,
            side: pre.side,
        };
        return Ok((watermarked, info));
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("empty host".into())))
}

fn shift_candidates() -> impl Iterator<Item = i32> {
    std::iter::once(0).chain((-9..=9).filter(|&v| v != 0))
}

/// Rebuilds the integer host from a (possibly watermarked) tensor using the
/// stored leading-zero counts, so digit positions stay unambiguous even when
/// an embedding shift changed the leading pair digit.
pub fn host_from_tensor(weights: &[f64], info: &HsSideInfo) -> Result<Vec<i16>> {
    if weights.len() != info.side.len() {
        return Err(Error::Format(format!(
            "tensor has {} elements but side information covers {}",
            weights.len(),
            info.side.len()
        )));
    }
    let c = info.pair_index;
    let q = info.q;
    let mut host = Vec::with_capacity(weights.len());
    for (&w, record) in weights.iter().zip(info.side.iter()) {
        if !w.is_finite() {
            return Err(Error::Format(format!("non-finite weight {w}")));
        }
        let scaled = w.abs() * 10f64.powi(record.p as i32 + q as i32);
        let all_digits = scaled.round() as u64;
        let pair = ((all_digits / 10u64.pow((q - c - 1) as u32)) % 100) as i32;
        let sign = if w < 0.0 { -1 } else { 1 };
        let h = sign * pair + info.shift_v;
        if !(-99..=99).contains(&h) {
            return Err(Error::Corruption(format!("reconstructed host value {h} out of range")));
        }
        host.push(h as i16);
    }
    Ok(host)
}

/// Extracts the payload bits from a watermarked tensor.
pub fn hs_extract_tensor(weights: &[f64], info: &HsSideInfo) -> Result<Vec<u8>> {
    let host = host_from_tensor(weights, info)?;
    let mut bits = hs_extract(&host, &info.params);
    bits.truncate(info.n_bits as usize);
    Ok(bits)
}

/// Recovers the original weights (to q significant digits) from a
/// watermarked tensor.
pub fn hs_restore_tensor(weights: &[f64], info: &HsSideInfo) -> Result<Vec<f64>> {
    let host = host_from_tensor(weights, info)?;
    let recovered = hs_recover(&host, &info.params);
    let pre = PreprocessedHost {
        host: recovered,
        pair_index: info.pair_index,
        shift_v: info.shift_v,
        q: info.q,
        side: info.side.clone(),
        originals: Vec::new(),
    };
    deprocess(&pre)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn decompose_examples() {
        let r = decompose_weight(0.00347, 4).unwrap();
        assert_eq!((r.sign, r.p, r.digits.as_slice()), (1, 2, &[3, 4, 7, 0][..]));

        let r = decompose_weight(0.0, 4).unwrap();
        assert_eq!((r.sign, r.p, r.digits.as_slice()), (1, 0, &[0, 0, 0, 0][..]));

        let r = decompose_weight(-0.5123, 4).unwrap();
        assert_eq!((r.sign, r.p, r.digits.as_slice()), (-1, 0, &[5, 1, 2, 3][..]));

        assert!(decompose_weight(1.2, 4).is_err());
        assert!(decompose_weight(-1.0, 4).is_err());
        assert!(decompose_weight(0.3, 1).is_err());
    }

    #[test]
    fn decompose_rounds_at_digit_q() {
        let r = decompose_weight(0.123456789, 4).unwrap();
        assert_eq!(r.digits, vec![1, 2, 3, 5]);
    }

    #[test]
    fn select_pair_index_constant_digits_win() {
        // positions (3,4) identical across the host -> zero entropy -> c = 3
        let weights = [0.12997, 0.45991, 0.78993, 0.33998];
        let side: Vec<_> = weights.iter().map(|&w| decompose_weight(w, 5).unwrap()).collect();
        assert_eq!(select_pair_index(&side, 5).unwrap(), 3);
    }

    #[test]
    fn select_pair_index_matches_bruteforce_oracle() {
        // independent recount with map-based entropy
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut weights = Vec::new();
        for _ in 0..2000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            weights.push(0.8 * u + 0.05);
        }
        let q = 8;
        let side: Vec<_> = weights.iter().map(|&w| decompose_weight(w, q).unwrap()).collect();
        let mut best = (f64::INFINITY, 0usize);
        for c in 1..q {
            let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
            for r in &side {
                *counts.entry(10 * r.digits[c - 1] as i32 + r.digits[c] as i32).or_default() += 1;
            }
            let n = side.len() as f64;
            let h: f64 = counts.values().map(|&k| {
                let p = k as f64 / n;
                -p * p.log2()
            }).sum();
            if h < best.0 {
                best = (h, c);
            }
        }
        assert_eq!(select_pair_index(&side, q).unwrap(), best.1);
    }

    #[test]
    fn preprocess_examples() {
        let pre = preprocess_with_index(&[0.00347], 4, 0, 1).unwrap();
        assert_eq!(pre.host, vec![34]);

        let pre = preprocess_with_index(&[-0.5123], 4, 0, 1).unwrap();
        assert_eq!(pre.host, vec![-51]);

        assert!(matches!(
            preprocess_with_index(&[-0.5123], 4, -60, 1),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn deprocess_inverts_preprocess() {
        let weights = [0.00347, -0.5123, 0.097531, 0.0];
        let pre = preprocess(&weights, 6, 3).unwrap();
        assert_eq!(deprocess(&pre).unwrap(), weights.to_vec());
    }

    #[test]
    fn deprocess_digit_surgery() {
        let pre = preprocess_with_index(&[0.5123], 4, 0, 1).unwrap();
        let mut touched = pre.clone();
        touched.host[0] += 1; // 51 -> 52
        assert_eq!(deprocess(&touched).unwrap(), vec![0.5223]);
    }

    #[test]
    fn deprocess_out_of_range_signals_corruption() {
        let mut pre = preprocess_with_index(&[0.5123], 4, 0, 1).unwrap();
        pre.shift_v = -10;
        pre.host[0] = 95; // |95 + 10| > 99
        assert!(matches!(deprocess(&pre), Err(Error::Corruption(_))));
    }

    #[test]
    fn choose_peak_valley_examples() {
        let p = choose_peak_valley(&[2, 2, 2, 3, 5]).unwrap();
        assert_eq!((p.peak, p.valley), (2, 4));

        let p = choose_peak_valley(&[7]).unwrap();
        assert_eq!((p.peak, p.valley), (7, 8));

        let full: Vec<i16> = (-99..=99).collect();
        assert!(matches!(choose_peak_valley(&full), Err(Error::NoValley(_))));
    }

    #[test]
    fn peak_99_rejected() {
        let p = choose_peak_valley(&[99, 99, 99, 5]).unwrap();
        assert_eq!(p.peak, 5);
    }

    #[test]
    fn embed_extract_recover_examples() {
        let params = HsParams { peak: 2, valley: 4 };
        let host = [2, 2, 2, 3, 5];
        let marked = hs_embed(&host, &[1, 0, 1], &params).unwrap();
        assert_eq!(marked, vec![3, 2, 3, 4, 5]);
        assert_eq!(hs_extract(&marked, &params), vec![1, 0, 1]);
        assert_eq!(hs_recover(&marked, &params), host.to_vec());

        // zero message: only the interior interval shifts
        let marked = hs_embed(&host, &[0, 0, 0], &params).unwrap();
        assert_eq!(marked, vec![2, 2, 2, 4, 5]);

        assert!(matches!(
            hs_embed(&host, &[1, 0, 1, 1], &params),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn region_iii_preserved() {
        let params = HsParams { peak: 2, valley: 4 };
        // values at or beyond the (vacant) valley never move
        let host = [5, 9, 6, 2];
        let marked = hs_embed(&host, &[1], &params).unwrap();
        assert_eq!(&marked[..3], &[5, 9, 6]);
        assert_eq!(hs_recover(&marked, &params)[..3], [5, 9, 6]);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(hs_capacity(&[2, 2, 2, 3, 5]), 3);
        assert_eq!(hs_capacity(&[1, 2, 3]), 1);
        assert_eq!(hs_capacity(&[]), 0);
    }

    #[test]
    fn mark_extract_restore_tensor_round_trip() {
        // weights canonicalized to q digits so reassembly is bit-exact
        let weights: Vec<f64> = [0.12345678, -0.0054321, 0.33000001, 0.125, -0.99999, 0.00112233]
            .iter()
            .map(|&w| compose_weight(&decompose_weight(w, 8).unwrap()))
            .collect();
        let bits = [1u8, 0];
        let (wtm, info) = hs_mark(&weights, &bits, 8).unwrap();
        assert_eq!(hs_extract_tensor(&wtm, &info).unwrap(), bits.to_vec());
        assert_eq!(hs_restore_tensor(&wtm, &info).unwrap(), weights);
    }

    proptest! {
        #[test]
        fn full_pipeline_reversible(seed in 0u64..5000) {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let n = 40 + (next() % 60) as usize;
            let q = 8;
            let weights: Vec<f64> = (0..n)
                .map(|_| {
                    let u = (next() >> 11) as f64 / (1u64 << 53) as f64;
                    let w = (u - 0.5) * 0.4;
                    compose_weight(&decompose_weight(w, q).unwrap())
                })
                .collect();
            let pre = preprocess(&weights, q, 0).unwrap();
            let params = match choose_peak_valley(&pre.host) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            let cap = pre.host.iter().filter(|&&h| h == params.peak).count();
            let bits: Vec<u8> = (0..cap).map(|_| (next() & 1) as u8).collect();
            let marked_host = hs_embed(&pre.host, &bits, &params).unwrap();
            prop_assert_eq!(&hs_extract(&marked_host, &params), &bits);
            prop_assert_eq!(hs_recover(&marked_host, &params), pre.host.clone());
            let mut marked = pre.clone();
            marked.host = marked_host;
            let wtm = deprocess(&marked).unwrap();
            // file-style round trip through the reconstructed host
            let info = HsSideInfo {
                pair_index: pre.pair_index,
                shift_v: pre.shift_v,
                q,
                params,
                n_bits: bits.len() as u64,
                side: pre.side.clone(),
            };
            prop_assert_eq!(hs_extract_tensor(&wtm, &info).unwrap(), bits);
            prop_assert_eq!(hs_restore_tensor(&wtm, &info).unwrap(), weights);
        }
    }
}
