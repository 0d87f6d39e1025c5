//! The wrapped whole-tensor algorithms: mark, extract, restore, and the
//! integrity-protection / infringement-identification workflows built on
//! them.

use crate::error::{Error, Result};
use crate::io::{Precision, WatermarkMessage, WeightTensor};
use crate::keying::{construct_locations, SecretKey, WatermarkInfo};
use crate::qim::{decision_margin, rqim_embed, rqim_extract, rqim_recover, QimParams};
use crate::stats::ber;

/// Outcome of a difference check between two tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    /// Mismatch fraction b in [0, 1].
    pub ratio: f64,
    pub tampered: bool,
    pub mismatch_count: usize,
    pub tolerance: f64,
}

/// Default relative diff tolerance per stored precision: three decades above
/// round-trip error, three below any meaningful tamper.
pub fn default_diff_tolerance(precision: Precision) -> f64 {
    match precision {
        Precision::Binary32 => 1e-5,
        Precision::Binary64 => 1e-9,
    }
}

/// Embeds the message at the clue-derived locations. Returns the watermarked
/// tensor together with `w_info = [L, |M|]` and `sk = [k, cl, Δ]`; α stays
/// with the caller.
pub fn mark(
    cover: &WeightTensor,
    message: &WatermarkMessage,
    params: &QimParams,
    clue: u64,
) -> Result<(WeightTensor, WatermarkInfo, SecretKey)> {
    params.validate_reversible()?;
    if message.m_card != params.m_card() {
        return Err(Error::Domain(format!(
            "message alphabet |M| = {} does not match params |M| = {}",
            message.m_card,
            params.m_card()
        )));
    }
    let symbols = message.symbols();
    let locations = construct_locations(clue, symbols.len(), cover.len())?;
    let mut data = cover.data.clone();
    for (&idx, &symbol) in locations.indices.iter().zip(symbols.iter()) {
        data[idx] = rqim_embed(data[idx], symbol, params)?.watermarked;
    }
    let tensor = WeightTensor { data, precision: cover.precision }.canonicalized();
    let info = WatermarkInfo { length: symbols.len() as u64, m_card: params.m_card() };
    let key = SecretKey { k: params.k(), cl: clue, delta: params.delta() };
    Ok((tensor, info, key))
}

fn decode_params(info: &WatermarkInfo, key: &SecretKey) -> Result<QimParams> {
    // alpha is irrelevant for minimum-distance decoding; 1.0 is a placeholder
    QimParams::new(key.delta, info.m_card, 1.0, key.k)
}

/// Extracts the message estimate. Requires only `(sk, w_info)` — never α.
pub fn extract(
    tensor: &WeightTensor,
    info: &WatermarkInfo,
    key: &SecretKey,
) -> Result<WatermarkMessage> {
    let length = info.length as usize;
    if length > tensor.len() {
        return Err(Error::Format(format!(
            "info claims {length} symbols but the tensor has only {} elements",
            tensor.len()
        )));
    }
    let params = decode_params(info, key)?;
    let locations = construct_locations(key.cl, length, tensor.len())?;
    let symbols: Vec<u32> = locations
        .indices
        .iter()
        .map(|&idx| rqim_extract(tensor.data[idx], &params))
        .collect::<Result<_>>()?;
    WatermarkMessage::from_symbols(&symbols, info.m_card)
}

/// Recovers the original tensor; requires the embedding α.
pub fn restore(
    tensor: &WeightTensor,
    info: &WatermarkInfo,
    key: &SecretKey,
    alpha: f64,
) -> Result<WeightTensor> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("recovery needs alpha in (0, 1), got {alpha}")));
    }
    let length = info.length as usize;
    if length > tensor.len() {
        return Err(Error::Format(format!(
            "info claims {length} symbols but the tensor has only {} elements",
            tensor.len()
        )));
    }
    let params = QimParams::new(key.delta, info.m_card, alpha, key.k)?;
    let locations = construct_locations(key.cl, length, tensor.len())?;
    let mut data = tensor.data.clone();
    for &idx in &locations.indices {
        data[idx] = rqim_recover(data[idx], &params)?;
    }
    Ok(WeightTensor { data, precision: tensor.precision }.canonicalized())
}

/// Element-wise relative difference: mismatch where `|a-b| > tol·max(1, |a|)`.
pub fn diff(a: &WeightTensor, b: &WeightTensor, tolerance: f64) -> Result<VerificationReport> {
    if a.len() != b.len() || a.precision != b.precision {
        return Err(Error::Format(format!(
            "shape mismatch: {} elements ({:?}) vs {} elements ({:?})",
            a.len(),
            a.precision,
            b.len(),
            b.precision
        )));
    }
    let mismatch_count = a
        .data
        .iter()
        .zip(b.data.iter())
        .filter(|(&x, &y)| (x - y).abs() > tolerance * x.abs().max(1.0))
        .count();
    let ratio = if a.is_empty() { 0.0 } else { mismatch_count as f64 / a.len() as f64 };
    Ok(VerificationReport { ratio, tampered: mismatch_count > 0, mismatch_count, tolerance })
}

/// Noiseless-channel integrity check: restore, then diff against the owner's
/// original at the precision's default tolerance.
pub fn verify_integrity_noiseless(
    watermarked: &WeightTensor,
    info: &WatermarkInfo,
    key: &SecretKey,
    alpha: f64,
    original: &WeightTensor,
) -> Result<VerificationReport> {
    let restored = restore(watermarked, info, key, alpha)?;
    diff(&restored, original, default_diff_tolerance(original.precision))
}

/// Known-noisy-channel integrity check: residuals at watermarked positions
/// may reach `noise_bound/(1-α)`, elsewhere `noise_bound`; anything larger is
/// tampering.
pub fn verify_integrity_noisy(
    received: &WeightTensor,
    info: &WatermarkInfo,
    key: &SecretKey,
    alpha: f64,
    original: &WeightTensor,
    noise_bound: f64,
) -> Result<VerificationReport> {
    if !(noise_bound >= 0.0) {
        return Err(Error::Domain(format!("noise bound must be non-negative, got {noise_bound}")));
    }
    let params = QimParams::new(key.delta, info.m_card, alpha, key.k)?;
    let margin = decision_margin(&params)?;
    if noise_bound >= margin {
        return Err(Error::UnsupportedChannel(format!(
            "noise bound {noise_bound} >= decoding margin {margin}; extraction correctness is not guaranteed"
        )));
    }
    let restored = restore(received, info, key, alpha)?;
    if restored.len() != original.len() || restored.precision != original.precision {
        return Err(Error::Format("shape mismatch between restored and original".into()));
    }
    let locations = construct_locations(key.cl, info.length as usize, received.len())?;
    let mut watermarked_at = vec![false; received.len()];
    for &idx in &locations.indices {
        watermarked_at[idx] = true;
    }
    let amplified = noise_bound / (1.0 - alpha);
    let slack = |allow: f64, reference: f64| allow * (1.0 + 1e-9) + 1e-12 * reference.abs().max(1.0);
    let mismatch_count = restored
        .data
        .iter()
        .zip(original.data.iter())
        .zip(watermarked_at.iter())
        .filter(|((&r, &o), &marked)| {
            let allow = if marked { amplified } else { noise_bound };
            (r - o).abs() > slack(allow, o)
        })
        .count();
    let ratio = if original.is_empty() { 0.0 } else { mismatch_count as f64 / original.len() as f64 };
    Ok(VerificationReport { ratio, tampered: mismatch_count > 0, mismatch_count, tolerance: noise_bound })
}

/// Compares the extracted watermark against the owner's original message.
/// Detected when BER does not exceed the threshold (0.1 in the workflow).
pub fn infringement_check(
    suspect: &WeightTensor,
    info: &WatermarkInfo,
    key: &SecretKey,
    original: &WatermarkMessage,
    threshold: f64,
) -> Result<(f64, bool)> {
    let estimate = extract(suspect, info, key)?;
    let rate = ber(&estimate.bits, &original.bits)?;
    Ok((rate, rate <= threshold))
}
