//! Scalar and vectorized quantization-index-modulation primitives.
//!
//! The codebook is a family of `|M|` interleaved shifted lattices
//! `Λ_m + k = d_m + k + ΔZ` with equispaced coset offsets `d_m`. Plain QIM
//! snaps the cover sample to the nearest codeword of the chosen coset;
//! the reversible variant keeps a scaled copy of the quantization error so
//! the original sample can be reconstructed exactly.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Quantizer geometry: step size Δ, alphabet size |M|, scaling factor α and
/// dither k (reduced modulo Δ at construction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QimParams {
    delta: f64,
    m_card: u32,
    alpha: f64,
    k: f64,
}

impl QimParams {
    /// Builds a parameter set. `alpha` may be anything in (0, 1] here;
    /// reversible embedding additionally requires [`QimParams::validate_reversible`].
    pub fn new(delta: f64, m_card: u32, alpha: f64, k: f64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        if m_card < 2 {
            return Err(Error::Domain(format!("m_card must be >= 2, got {m_card}")));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !k.is_finite() {
            return Err(Error::Domain("dither k must be finite".into()));
        }
        // Dither is periodic in the lattice: reduce into [0, delta).
        let mut k = k.rem_euclid(delta);
        if k == delta {
            k = 0.0;
        }
        Ok(Self { delta, m_card, alpha, k })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m_card(&self) -> u32 {
        self.m_card
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// True iff α ∈ ((|M|-1)/|M|, 1), the window in which embed-for-recovery
    /// is guaranteed correct.
    pub fn is_reversible(&self) -> bool {
        let lower = (self.m_card as f64 - 1.0) / self.m_card as f64;
        self.alpha > lower && self.alpha < 1.0
    }

    /// Errors unless the reversible-mode α constraint holds.
    pub fn validate_reversible(&self) -> Result<()> {
        if self.is_reversible() {
            Ok(())
        } else {
            let lower = (self.m_card as f64 - 1.0) / self.m_card as f64;
            Err(Error::Domain(format!(
                "alpha = {} violates the reversibility constraint ({lower} < alpha < 1) for |M| = {}",
                self.alpha, self.m_card
            )))
        }
    }
}

/// Coset offset `d_m` of one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodewordOffset {
    pub symbol: u32,
    pub offset: f64,
}

/// Offset of symbol `m`: equispaced, symmetric about zero, `d_0 = Δ/(2|M|) - Δ/2`.
/// For |M| = 2 this is d_0 = -Δ/4, d_1 = +Δ/4.
pub fn codeword_offset(symbol: u32, params: &QimParams) -> Result<CodewordOffset> {
    if symbol >= params.m_card {
        return Err(Error::Domain(format!(
            "symbol {symbol} out of range for |M| = {}",
            params.m_card
        )));
    }
    let m = params.m_card as f64;
    let offset = (2.0 * symbol as f64 + 1.0) * params.delta / (2.0 * m) - params.delta / 2.0;
    Ok(CodewordOffset { symbol, offset })
}

/// One reversible embedding step: the watermarked value, the codeword it was
/// pulled toward and the quantization error that was retained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedRecord {
    pub watermarked: f64,
    pub quant_point: f64,
    pub quant_error: f64,
}

/// Nearest-point uniform quantizer: `delta * round(x / delta)`, ties away
/// from zero.
pub fn uniform_quantize(x: f64, delta: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite input {x}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    Ok(delta * (x / delta).round())
}

/// Plain QIM embedding: nearest point of `Λ_m + k` to `s`.
pub fn qim_embed(s: f64, symbol: u32, params: &QimParams) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite cover sample {s}")));
    }
    let shift = codeword_offset(symbol, params)?.offset + params.k;
    Ok(uniform_quantize(s - shift, params.delta)? + shift)
}

/// Minimum-distance decoding over the union of all dithered cosets.
/// Returns the decoded symbol and the globally nearest codeword; equidistant
/// inputs resolve to the smaller symbol.
pub fn qim_decode(y: f64, params: &QimParams) -> Result<(u32, f64)> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite input {y}")));
    }
    let mut best_symbol = 0u32;
    let mut best_point = 0.0f64;
    let mut best_dist = f64::INFINITY;
    for m in 0..params.m_card {
        let shift = codeword_offset(m, params)?.offset + params.k;
        let point = uniform_quantize(y - shift, params.delta)? + shift;
        let dist = (y - point).abs();
        if dist < best_dist {
            best_dist = dist;
            best_symbol = m;
            best_point = point;
        }
    }
    Ok((best_symbol, best_point))
}

/// Reversible embedding: `α·Q_(m,k)(s) + (1-α)·s`.
pub fn rqim_embed(s: f64, symbol: u32, params: &QimParams) -> Result<EmbedRecord> {
    let quant_point = qim_embed(s, symbol, params)?;
    let watermarked = params.alpha * quant_point + (1.0 - params.alpha) * s;
    Ok(EmbedRecord {
        watermarked,
        quant_point,
        quant_error: s - quant_point,
    })
}

/// Symbol of the globally nearest dithered codeword.
pub fn rqim_extract(y: f64, params: &QimParams) -> Result<u32> {
    Ok(qim_decode(y, params)?.0)
}

/// Reconstructs the original sample: `(y - α·q̂)/(1-α)` with `q̂` the decoded
/// codeword of `y`.
pub fn rqim_recover(y: f64, params: &QimParams) -> Result<f64> {
    if params.alpha >= 1.0 {
        return Err(Error::Domain(
            "recovery is degenerate at alpha = 1 (no retained quantization error)".into(),
        ));
    }
    let (_, point) = qim_decode(y, params)?;
    Ok((y - params.alpha * point) / (1.0 - params.alpha))
}

/// Largest additive-noise magnitude under which extraction of an embedded
/// sample is provably correct: `Δ/(2|M|) - (1-α)·Δ/2`.
pub fn decision_margin(params: &QimParams) -> Result<f64> {
    params.validate_reversible()?;
    let m = params.m_card as f64;
    Ok(params.delta / (2.0 * m) - (1.0 - params.alpha) * params.delta / 2.0)
}

/// The two candidate closed forms for the mean-squared embedding distortion.
/// Monte-Carlo measurement arbitrates between them; see `theoretical_mse`
/// callers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimates {
    /// `α·Δ²/12`.
    pub paper_value: f64,
    /// `α²·Δ²/12`, the variance of `α·e` with `e ~ Uniform(-Δ/2, Δ/2)`.
    pub derived_value: f64,
}

pub fn theoretical_mse(params: &QimParams) -> MseEstimates {
    let d2 = params.delta * params.delta;
    MseEstimates {
        paper_value: params.alpha * d2 / 12.0,
        derived_value: params.alpha * params.alpha * d2 / 12.0,
    }
}

/// Element-wise reversible embedding of a symbol sequence into the first
/// `message.len()` cover positions; the tail is copied unchanged.
///
/// Parallel partitioning is by index, so results are bitwise identical for
/// any worker count.
pub fn embed_sequence(
    cover: &[f64],
    message: &[u32],
    params: &QimParams,
) -> Result<(Vec<f64>, Vec<EmbedRecord>)> {
    if message.len() > cover.len() {
        return Err(Error::Capacity(format!(
            "message of {} symbols exceeds cover of {} samples",
            message.len(),
            cover.len()
        )));
    }
    let records: Vec<EmbedRecord> = cover[..message.len()]
        .par_iter()
        .zip(message.par_iter())
        .map(|(&s, &m)| rqim_embed(s, m, params))
        .collect::<Result<_>>()?;
    let mut out = cover.to_vec();
    for (slot, rec) in out.iter_mut().zip(records.iter()) {
        *slot = rec.watermarked;
    }
    Ok((out, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(delta: f64, m_card: u32, alpha: f64, k: f64) -> QimParams {
        QimParams::new(delta, m_card, alpha, k).unwrap()
    }

    #[test]
    fn uniform_quantize_examples() {
        assert_eq!(uniform_quantize(0.6, 1.0).unwrap(), 1.0);
        assert_eq!(uniform_quantize(0.0, 1.0).unwrap(), 0.0);
        // tie broken away from zero
        assert_eq!(uniform_quantize(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(uniform_quantize(-0.5, 1.0).unwrap(), -1.0);
        assert!(uniform_quantize(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn binary_offsets_match_quarter_step() {
        let p = params(1.0, 2, 0.8, 0.0);
        assert_eq!(codeword_offset(0, &p).unwrap().offset, -0.25);
        assert_eq!(codeword_offset(1, &p).unwrap().offset, 0.25);
        assert!(codeword_offset(2, &p).is_err());
    }

    #[test]
    fn general_offsets_equispaced() {
        let p = params(2.0, 8, 0.9, 0.0);
        let offs: Vec<f64> = (0..8)
            .map(|m| codeword_offset(m, &p).unwrap().offset)
            .collect();
        for w in offs.windows(2) {
            assert!((w[1] - w[0] - 2.0 / 8.0).abs() < 1e-15);
        }
        assert!(offs[0] >= -1.0 && *offs.last().unwrap() < 1.0);
    }

    #[test]
    fn qim_embed_examples() {
        let p = params(1.0, 2, 1.0, 0.0);
        assert_eq!(qim_embed(0.6, 0, &p).unwrap(), 0.75);
        assert_eq!(qim_embed(0.6, 1, &p).unwrap(), 0.25);
        assert_eq!(qim_embed(0.25, 1, &p).unwrap(), 0.25);
    }

    #[test]
    fn qim_decode_examples() {
        let p = params(1.0, 2, 1.0, 0.0);
        assert_eq!(qim_decode(0.32, &p).unwrap(), (1, 0.25));
        assert_eq!(qim_decode(0.75, &p).unwrap(), (0, 0.75));
        assert_eq!(qim_decode(0.85, &p).unwrap(), (0, 0.75));
    }

    #[test]
    fn qim_decode_tie_prefers_smaller_symbol() {
        let p = params(1.0, 2, 1.0, 0.0);
        // 0.5 is equidistant from 0.25 (Λ1) and 0.75 (Λ0): smaller symbol wins.
        assert_eq!(qim_decode(0.5, &p).unwrap().0, 0);
    }

    #[test]
    fn rqim_embed_examples() {
        let p = params(1.0, 2, 0.8, 0.0);
        let r = rqim_embed(0.6, 1, &p).unwrap();
        assert!((r.watermarked - 0.32).abs() < 1e-15);
        assert_eq!(r.quant_point, 0.25);
        assert!((r.quant_error - 0.35).abs() < 1e-15);
        assert_eq!(rqim_embed(0.25, 1, &p).unwrap().watermarked, 0.25);

        let p = params(1.0, 2, 0.8675, 0.0);
        let r = rqim_embed(0.6, 1, &p).unwrap();
        assert!((r.watermarked - 0.296375).abs() < 1e-15);
    }

    #[test]
    fn rqim_extract_examples() {
        let p = params(1.0, 2, 0.8, 0.0);
        assert_eq!(rqim_extract(0.32, &p).unwrap(), 1);
        assert_eq!(rqim_extract(0.296375, &p).unwrap(), 1);
        assert_eq!(rqim_extract(-0.25, &p).unwrap(), 0);
    }

    #[test]
    fn rqim_recover_examples() {
        let p = params(1.0, 2, 0.8, 0.0);
        assert!((rqim_recover(0.32, &p).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rqim_recover(0.25, &p).unwrap(), 0.25);
        assert!((rqim_recover(0.33, &p).unwrap() - 0.65).abs() < 1e-14);
        let degenerate = params(1.0, 2, 1.0, 0.0);
        assert!(rqim_recover(0.3, &degenerate).is_err());
    }

    #[test]
    fn decision_margin_examples() {
        let p = params(1.0, 2, 0.8, 0.0);
        assert!((decision_margin(&p).unwrap() - 0.15).abs() < 1e-15);
        let p = params(1.0, 2, 1.0 - 1e-12, 0.0);
        assert!((decision_margin(&p).unwrap() - 0.25).abs() < 1e-9);
        let boundary = params(1.0, 2, 0.5, 0.0);
        assert!(decision_margin(&boundary).is_err());
    }

    #[test]
    fn theoretical_mse_examples() {
        let p = params(1.0, 2, 0.5, 0.0);
        let m = theoretical_mse(&p);
        assert!((m.paper_value - 1.0 / 24.0).abs() < 1e-15);
        assert!((m.derived_value - 1.0 / 48.0).abs() < 1e-15);

        let p = params(1.0, 2, 1.0, 0.0);
        let m = theoretical_mse(&p);
        assert!((m.paper_value - 1.0 / 12.0).abs() < 1e-15);
        assert!((m.derived_value - 1.0 / 12.0).abs() < 1e-15);

        let p = params(2.0, 2, 0.8675, 0.0);
        let m = theoretical_mse(&p);
        assert!((m.paper_value - 0.8675 * 4.0 / 12.0).abs() < 1e-12);
        assert!((m.derived_value - 0.8675 * 0.8675 * 4.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn embed_sequence_examples() {
        let p = params(1.0, 2, 0.8, 0.0);
        let (out, recs) = embed_sequence(&[0.6, 0.25], &[1, 1], &p).unwrap();
        assert!((out[0] - 0.32).abs() < 1e-15);
        assert_eq!(out[1], 0.25);
        assert_eq!(recs.len(), 2);

        let (out, recs) = embed_sequence(&[], &[], &p).unwrap();
        assert!(out.is_empty() && recs.is_empty());

        assert!(embed_sequence(&[0.6], &[1, 0], &p).is_err());
    }

    #[test]
    fn tail_copied_unchanged() {
        let p = params(1.0, 2, 0.8, 0.0);
        let cover = [0.6, -0.1, 0.42];
        let (out, _) = embed_sequence(&cover, &[0], &p).unwrap();
        assert_eq!(out[1], -0.1);
        assert_eq!(out[2], 0.42);
    }

    #[test]
    fn alpha_one_collapses_to_plain_qim() {
        let p = params(0.7, 4, 1.0, 0.13);
        for i in 0..200 {
            let s = -3.0 + i as f64 * 0.031;
            for m in 0..4 {
                assert_eq!(
                    rqim_embed(s, m, &p).unwrap().watermarked,
                    qim_embed(s, m, &p).unwrap()
                );
            }
        }
    }

    #[test]
    fn dither_reduced_modulo_delta() {
        let p = params(1.0, 2, 0.8, 2.75);
        assert!((p.k() - 0.75).abs() < 1e-15);
        let p = params(1.0, 2, 0.8, -0.25);
        assert!((p.k() - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(s in -50.0f64..50.0, m in 0u32..2, frac in 0.0f64..1.0) {
            // alpha sampled strictly inside the reversible window
            let alpha = 0.5 + 1e-6 + frac * (0.5 - 2e-6);
            let p = params(1.0, 2, alpha, 0.0);
            let rec = rqim_embed(s, m, &p).unwrap();
            prop_assert_eq!(rqim_extract(rec.watermarked, &p).unwrap(), m);
            let back = rqim_recover(rec.watermarked, &p).unwrap();
            prop_assert!((back - s).abs() <= 1e-12 * s.abs().max(1.0));
        }

        #[test]
        fn distortion_bound(s in -20.0f64..20.0, m in 0u32..4, alpha in 0.7501f64..0.9999) {
            let p = params(0.5, 4, alpha, 0.1);
            let rec = rqim_embed(s, m, &p).unwrap();
            let bound = alpha * 0.5 / 2.0;
            prop_assert!((rec.watermarked - s).abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn noise_linearity(s in -10.0f64..10.0, m in 0u32..2, n_frac in -0.999f64..0.999) {
            let p = params(1.0, 2, 0.8, 0.0);
            let margin = decision_margin(&p).unwrap();
            let n = n_frac * margin;
            let rec = rqim_embed(s, m, &p).unwrap();
            prop_assert_eq!(rqim_extract(rec.watermarked + n, &p).unwrap(), m);
            let back = rqim_recover(rec.watermarked + n, &p).unwrap();
            prop_assert!((back - s - n / 0.2).abs() <= 1e-11);
        }

        #[test]
        fn periodicity(s in -5.0f64..5.0, m in 0u32..2) {
            let p = params(1.0, 2, 0.8, 0.0);
            let a = rqim_embed(s + 1.0, m, &p).unwrap().watermarked;
            let b = rqim_embed(s, m, &p).unwrap().watermarked + 1.0;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert_eq!(
                rqim_extract(s, &p).unwrap(),
                rqim_extract(s + 1.0, &p).unwrap()
            );
        }
    }

    #[test]
    fn wrong_dither_causes_symbol_errors() {
        // Security smoke property: a dither offset beyond the margin flips
        // symbols on a sizeable share of uniform covers.
        let embed = params(1.0, 2, 0.9, 0.0);
        let wrong = params(1.0, 2, 0.9, 0.4);
        let mut errors = 0usize;
        let trials = 4000;
        for i in 0..trials {
            let s = (i as f64 + 0.5) / trials as f64; // uniform grid over [0,1)
            let m = (i % 2) as u32;
            let rec = rqim_embed(s, m, &embed).unwrap();
            if rqim_extract(rec.watermarked, &wrong).unwrap() != m {
                errors += 1;
            }
        }
        assert!(
            errors as f64 / trials as f64 >= 0.25,
            "only {errors}/{trials} symbol errors with wrong dither"
        );
    }

    #[test]
    fn monte_carlo_mse_matches_derived_formula() {
        // Brute-force oracle over a deterministic fine grid of s ~ U(0, Δ):
        // the measured mean of (s'-s)^2 arbitrates between the two closed forms.
        for &(delta, alpha) in &[(1.0, 0.8), (1.0, 0.8675), (2.0, 0.95)] {
            let p = params(delta, 2, alpha, 0.0);
            let n = 1_000_000usize;
            let mut acc = 0.0f64;
            for i in 0..n {
                let s = delta * (i as f64 + 0.5) / n as f64;
                let m = (i % 2) as u32;
                let d = rqim_embed(s, m, &p).unwrap().watermarked - s;
                acc += d * d;
            }
            let measured = acc / n as f64;
            let est = theoretical_mse(&p);
            let rel = (measured - est.derived_value).abs() / est.derived_value;
            assert!(rel < 0.02, "Δ={delta} α={alpha}: measured {measured} vs derived {}", est.derived_value);
        }
    }
}
