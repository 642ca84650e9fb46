//! The piecewise LDR ↔ HDR intensity curve and tone-mapping helpers.
//!
//! Normalized LDR values `J ∈ [0,1]` map to linear radiance through a curve
//! that is linear up to a knee at 3000 raw counts (out of 65536) and
//! exponential above it. The knee is continuous by construction:
//! `3000 · 8e-8 = 2.4e-4`, the coefficient of the exponential branch.

use crate::error::{Error, Result};
use crate::panorama::{PanoKind, PanoramaImage};

/// Raw-count knee between the linear and exponential branches.
pub const KNEE_RAW: f64 = 3000.0;
/// Radiance per raw count below the knee.
pub const LIN_SCALE: f64 = 8e-8;
/// Base of the exponential branch.
pub const EXP_BASE: f64 = 1.0002;
/// Coefficient of the exponential branch (= `KNEE_RAW · LIN_SCALE`).
pub const EXP_SCALE: f64 = 2.4e-4;
/// Raw counts at `J = 1`.
pub const FULL_SCALE: f64 = 65536.0;
/// Display gamma used by `gamma_view`.
pub const GAMMA: f64 = 3.3;

/// Result of a curve evaluation. `flagged` marks inputs that had to be
/// clamped into the curve's domain (out-of-range J, saturated radiance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converted {
    pub value: f64,
    pub flagged: bool,
}

/// Radiance of a normalized LDR value. Inputs outside `[0,1]` are clamped
/// and flagged.
pub fn j_to_h(j: f64) -> Converted {
    let flagged = !(0.0..=1.0).contains(&j);
    let raw = j.clamp(0.0, 1.0) * FULL_SCALE;
    let value = if raw <= KNEE_RAW {
        raw * LIN_SCALE
    } else {
        EXP_SCALE * EXP_BASE.powf(raw - KNEE_RAW)
    };
    Converted { value, flagged }
}

/// Largest radiance representable on the curve, `j_to_h(1)`.
pub fn max_radiance() -> f64 {
    EXP_SCALE * EXP_BASE.powf(FULL_SCALE - KNEE_RAW)
}

/// Exact inverse of [`j_to_h`]. Radiance above the curve's range clamps to
/// `J = 1` and is flagged as saturated; negative or non-finite input is an
/// error.
pub fn h_to_j(h: f64) -> Result<Converted> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::InvalidInput(format!(
            "radiance must be finite and non-negative, got {h}"
        )));
    }
    let raw = if h <= EXP_SCALE {
        h / LIN_SCALE
    } else {
        KNEE_RAW + (h / EXP_SCALE).ln() / EXP_BASE.ln()
    };
    let j = raw / FULL_SCALE;
    if j > 1.0 {
        return Ok(Converted {
            value: 1.0,
            flagged: true,
        });
    }
    Ok(Converted {
        value: j,
        flagged: false,
    })
}

/// Elementwise `ln(1 + H)`, preserving unobserved (−1 sentinel) pixels.
pub fn log_scale(h: &PanoramaImage) -> PanoramaImage {
    let mut out = h.clone();
    for v in 0..h.height() {
        for u in 0..h.width() {
            if h.is_observed(u, v) {
                for x in out.pixel_mut(u, v) {
                    *x = x.ln_1p();
                }
            }
        }
    }
    out
}

/// Tone-mapped view `clamp(exposure · H, 0, 1)^(1/3.3)`. Unobserved pixels
/// map to 0. The output is an LDR-color panorama.
pub fn gamma_view(h: &PanoramaImage, exposure: f64) -> PanoramaImage {
    let mut out = h.clone();
    out.set_kind(PanoKind::LdrColor);
    for v in 0..h.height() {
        for u in 0..h.width() {
            let observed = h.is_observed(u, v);
            for x in out.pixel_mut(u, v) {
                *x = if observed {
                    (exposure * *x).clamp(0.0, 1.0).powf(1.0 / GAMMA)
                } else {
                    0.0
                };
            }
        }
    }
    out
}

/// Exposure that maps the 99th percentile of the observed radiance samples
/// to 1.0 (nearest-rank percentile). Falls back to 1.0 when the map has no
/// positive observed values.
pub fn auto_exposure(h: &PanoramaImage) -> f64 {
    let mut samples = Vec::new();
    for v in 0..h.height() {
        for u in 0..h.width() {
            if h.is_observed(u, v) {
                samples.extend_from_slice(h.pixel(u, v));
            }
        }
    }
    if samples.is_empty() {
        return 1.0;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.99 * samples.len() as f64).ceil() as usize).clamp(1, samples.len());
    let p99 = samples[rank - 1];
    if p99 > 0.0 {
        1.0 / p99
    } else {
        1.0
    }
}

/// Applies [`j_to_h`] to every observed pixel of an LDR panorama. Returns
/// the radiance map and the number of clamped samples.
pub fn ldr_to_hdr(ldr: &PanoramaImage) -> Result<(PanoramaImage, usize)> {
    if ldr.kind() != PanoKind::LdrColor {
        return Err(Error::InvalidInput(format!(
            "ldr_to_hdr expects an ldr-color panorama, got {:?}",
            ldr.kind()
        )));
    }
    let mut out = ldr.clone();
    out.set_kind(PanoKind::HdrRadiance);
    let mut flagged = 0;
    for v in 0..ldr.height() {
        for u in 0..ldr.width() {
            if ldr.is_observed(u, v) {
                for x in out.pixel_mut(u, v) {
                    let c = j_to_h(*x);
                    *x = c.value;
                    flagged += c.flagged as usize;
                }
            }
        }
    }
    Ok((out, flagged))
}

/// Applies [`h_to_j`] to every observed pixel of an HDR panorama. Returns
/// the normalized map and the number of saturated samples.
pub fn hdr_to_ldr(hdr: &PanoramaImage) -> Result<(PanoramaImage, usize)> {
    if hdr.kind() != PanoKind::HdrRadiance {
        return Err(Error::InvalidInput(format!(
            "hdr_to_ldr expects an hdr-radiance panorama, got {:?}",
            hdr.kind()
        )));
    }
    let mut out = hdr.clone();
    out.set_kind(PanoKind::LdrColor);
    let mut flagged = 0;
    for v in 0..hdr.height() {
        for u in 0..hdr.width() {
            if hdr.is_observed(u, v) {
                for x in out.pixel_mut(u, v) {
                    let c = h_to_j(*x)?;
                    *x = c.value;
                    flagged += c.flagged as usize;
                }
            }
        }
    }
    Ok((out, flagged))
}
