//! Diffuse (cosine-weighted) convolution of environment maps and a simple
//! sphere relighting preview.
//!
//! The diffuse operator averages radiance over the hemisphere around each
//! direction, weighting by solid angle times the cosine to the hemisphere
//! axis, and normalizes by the *plain* solid-angle sum of the hemisphere.
//! With that normalization a uniform environment of radiance `c` maps to
//! `c/2` (the mean of the cosine over the hemisphere), not `c` — callers
//! comparing against renderers that normalize by the cosine-weighted sum
//! should expect that factor.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hdr;
use crate::panorama::{pixel_solid_angle, PanoKind, PanoramaImage};
use crate::raster::RasterImage;

/// Default height of the downsized map the convolution runs on.
pub const DEFAULT_WORK_HEIGHT: usize = 40;

/// Hemisphere membership is `ω·n > SUPPORT_EPS` rather than `> 0`: the
/// equirectangular grid contains direction pairs that are exactly 90° apart
/// (rows 90° apart at zero azimuth offset), and a strict zero test would let
/// rounding decide their membership. Everything with a dot product this
/// small contributes nothing to the numerator anyway.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Surface model for the relighting preview.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Mirror,
    Diffuse,
}

/// Average-pools a panorama down to `work_height` rows (width follows at
/// 2:1). The pooling factor must divide the input height exactly.
pub fn average_pool(h: &PanoramaImage, work_height: usize) -> Result<PanoramaImage> {
    if work_height == 0 || work_height > h.height() {
        return Err(Error::InvalidInput(format!(
            "work height {work_height} outside 1..={}",
            h.height()
        )));
    }
    if !h.height().is_multiple_of(work_height) {
        return Err(Error::DimensionMismatch(format!(
            "average pooling needs an integer factor: {} rows into {work_height}",
            h.height()
        )));
    }
    let f = h.height() / work_height;
    if f == 1 {
        return Ok(h.clone());
    }
    let ch = h.channels();
    let mut out = PanoramaImage::new(work_height, ch, h.kind(), h.frame().clone(), 0.0)?;
    let norm = 1.0 / (f * f) as f64;
    for v in 0..work_height {
        for u in 0..work_height * 2 {
            let acc = out.pixel_mut(u, v);
            for dv in 0..f {
                for du in 0..f {
                    let p = h.pixel(u * f + du, v * f + dv);
                    for c in 0..ch {
                        acc[c] += p[c];
                    }
                }
            }
            for c in acc {
                *c *= norm;
            }
        }
    }
    Ok(out)
}

/// Cosine-weighted hemispherical average of an HDR environment:
/// `D(i) = (1/K_i) Σ_{ω·n_i>0} H(ω) s(ω) (ω·n_i)` with `K_i = Σ_{ω·n_i>0} s(ω)`.
///
/// The input is average-pooled to `work_height` rows first; the output has
/// the work dimensions. Column shifts of the input shift the output exactly
/// (the kernel is evaluated as a function of the column difference).
pub fn diffuse_convolve(h: &PanoramaImage, work_height: usize) -> Result<PanoramaImage> {
    if h.kind() != PanoKind::HdrRadiance {
        return Err(Error::InvalidInput(format!(
            "diffuse_convolve expects an hdr-radiance panorama, got {:?}",
            h.kind()
        )));
    }
    // The integral is undefined over holes: sentinels would silently poison
    // the sums, so incomplete maps are rejected outright.
    let holes = (0..h.height())
        .flat_map(|v| (0..h.width()).map(move |u| (u, v)))
        .filter(|&(u, v)| !h.is_observed(u, v))
        .count();
    if holes > 0 {
        return Err(Error::InvalidInput(format!(
            "diffuse convolution needs a complete map; {holes} pixels are unobserved (fill them first)"
        )));
    }
    let pooled = average_pool(h, work_height)?;
    let (hh, ww, ch) = (pooled.height(), pooled.width(), pooled.channels());

    let mut sin_t = vec![0.0; hh];
    let mut cos_t = vec![0.0; hh];
    let mut s = vec![0.0; hh];
    for (v, ((st, ct), sv)) in sin_t
        .iter_mut()
        .zip(cos_t.iter_mut())
        .zip(s.iter_mut())
        .enumerate()
    {
        let theta = (v as f64 + 0.5) * std::f64::consts::PI / hh as f64;
        *st = theta.sin();
        *ct = theta.cos();
        *sv = pixel_solid_angle(v, ww, hh);
    }
    let cos_dphi: Vec<f64> = (0..ww)
        .map(|du| (du as f64 * std::f64::consts::TAU / ww as f64).cos())
        .collect();

    let mut out = PanoramaImage::new(work_height, ch, PanoKind::HdrRadiance, h.frame().clone(), 0.0)?;
    let src = pooled.data();
    let rows: Vec<Vec<f64>> = (0..hh)
        .into_par_iter()
        .map(|vi| {
            let mut row = vec![0.0; ww * ch];
            // K depends only on the output row: the support indicator is a
            // function of (row, row, column difference).
            let mut k = 0.0;
            for vw in 0..hh {
                for &cd in &cos_dphi {
                    let dot = sin_t[vw] * sin_t[vi] * cd + cos_t[vw] * cos_t[vi];
                    if dot > SUPPORT_EPS {
                        k += s[vw];
                    }
                }
            }
            for ui in 0..ww {
                let acc = &mut row[ui * ch..(ui + 1) * ch];
                for vw in 0..hh {
                    let base = vw * ww;
                    for (du, &cd) in cos_dphi.iter().enumerate() {
                        let dot = sin_t[vw] * sin_t[vi] * cd + cos_t[vw] * cos_t[vi];
                        if dot > SUPPORT_EPS {
                            let w = s[vw] * dot;
                            let uw = (ui + du) % ww;
                            let px = (base + uw) * ch;
                            for c in 0..ch {
                                acc[c] += src[px + c] * w;
                            }
                        }
                    }
                }
                for c in acc {
                    *c /= k;
                }
            }
            row
        })
        .collect();
    for (vi, row) in rows.into_iter().enumerate() {
        out.data_mut()[vi * ww * ch..(vi + 1) * ww * ch].copy_from_slice(&row);
    }
    Ok(out)
}

/// Transpose of the linear map `diffuse_convolve` applies at the work
/// dimensions (no pooling). Needed for the analytic gradient of the diffuse
/// loss; it rebuilds the same trig tables so hemisphere membership decisions
/// match the forward pass exactly.
pub(crate) fn diffuse_convolve_adjoint(g: &PanoramaImage) -> Result<PanoramaImage> {
    let (hh, ww, ch) = (g.height(), g.width(), g.channels());
    let mut sin_t = vec![0.0; hh];
    let mut cos_t = vec![0.0; hh];
    let mut s = vec![0.0; hh];
    for (v, ((st, ct), sv)) in sin_t
        .iter_mut()
        .zip(cos_t.iter_mut())
        .zip(s.iter_mut())
        .enumerate()
    {
        let theta = (v as f64 + 0.5) * std::f64::consts::PI / hh as f64;
        *st = theta.sin();
        *ct = theta.cos();
        *sv = pixel_solid_angle(v, ww, hh);
    }
    let cos_dphi: Vec<f64> = (0..ww)
        .map(|du| (du as f64 * std::f64::consts::TAU / ww as f64).cos())
        .collect();
    let mut k = vec![0.0; hh];
    for (vi, ki) in k.iter_mut().enumerate() {
        for vw in 0..hh {
            for &cd in &cos_dphi {
                let dot = sin_t[vw] * sin_t[vi] * cd + cos_t[vw] * cos_t[vi];
                if dot > SUPPORT_EPS {
                    *ki += s[vw];
                }
            }
        }
    }

    let mut out = PanoramaImage::new(hh, ch, g.kind(), g.frame().clone(), 0.0)?;
    let src = g.data();
    let rows: Vec<Vec<f64>> = (0..hh)
        .into_par_iter()
        .map(|vw| {
            let mut row = vec![0.0; ww * ch];
            for uw in 0..ww {
                let acc = &mut row[uw * ch..(uw + 1) * ch];
                for vi in 0..hh {
                    let base = vi * ww;
                    for (du, &cd) in cos_dphi.iter().enumerate() {
                        let dot = sin_t[vw] * sin_t[vi] * cd + cos_t[vw] * cos_t[vi];
                        if dot > SUPPORT_EPS {
                            let w = s[vw] * dot / k[vi];
                            // Forward sends input (ui+du, vw) into output
                            // (ui, vi); transposed, input (uw, vw) collects
                            // from output ((uw-du) mod ww, vi).
                            let ui = (uw + ww - du) % ww;
                            let px = (base + ui) * ch;
                            for c in 0..ch {
                                acc[c] += src[px + c] * w;
                            }
                        }
                    }
                }
            }
            row
        })
        .collect();
    for (vw, row) in rows.into_iter().enumerate() {
        out.data_mut()[vw * ww * ch..(vw + 1) * ww * ch].copy_from_slice(&row);
    }
    Ok(out)
}

/// Work height used when the caller doesn't pick one: the default if it
/// divides the input, otherwise the input height itself (no pooling).
pub fn default_work_height(h: &PanoramaImage) -> usize {
    if h.height() >= DEFAULT_WORK_HEIGHT && h.height().is_multiple_of(DEFAULT_WORK_HEIGHT) {
        DEFAULT_WORK_HEIGHT
    } else {
        h.height()
    }
}

/// Renders an orthographic sphere lit by the environment, returning an RGBA
/// image in `[0,1]` (alpha 0 outside the sphere).
///
/// The viewer looks along `-up` in the panorama's frame, so the sphere point
/// facing the frame's up axis sits at the image center; image right is the
/// azimuth reference and image up is the east axis. Mirror surfaces look up
/// the reflected view direction; diffuse surfaces look up the normal in the
/// diffuse-convolved environment. Values are tone-mapped with the display
/// gamma at the given exposure.
pub fn relight_sphere(
    h: &PanoramaImage,
    material: Material,
    out_size: usize,
    exposure: f64,
) -> Result<RasterImage> {
    if h.kind() != PanoKind::HdrRadiance {
        return Err(Error::InvalidInput(format!(
            "relight_sphere expects an hdr-radiance panorama, got {:?}",
            h.kind()
        )));
    }
    if out_size == 0 {
        return Err(Error::InvalidInput("relight output size must be positive".into()));
    }
    let env = match material {
        Material::Mirror => h.clone(),
        Material::Diffuse => diffuse_convolve(h, default_work_height(h))?,
    };
    let frame = h.frame();
    let (ax, ey, up) = (frame.azimuth_ref(), frame.east(), frame.up());
    let ch = env.channels();
    let mut out = RasterImage::new(out_size, out_size, 4, 0.0)?;
    let mut sample = vec![0.0; ch];
    for y in 0..out_size {
        for x in 0..out_size {
            let px = 2.0 * (x as f64 + 0.5) / out_size as f64 - 1.0;
            let py = 1.0 - 2.0 * (y as f64 + 0.5) / out_size as f64;
            let rr = px * px + py * py;
            if rr > 1.0 {
                continue;
            }
            let nz = (1.0 - rr).sqrt();
            let n = ax * px + ey * py + up * nz;
            let dir = match material {
                Material::Mirror => {
                    // reflect(view, n) with view = -up.
                    let v = -up;
                    v - n * (2.0 * v.dot(&n))
                }
                Material::Diffuse => n,
            };
            let (uc, vc) = env.direction_to_pixel(&dir)?;
            env.bilinear_into(uc, vc, &mut sample);
            let o = out.pixel_mut(x, y);
            for c in 0..3 {
                let radiance = sample[c.min(ch - 1)];
                o[c] = (exposure * radiance).clamp(0.0, 1.0).powf(1.0 / hdr::GAMMA);
            }
            o[3] = 1.0;
        }
    }
    Ok(out)
}
