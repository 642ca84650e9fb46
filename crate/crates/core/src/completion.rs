//! Non-neural baselines that fill the unobserved part of a panorama.
//!
//! `complete_nn` retrieves the best-matching complete panorama from a
//! library, scored in pixel space over the observed region and over every
//! column rotation; `complete_mirror` reflects observed columns across the
//! vertical seam and diffuses whatever remains. Both keep observed pixels
//! bit-exact.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inpaint::fill_panorama_holes;
use crate::panorama::PanoramaImage;

/// Library of complete panoramas at one resolution, values in `[0,1]`.
#[derive(Debug, Clone)]
pub struct PanoLibrary {
    entries: Vec<(String, PanoramaImage)>,
}

impl PanoLibrary {
    pub fn new(entries: Vec<(String, PanoramaImage)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("panorama library is empty".into()));
        }
        let (w, h, ch) = {
            let p = &entries[0].1;
            (p.width(), p.height(), p.channels())
        };
        for (id, p) in &entries {
            if p.width() != w || p.height() != h || p.channels() != ch {
                return Err(Error::DimensionMismatch(format!(
                    "library entry '{id}' is {}x{}x{}, expected {w}x{h}x{ch}",
                    p.width(),
                    p.height(),
                    p.channels()
                )));
            }
            if p.data().iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidInput(format!(
                    "library entry '{id}' has values outside [0,1]"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, PanoramaImage)] {
        &self.entries
    }
}

/// The winning library entry of a nearest-neighbor completion.
#[derive(Debug, Clone, PartialEq)]
pub struct NnMatch {
    pub id: String,
    /// Columns the entry was rolled left to align with the input.
    pub rotation: usize,
    /// Mean squared color distance over observed pixels.
    pub score: f64,
}

/// Mean squared color distance between the observed pixels of `partial` and
/// `entry` rolled left by `rotation` columns.
fn rotation_score(partial: &PanoramaImage, entry: &PanoramaImage, rotation: usize) -> (f64, usize) {
    let (w, h, ch) = (partial.width(), partial.height(), partial.channels());
    let mut sum = 0.0;
    let mut observed = 0usize;
    for v in 0..h {
        for u in 0..w {
            if !partial.is_observed(u, v) {
                continue;
            }
            observed += 1;
            let a = partial.pixel(u, v);
            let b = entry.pixel((u + rotation) % w, v);
            for c in 0..ch {
                let d = a[c] - b[c];
                sum += d * d;
            }
        }
    }
    (sum, observed)
}

/// Fills the unobserved pixels of `partial` from the best library entry,
/// searched over all entries and all column rotations. Observed pixels are
/// kept verbatim.
pub fn complete_nn(
    partial: &PanoramaImage,
    library: &PanoLibrary,
) -> Result<(PanoramaImage, NnMatch)> {
    let (w, h) = (partial.width(), partial.height());
    {
        let p = &library.entries[0].1;
        if p.width() != w || p.height() != h || p.channels() != partial.channels() {
            return Err(Error::DimensionMismatch(format!(
                "partial {}x{}x{} vs library {}x{}x{}",
                w,
                h,
                partial.channels(),
                p.width(),
                p.height(),
                p.channels()
            )));
        }
    }
    if !(0..w * h).any(|i| partial.is_observed(i % w, i / w)) {
        return Err(Error::InvalidInput(
            "nearest-neighbor completion needs at least one observed pixel".into(),
        ));
    }

    // Best (score, rotation) per entry, then a sequential argmin so ties
    // resolve to the first entry and smallest rotation.
    let per_entry: Vec<(f64, usize)> = library
        .entries
        .par_iter()
        .map(|(_, entry)| {
            let mut best = (f64::INFINITY, 0usize);
            for r in 0..w {
                let (sum, n) = rotation_score(partial, entry, r);
                let score = sum / n as f64;
                if score < best.0 {
                    best = (score, r);
                }
            }
            best
        })
        .collect();
    let (mut best_i, mut best) = (0usize, per_entry[0]);
    for (i, cand) in per_entry.iter().enumerate().skip(1) {
        if cand.0 < best.0 {
            best_i = i;
            best = *cand;
        }
    }

    let (id, entry) = &library.entries[best_i];
    let mut out = partial.clone();
    for v in 0..h {
        for u in 0..w {
            if !partial.is_observed(u, v) {
                let src = entry.pixel((u + best.1) % w, v);
                out.pixel_mut(u, v).copy_from_slice(src);
            }
        }
    }
    Ok((
        out,
        NnMatch {
            id: id.clone(),
            rotation: best.1,
            score: best.0,
        },
    ))
}

/// Fills unobserved pixel `(u, v)` from its horizontal mirror `(W−1−u, v)`
/// when that pixel is observed, then diffuses the remaining holes closed.
pub fn complete_mirror(partial: &PanoramaImage) -> Result<PanoramaImage> {
    let (w, h) = (partial.width(), partial.height());
    let mut out = partial.clone();
    for v in 0..h {
        for u in 0..w {
            if !partial.is_observed(u, v) && partial.is_observed(w - 1 - u, v) {
                let src = partial.pixel(w - 1 - u, v).to_vec();
                out.pixel_mut(u, v).copy_from_slice(&src);
            }
        }
    }
    fill_panorama_holes(&mut out)?;
    Ok(out)
}
