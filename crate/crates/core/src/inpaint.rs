//! Hole filling by masked diffusion (Jacobi iterations).
//!
//! Shared by the distance-map builder and the completion baselines: pixels
//! flagged as holes are initialized to the mean of the observed pixels and
//! then repeatedly replaced by the average of their 4-neighbors until the
//! largest per-iteration change drops below a threshold. Observed pixels are
//! never modified. Columns wrap (equirectangular azimuth); rows do not.

use crate::error::{Error, Result};
use crate::panorama::PanoramaImage;

/// Convergence threshold on the max absolute per-pixel change.
pub const DIFFUSION_MAX_DELTA: f64 = 1e-4;
/// Iteration cap if the threshold is never reached.
pub const DIFFUSION_MAX_ITERS: usize = 500;

/// Fills hole pixels of an interleaved buffer in place and returns the number
/// of Jacobi iterations run. `valid` has one entry per pixel (not channel).
///
/// Errors if no pixel is observed (the fill value would be undefined).
pub fn diffuse_fill(
    data: &mut [f64],
    valid: &[bool],
    width: usize,
    height: usize,
    channels: usize,
    max_delta: f64,
    max_iters: usize,
) -> Result<usize> {
    if data.len() != width * height * channels || valid.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "diffuse_fill: buffer {} / mask {} vs {}x{}x{}",
            data.len(),
            valid.len(),
            width,
            height,
            channels
        )));
    }
    let holes: Vec<usize> = (0..valid.len()).filter(|&i| !valid[i]).collect();
    if holes.is_empty() {
        return Ok(0);
    }
    if holes.len() == valid.len() {
        return Err(Error::InvalidInput(
            "diffuse_fill: no observed pixels to diffuse from".into(),
        ));
    }

    // Seed holes with the per-channel mean of the observed pixels so the
    // fixed-point iteration starts from a sane global estimate.
    let mut mean = vec![0.0; channels];
    let mut count = 0usize;
    for (i, ok) in valid.iter().enumerate() {
        if *ok {
            for c in 0..channels {
                mean[c] += data[i * channels + c];
            }
            count += 1;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    for &i in &holes {
        data[i * channels..(i + 1) * channels].copy_from_slice(&mean);
    }

    let mut next = data.to_vec();
    let mut neighbor_buf = vec![0.0; channels];
    for iter in 1..=max_iters {
        let mut worst: f64 = 0.0;
        for &i in &holes {
            let (u, v) = (i % width, i / width);
            neighbor_buf.fill(0.0);
            let mut n = 0.0;
            let add = |uu: usize, vv: usize, buf: &mut [f64], n: &mut f64| {
                let j = (vv * width + uu) * channels;
                for c in 0..channels {
                    buf[c] += data[j + c];
                }
                *n += 1.0;
            };
            add(
                if u == 0 { width - 1 } else { u - 1 },
                v,
                &mut neighbor_buf,
                &mut n,
            );
            add(
                if u + 1 == width { 0 } else { u + 1 },
                v,
                &mut neighbor_buf,
                &mut n,
            );
            if v > 0 {
                add(u, v - 1, &mut neighbor_buf, &mut n);
            }
            if v + 1 < height {
                add(u, v + 1, &mut neighbor_buf, &mut n);
            }
            for c in 0..channels {
                let value = neighbor_buf[c] / n;
                worst = worst.max((value - data[i * channels + c]).abs());
                next[i * channels + c] = value;
            }
        }
        for &i in &holes {
            data[i * channels..(i + 1) * channels]
                .copy_from_slice(&next[i * channels..(i + 1) * channels]);
        }
        if worst < max_delta {
            return Ok(iter);
        }
    }
    Ok(max_iters)
}

/// Fills every unobserved pixel (any channel at the −1 sentinel) of a
/// panorama in place, using the default convergence parameters.
pub fn fill_panorama_holes(pano: &mut PanoramaImage) -> Result<usize> {
    let (w, h, ch) = (pano.width(), pano.height(), pano.channels());
    let valid: Vec<bool> = (0..w * h).map(|i| pano.is_observed(i % w, i / w)).collect();
    diffuse_fill(
        pano.data_mut(),
        &valid,
        w,
        h,
        ch,
        DIFFUSION_MAX_DELTA,
        DIFFUSION_MAX_ITERS,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panorama::{PanoKind, INVALID_SENTINEL};

    #[test]
    fn hole_bounded_by_constant_fills_to_constant() {
        // Interior block of holes surrounded by distance 2: the diffusion
        // fixed point is the constant itself.
        let (w, h) = (16, 8);
        let mut data = vec![2.0; w * h];
        let mut valid = vec![true; w * h];
        for v in 2..6 {
            for u in 4..12 {
                valid[v * w + u] = false;
                data[v * w + u] = INVALID_SENTINEL;
            }
        }
        diffuse_fill(&mut data, &valid, w, h, 1, 1e-6, 500).unwrap();
        for (i, x) in data.iter().enumerate() {
            assert!((x - 2.0).abs() < 1e-3, "pixel {i} = {x}");
        }
    }

    #[test]
    fn observed_pixels_untouched() {
        let (w, h) = (8, 4);
        let mut data: Vec<f64> = (0..w * h).map(|i| i as f64).collect();
        let valid: Vec<bool> = (0..w * h).map(|i| i % 3 != 0).collect();
        let before = data.clone();
        diffuse_fill(&mut data, &valid, w, h, 1, 1e-4, 500).unwrap();
        for i in 0..w * h {
            if valid[i] {
                assert_eq!(data[i], before[i]);
            }
        }
    }

    #[test]
    fn wraps_around_columns() {
        // Single hole at u=0 whose informative neighbors are u=W-1 and u=1;
        // make the vertical neighbors agree so the expected value is exact.
        let (w, h) = (6, 3);
        let mut data = vec![5.0; w * h];
        let mut valid = vec![true; w * h];
        data[w] = INVALID_SENTINEL;
        valid[w] = false;
        data[w + (w - 1)] = 9.0;
        data[w + 1] = 1.0;
        data[0] = 5.0;
        data[2 * w] = 5.0;
        diffuse_fill(&mut data, &valid, w, h, 1, 1e-12, 500).unwrap();
        assert!((data[w] - (9.0 + 1.0 + 5.0 + 5.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn all_holes_is_an_error() {
        let mut data = vec![INVALID_SENTINEL; 8];
        let valid = vec![false; 8];
        assert!(diffuse_fill(&mut data, &valid, 4, 2, 1, 1e-4, 10).is_err());
    }

    #[test]
    fn panorama_wrapper_fills_sentinels() {
        let mut pano = PanoramaImage::new(
            4,
            1,
            PanoKind::DistanceMeters,
            crate::panorama::Locale::canonical(),
            0.0,
        )
        .unwrap();
        for v in 0..4 {
            for u in 0..8 {
                pano.pixel_mut(u, v)[0] = if u < 4 { 3.0 } else { INVALID_SENTINEL };
            }
        }
        let iters = fill_panorama_holes(&mut pano).unwrap();
        assert!(iters > 0);
        for v in 0..4 {
            for u in 0..8 {
                assert!((pano.pixel(u, v)[0] - 3.0).abs() < 1e-3);
            }
        }
    }
}
