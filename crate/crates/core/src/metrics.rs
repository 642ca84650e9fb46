//! Evaluation metrics for illumination maps, scalar losses with analytic
//! gradients, and a finite-difference gradient checker.
//!
//! `eval_illum` reports solid-angle-weighted mean per-pixel distances (log,
//! linear, and diffuse-convolved); the `loss_*` functions are plain means
//! suited to optimization and are all covered by `grad_check`.

use nalgebra::Vector3;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::panorama::{Locale, PanoKind, PanoramaImage};
use crate::shading::{average_pool, default_work_height, diffuse_convolve, diffuse_convolve_adjoint};
use crate::warp::warp_jacobian;

/// Weighting convention recorded in every report: whether these metrics
/// should be per-pixel means or image sums, and whether solid-angle
/// weighted, is a judgment call — this library always uses weighted means so
/// values are resolution-independent.
pub const REPORT_CONVENTION: &str = "solid-angle-weighted per-pixel mean over compared pixels";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Weighted mean per-pixel Euclidean distance on `ln(1+H)`.
    pub l2_log: f64,
    /// Same on linear radiance.
    pub l2: f64,
    /// Same on the diffuse-convolved maps at the work dimensions.
    pub diffuse: f64,
    pub pixels_compared: usize,
    pub pixels_skipped: usize,
    /// Columns the ground truth was rolled left to best match the prediction.
    pub rotation_offset: usize,
    pub convention: String,
}

/// Weighted mean distance between `pred` and `gt` rolled left by `rot`
/// columns, comparing only pixels observed in both. Returns the mean, the
/// number of pixels compared, and the number skipped.
fn weighted_mean_distance(
    pred: &PanoramaImage,
    gt: &PanoramaImage,
    rot: usize,
    log: bool,
) -> Result<(f64, usize, usize)> {
    let (w, h, ch) = (pred.width(), pred.height(), pred.channels());
    let rows: Vec<(f64, f64, usize, usize)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let s = pred.solid_angle(v).expect("row in range");
            let mut acc = 0.0;
            let mut wsum = 0.0;
            let mut compared = 0;
            let mut skipped = 0;
            for u in 0..w {
                let ug = (u + rot) % w;
                if !pred.is_observed(u, v) || !gt.is_observed(ug, v) {
                    skipped += 1;
                    continue;
                }
                let (a, b) = (pred.pixel(u, v), gt.pixel(ug, v));
                let mut d2 = 0.0;
                for c in 0..ch {
                    let d = if log {
                        a[c].ln_1p() - b[c].ln_1p()
                    } else {
                        a[c] - b[c]
                    };
                    d2 += d * d;
                }
                acc += s * d2.sqrt();
                wsum += s;
                compared += 1;
            }
            (acc, wsum, compared, skipped)
        })
        .collect();
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut compared = 0;
    let mut skipped = 0;
    for (a, ws, c, sk) in rows {
        acc += a;
        wsum += ws;
        compared += c;
        skipped += sk;
    }
    if compared == 0 {
        return Err(Error::InvalidInput(
            "no pixel is observed in both panoramas".into(),
        ));
    }
    Ok((acc / wsum, compared, skipped))
}

/// Clone with unobserved pixels replaced by zero radiance, so the diffuse
/// convolution (which has no sentinel handling) sees darkness, not `-1`.
fn zero_holes(p: &PanoramaImage) -> PanoramaImage {
    let mut out = p.clone();
    for v in 0..p.height() {
        for u in 0..p.width() {
            if !p.is_observed(u, v) {
                out.pixel_mut(u, v).fill(0.0);
            }
        }
    }
    out
}

/// Compares a predicted illumination map against ground truth. With `align`,
/// the ground truth is first rolled to the column offset minimizing the
/// linear-radiance distance and the offset is reported.
pub fn eval_illum(pred: &PanoramaImage, gt: &PanoramaImage, align: bool) -> Result<EvalReport> {
    if pred.width() != gt.width() || pred.height() != gt.height() || pred.channels() != gt.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            pred.width(),
            pred.height(),
            pred.channels(),
            gt.width(),
            gt.height(),
            gt.channels()
        )));
    }
    for (name, p) in [("prediction", pred), ("ground truth", gt)] {
        if p.kind() != PanoKind::HdrRadiance {
            return Err(Error::InvalidInput(format!(
                "{name} must be hdr-radiance, got {:?}",
                p.kind()
            )));
        }
    }

    let w = pred.width();
    let rotation_offset = if align {
        let scores: Vec<f64> = (0..w)
            .into_par_iter()
            .map(|k| match weighted_mean_distance(pred, gt, k, false) {
                Ok((d, _, _)) => d,
                Err(_) => f64::INFINITY,
            })
            .collect();
        let mut best = 0;
        for (k, s) in scores.iter().enumerate().skip(1) {
            if *s < scores[best] {
                best = k;
            }
        }
        if !scores[best].is_finite() {
            return Err(Error::InvalidInput(
                "no rotation yields overlapping observed pixels".into(),
            ));
        }
        best
    } else {
        0
    };

    let (l2, pixels_compared, pixels_skipped) =
        weighted_mean_distance(pred, gt, rotation_offset, false)?;
    let (l2_log, _, _) = weighted_mean_distance(pred, gt, rotation_offset, true)?;

    let gt_aligned = gt.roll_columns_left(rotation_offset);
    let wh = default_work_height(gt);
    let dp = diffuse_convolve(&zero_holes(pred), wh)?;
    let dg = diffuse_convolve(&zero_holes(&gt_aligned), wh)?;
    let (diffuse, _, _) = weighted_mean_distance(&dp, &dg, 0, false)?;

    Ok(EvalReport {
        l2_log,
        l2,
        diffuse,
        pixels_compared,
        pixels_skipped,
        rotation_offset,
        convention: REPORT_CONVENTION.to_string(),
    })
}

fn check_same_dims(a: &PanoramaImage, b: &PanoramaImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

/// Mean squared difference of `ln(1+H)` over pixels observed in both maps.
pub fn loss_l2_log(pred: &PanoramaImage, gt: &PanoramaImage) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let ch = pred.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in 0..pred.height() {
        for u in 0..pred.width() {
            if !pred.is_observed(u, v) || !gt.is_observed(u, v) {
                continue;
            }
            let (a, b) = (pred.pixel(u, v), gt.pixel(u, v));
            for c in 0..ch {
                let d = a[c].ln_1p() - b[c].ln_1p();
                sum += d * d;
            }
            n += ch;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("no overlapping observed pixels".into()));
    }
    Ok(sum / n as f64)
}

/// The literal signed mean of `ln(1+H)` differences — not a norm (it can be
/// negative and cancel); kept for comparison, see `loss_l2_log`.
pub fn loss_l2_log_signed(pred: &PanoramaImage, gt: &PanoramaImage) -> Result<f64> {
    check_same_dims(pred, gt)?;
    let ch = pred.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in 0..pred.height() {
        for u in 0..pred.width() {
            if !pred.is_observed(u, v) || !gt.is_observed(u, v) {
                continue;
            }
            let (a, b) = (pred.pixel(u, v), gt.pixel(u, v));
            for c in 0..ch {
                sum += a[c].ln_1p() - b[c].ln_1p();
            }
            n += ch;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("no overlapping observed pixels".into()));
    }
    Ok(sum / n as f64)
}

/// Mean squared difference of the diffuse-convolved maps at the work
/// dimensions. Both inputs must be fully observed.
pub fn loss_diffuse(pred: &PanoramaImage, gt: &PanoramaImage) -> Result<f64> {
    check_same_dims(pred, gt)?;
    for (name, p) in [("prediction", pred), ("ground truth", gt)] {
        if !(0..p.height()).all(|v| (0..p.width()).all(|u| p.is_observed(u, v))) {
            return Err(Error::InvalidInput(format!(
                "diffuse loss needs complete maps; {name} has unobserved pixels"
            )));
        }
    }
    let wh = default_work_height(gt);
    let dp = diffuse_convolve(pred, wh)?;
    let dg = diffuse_convolve(gt, wh)?;
    let n = dp.data().len();
    let sum: f64 = dp
        .data()
        .iter()
        .zip(dg.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// Weighted total: `0.1·l2_log + 0.05·diffuse`.
pub fn loss_total(l2_log: f64, diffuse: f64) -> f64 {
    0.1 * l2_log + 0.05 * diffuse
}

fn joint_valid_indices(pred: &GeometryMap, gt: &GeometryMap) -> Result<Vec<usize>> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let idx: Vec<usize> = (0..pred.valid.len())
        .filter(|&i| pred.valid[i] && gt.valid[i])
        .collect();
    if idx.is_empty() {
        return Err(Error::InvalidInput("no jointly valid pixels".into()));
    }
    Ok(idx)
}

/// Mean of `1 − n_pred·n_gt` over jointly valid pixels. Normals must be unit
/// length.
pub fn loss_normals_cosine(pred: &GeometryMap, gt: &GeometryMap) -> Result<f64> {
    let idx = joint_valid_indices(pred, gt)?;
    let mut sum = 0.0;
    for &i in &idx {
        for (name, m) in [("prediction", pred), ("ground truth", gt)] {
            if (m.normals[i].norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "{name} normal at {i} is not unit length"
                )));
            }
        }
        sum += 1.0 - pred.normals[i].dot(&gt.normals[i]);
    }
    Ok(sum / idx.len() as f64)
}

/// Mean absolute plane-offset difference over jointly valid pixels.
pub fn loss_offsets_l1(pred: &GeometryMap, gt: &GeometryMap) -> Result<f64> {
    let idx = joint_valid_indices(pred, gt)?;
    let sum: f64 = idx
        .iter()
        .map(|&i| (pred.plane_offsets[i] - gt.plane_offsets[i]).abs())
        .sum();
    Ok(sum / idx.len() as f64)
}

/// Mean absolute coordinate difference of the 3D points over jointly valid
/// pixels (mean over pixels and the three coordinates).
pub fn loss_points_l1(pred: &GeometryMap, gt: &GeometryMap) -> Result<f64> {
    let idx = joint_valid_indices(pred, gt)?;
    let sum: f64 = idx
        .iter()
        .map(|&i| (pred.points[i] - gt.points[i]).abs().sum())
        .sum();
    Ok(sum / (3 * idx.len()) as f64)
}

/// A scalar function of a flat parameter vector with an analytic gradient,
/// the unit `grad_check` operates on.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// `f(x) = Σ x²` — sanity anchor with gradient `2x`.
pub struct QuadraticField {
    pub dim: usize,
}

impl ScalarField for QuadraticField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter().map(|v| v * v).sum())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| 2.0 * v).collect())
    }
}

/// `loss_l2_log` as a field over the flattened predicted radiance, against a
/// fixed complete ground truth.
pub struct L2LogField {
    gt: Vec<f64>,
}

impl L2LogField {
    pub fn new(gt: Vec<f64>) -> Result<Self> {
        if gt.is_empty() {
            return Err(Error::InvalidInput("empty ground truth".into()));
        }
        Ok(Self { gt })
    }
}

impl ScalarField for L2LogField {
    fn dim(&self) -> usize {
        self.gt.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let n = self.gt.len() as f64;
        Ok(x.iter()
            .zip(&self.gt)
            .map(|(p, g)| {
                let d = p.ln_1p() - g.ln_1p();
                d * d
            })
            .sum::<f64>()
            / n)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.gt.len() as f64;
        Ok(x.iter()
            .zip(&self.gt)
            .map(|(p, g)| 2.0 * (p.ln_1p() - g.ln_1p()) / (1.0 + p) / n)
            .collect())
    }
}

/// `loss_diffuse` as a field over the flattened predicted radiance. The
/// gradient back-propagates through average pooling and the convolution,
/// both linear.
pub struct DiffuseLossField {
    height: usize,
    channels: usize,
    frame: Locale,
    work_height: usize,
    d_gt: PanoramaImage,
}

impl DiffuseLossField {
    pub fn new(gt: &PanoramaImage, work_height: usize) -> Result<Self> {
        let d_gt = diffuse_convolve(gt, work_height)?;
        Ok(Self {
            height: gt.height(),
            channels: gt.channels(),
            frame: gt.frame().clone(),
            work_height,
            d_gt,
        })
    }

    fn as_pano(&self, x: &[f64]) -> Result<PanoramaImage> {
        PanoramaImage::from_data(
            self.height,
            self.channels,
            PanoKind::HdrRadiance,
            self.frame.clone(),
            x.to_vec(),
        )
    }

    fn residual(&self, x: &[f64]) -> Result<PanoramaImage> {
        let pooled = average_pool(&self.as_pano(x)?, self.work_height)?;
        let mut d = diffuse_convolve(&pooled, self.work_height)?;
        for (a, b) in d.data_mut().iter_mut().zip(self.d_gt.data()) {
            *a -= *b;
        }
        Ok(d)
    }
}

impl ScalarField for DiffuseLossField {
    fn dim(&self) -> usize {
        self.height * self.height * 2 * self.channels
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        let n = r.data().len() as f64;
        Ok(r.data().iter().map(|d| d * d).sum::<f64>() / n)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.residual(x)?;
        let n = r.data().len() as f64;
        for d in r.data_mut() {
            *d *= 2.0 / n;
        }
        let g_pooled = diffuse_convolve_adjoint(&r)?;
        // Transpose of average pooling: spread each pooled-cell gradient
        // uniformly over its source block, scaled by the averaging factor.
        let f = self.height / self.work_height;
        let ch = self.channels;
        let norm = 1.0 / (f * f) as f64;
        let mut g = vec![0.0; self.dim()];
        let width = self.height * 2;
        for v in 0..self.height {
            for u in 0..width {
                let src = g_pooled.pixel(u / f, v / f);
                let dst = &mut g[(v * width + u) * ch..(v * width + u + 1) * ch];
                for c in 0..ch {
                    dst[c] = src[c] * norm;
                }
            }
        }
        Ok(g)
    }
}

/// Cosine normal loss as a field over flattened (not necessarily unit)
/// predicted normals; the value normalizes internally so finite differences
/// stay on the loss surface.
pub struct NormalsCosineField {
    gt: Vec<Vector3<f64>>,
}

impl NormalsCosineField {
    pub fn new(gt: Vec<Vector3<f64>>) -> Result<Self> {
        if gt.is_empty() {
            return Err(Error::InvalidInput("empty ground truth".into()));
        }
        for (i, n) in gt.iter().enumerate() {
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "ground-truth normal {i} is not unit length"
                )));
            }
        }
        Ok(Self { gt })
    }
}

impl ScalarField for NormalsCosineField {
    fn dim(&self) -> usize {
        3 * self.gt.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let m = self.gt.len() as f64;
        let mut sum = 0.0;
        for (i, g) in self.gt.iter().enumerate() {
            let n = Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            sum += 1.0 - n.dot(g) / n.norm();
        }
        Ok(sum / m)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.gt.len() as f64;
        let mut grad = vec![0.0; x.len()];
        for (i, g) in self.gt.iter().enumerate() {
            let n = Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            let r = n.norm();
            // d/dn [n·g/|n|] = g/|n| − (n·g)·n/|n|³
            let d = g / r - n * (n.dot(g) / (r * r * r));
            for a in 0..3 {
                grad[3 * i + a] = -d[a] / m;
            }
        }
        Ok(grad)
    }
}

/// Central-difference check of a field's analytic gradient over a seeded
/// random subsample of at least 256 entries (all entries when fewer exist).
/// Returns `max |g_analytic − g_fd| / max(1, |g_fd|)`.
pub fn grad_check(f: &dyn ScalarField, x: &[f64], h: f64, seed: u64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, field expects {}",
            x.len(),
            f.dim()
        )));
    }
    let g = f.gradient(x)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "analytic gradient has non-finite entries".into(),
        ));
    }
    let n = x.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, n.min(256)).into_vec();
    idx.sort_unstable();
    let errs: Result<Vec<f64>> = idx
        .par_iter()
        .map(|&i| {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            let fd = (f.value(&xp)? - f.value(&xm)?) / (2.0 * h);
            if !fd.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite finite difference at entry {i}"
                )));
            }
            Ok((g[i] - fd).abs() / fd.abs().max(1.0))
        })
        .collect();
    Ok(errs?.into_iter().fold(0.0, f64::max))
}

/// Finite-difference check of the warp Jacobian at the given world points:
/// max relative error between analytic rows and central differences of
/// `(φ, θ)`, with azimuth differences unwrapped across the seam.
pub fn warp_jacobian_fd_check(
    points: &[Vector3<f64>],
    locale: &Locale,
    h: f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    let mut worst = 0.0f64;
    for x in points {
        let j = warp_jacobian(x, locale)?;
        for axis in 0..3 {
            let mut xp = *x;
            xp[axis] += h;
            let mut xm = *x;
            xm[axis] -= h;
            let cp = locale.spherical(&(xp - locale.position))?;
            let cm = locale.spherical(&(xm - locale.position))?;
            let mut dphi = cp.phi - cm.phi;
            if dphi > std::f64::consts::PI {
                dphi -= std::f64::consts::TAU;
            } else if dphi < -std::f64::consts::PI {
                dphi += std::f64::consts::TAU;
            }
            let fd = [dphi / (2.0 * h), (cp.theta - cm.theta) / (2.0 * h)];
            for (row, fd_val) in fd.iter().enumerate() {
                if !fd_val.is_finite() {
                    return Err(Error::InvalidInput("non-finite finite difference".into()));
                }
                worst = worst.max((j[(row, axis)] - fd_val).abs() / fd_val.abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panorama::INVALID_SENTINEL;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_radiance(height: usize, channels: usize, seed: u64, lo: f64, hi: f64) -> PanoramaImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = PanoramaImage::new(height, channels, PanoKind::HdrRadiance, Locale::canonical(), 0.0)
            .unwrap();
        for x in p.data_mut() {
            *x = rng.gen_range(lo..hi);
        }
        p
    }

    #[test]
    fn eval_identical_inputs_is_zero() {
        let gt = random_radiance(10, 3, 1, 0.0, 2.0);
        let r = eval_illum(&gt, &gt, false).unwrap();
        assert_eq!(r.l2, 0.0);
        assert_eq!(r.l2_log, 0.0);
        assert_eq!(r.diffuse, 0.0);
        assert_eq!(r.rotation_offset, 0);
        assert_eq!(r.pixels_compared, 20 * 10);
        assert_eq!(r.pixels_skipped, 0);
    }

    #[test]
    fn eval_recovers_planted_rotation() {
        let gt = random_radiance(10, 3, 2, 0.0, 2.0);
        let pred = gt.roll_columns_left(10);
        let r = eval_illum(&pred, &gt, true).unwrap();
        assert_eq!(r.rotation_offset, 10);
        assert_eq!(r.l2, 0.0);
        assert_eq!(r.l2_log, 0.0);
        assert_eq!(r.diffuse, 0.0);
        // Without alignment the same pair scores well above zero.
        let raw = eval_illum(&pred, &gt, false).unwrap();
        assert!(raw.l2 > 0.1);
    }

    #[test]
    fn eval_constant_offset_closed_forms() {
        let gt = random_radiance(40, 3, 3, 0.2, 1.0);
        let mut pred = gt.clone();
        for x in pred.data_mut() {
            *x += 0.1;
        }
        let r = eval_illum(&pred, &gt, false).unwrap();
        let expect_l2 = 0.1 * 3.0f64.sqrt();
        assert_relative_eq!(r.l2, expect_l2, max_relative = 1e-12);
        let expect_diffuse = 0.05 * 3.0f64.sqrt();
        assert!(
            (r.diffuse - expect_diffuse).abs() <= 0.005 * expect_diffuse,
            "diffuse {} vs {expect_diffuse}",
            r.diffuse
        );
    }

    #[test]
    fn eval_skips_unobserved_pixels() {
        let gt = random_radiance(8, 3, 4, 0.0, 2.0);
        let mut pred = gt.clone();
        pred.pixel_mut(3, 2).fill(INVALID_SENTINEL);
        pred.pixel_mut(9, 5).fill(INVALID_SENTINEL);
        let r = eval_illum(&pred, &gt, false).unwrap();
        assert_eq!(r.pixels_compared, 16 * 8 - 2);
        assert_eq!(r.pixels_skipped, 2);
        assert_eq!(r.l2, 0.0);
    }

    #[test]
    fn eval_rejects_mismatches() {
        let a = random_radiance(8, 3, 5, 0.0, 1.0);
        let b = random_radiance(10, 3, 6, 0.0, 1.0);
        assert!(eval_illum(&a, &b, false).is_err());
        let mut ldr = a.clone();
        ldr.set_kind(PanoKind::LdrColor);
        assert!(eval_illum(&ldr, &a, false).is_err());
    }

    #[test]
    fn eval_is_resolution_stable() {
        // The same smooth environment sampled at two resolutions.
        let sample = |height: usize, offset: f64| {
            let mut p = PanoramaImage::new(height, 1, PanoKind::HdrRadiance, Locale::canonical(), 0.0)
                .unwrap();
            for v in 0..height {
                for u in 0..2 * height {
                    let theta = (v as f64 + 0.5) * std::f64::consts::PI / height as f64;
                    let phi = (u as f64 + 0.5) * std::f64::consts::TAU / (2 * height) as f64;
                    p.pixel_mut(u, v)[0] = 0.8
                        + 0.4 * theta.sin() * phi.cos()
                        + 0.2 * theta.cos()
                        + offset * (0.15 + 0.1 * theta.sin() * phi.sin());
                }
            }
            p
        };
        let coarse = eval_illum(&sample(20, 1.0), &sample(20, 0.0), false).unwrap();
        let fine = eval_illum(&sample(40, 1.0), &sample(40, 0.0), false).unwrap();
        for (a, b) in [
            (coarse.l2, fine.l2),
            (coarse.l2_log, fine.l2_log),
            (coarse.diffuse, fine.diffuse),
        ] {
            assert!((a - b).abs() <= 0.01 * a.max(b), "{a} vs {b}");
        }
    }

    #[test]
    fn report_serializes_roundtrip() {
        let gt = random_radiance(8, 3, 7, 0.0, 2.0);
        let r = eval_illum(&gt.roll_columns_left(3), &gt, true).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(json.contains("solid-angle"));
    }

    #[test]
    fn losses_zero_symmetric_weighted() {
        let a = random_radiance(10, 3, 8, 0.0, 2.0);
        let b = random_radiance(10, 3, 9, 0.0, 2.0);
        assert_eq!(loss_l2_log(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_diffuse(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(
            loss_l2_log(&a, &b).unwrap(),
            loss_l2_log(&b, &a).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            loss_diffuse(&a, &b).unwrap(),
            loss_diffuse(&b, &a).unwrap(),
            max_relative = 1e-12
        );
        assert!(loss_l2_log(&a, &b).unwrap() > 0.0);
        assert_relative_eq!(loss_total(1.0, 2.0), 0.2, max_relative = 1e-15);
    }

    #[test]
    fn signed_mean_cancels_where_squared_does_not() {
        let mut a = random_radiance(6, 1, 10, 0.5, 1.0);
        let b = a.clone();
        // Symmetric perturbation in log space: +d on one pixel, −d on another.
        let d = 0.05;
        a.pixel_mut(0, 0)[0] = (b.pixel(0, 0)[0].ln_1p() + d).exp_m1();
        a.pixel_mut(1, 0)[0] = (b.pixel(1, 0)[0].ln_1p() - d).exp_m1();
        let signed = loss_l2_log_signed(&a, &b).unwrap();
        assert!(signed.abs() < 1e-12);
        assert!(loss_l2_log(&a, &b).unwrap() > 0.0);
    }

    fn flat_map(width: usize, height: usize, normals: Vec<Vector3<f64>>, offsets: Vec<f64>) -> GeometryMap {
        let n = width * height;
        GeometryMap {
            width,
            height,
            normals,
            plane_offsets: offsets,
            points: vec![Vector3::zeros(); n],
            valid: vec![true; n],
        }
    }

    #[test]
    fn geometry_losses_match_examples() {
        let up = Vector3::new(0.0, 0.0, 1.0);
        let a = flat_map(4, 2, vec![up; 8], vec![1.0; 8]);
        assert_eq!(loss_normals_cosine(&a, &a).unwrap(), 0.0);
        let b = flat_map(4, 2, vec![-up; 8], vec![1.5; 8]);
        assert_eq!(loss_normals_cosine(&a, &b).unwrap(), 2.0);
        assert_relative_eq!(loss_offsets_l1(&a, &b).unwrap(), 0.5, max_relative = 1e-15);
        let mut c = b.clone();
        c.points = vec![Vector3::new(0.3, 0.0, 0.0); 8];
        assert_relative_eq!(loss_points_l1(&a, &c).unwrap(), 0.1, max_relative = 1e-12);
        let mut empty = a.clone();
        empty.valid = vec![false; 8];
        assert!(loss_normals_cosine(&a, &empty).is_err());
    }

    #[test]
    fn grad_check_quadratic_anchor() {
        // Small sum on purpose: the finite-difference noise floor is
        // ulp(Σx²)/2h and must stay far under the 1e-8 tolerance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = grad_check(&QuadraticField { dim: 64 }, &x, 1e-5, 0).unwrap();
        assert!(err < 1e-8, "max relative error {err}");
    }

    #[test]
    fn grad_check_l2_log_field() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let gt: Vec<f64> = (0..400).map(|_| rng.gen_range(0.1..2.0)).collect();
        let x: Vec<f64> = (0..400).map(|_| rng.gen_range(0.1..2.0)).collect();
        let err = grad_check(&L2LogField::new(gt).unwrap(), &x, 1e-5, 1).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn grad_check_diffuse_field() {
        let gt = random_radiance(10, 1, 13, 0.1, 2.0);
        let field = DiffuseLossField::new(&gt, 5).unwrap();
        let x = random_radiance(10, 1, 14, 0.1, 2.0);
        let err = grad_check(&field, x.data(), 1e-5, 2).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn grad_check_normals_field() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let gt: Vec<Vector3<f64>> = (0..120)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize()
            })
            .collect();
        let x: Vec<f64> = (0..360).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Keep predictions away from the zero vector.
        let x: Vec<f64> = x
            .chunks(3)
            .flat_map(|c| {
                let v = Vector3::new(c[0], c[1], c[2]);
                let v = if v.norm() < 0.3 { v + Vector3::new(0.5, 0.5, 0.5) } else { v };
                [v.x, v.y, v.z]
            })
            .collect();
        let err = grad_check(&NormalsCosineField::new(gt).unwrap(), &x, 1e-5, 3).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn grad_check_validates_inputs() {
        let f = QuadraticField { dim: 4 };
        assert!(grad_check(&f, &[1.0; 4], 1e-2, 0).is_err());
        assert!(grad_check(&f, &[1.0; 3], 1e-5, 0).is_err());
        assert!(grad_check(&f, &[1.0, f64::NAN, 0.0, 0.0], 1e-5, 0).is_err());
    }

    #[test]
    fn warp_jacobian_matches_finite_differences() {
        let locale = Locale::with_default_azimuth(
            Vector3::new(0.3, -0.2, 1.1),
            Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
        let points: Vec<Vector3<f64>> = (0..200)
            .map(|_| {
                loop {
                    let p = Vector3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                    );
                    let d = p - locale.position;
                    // Stay off the poles and the locale itself.
                    if d.norm() > 0.5 && d.xy().norm() > 0.1 * d.norm() {
                        return p;
                    }
                }
            })
            .collect();
        let err = warp_jacobian_fd_check(&points, &locale, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }
}
