//! Ground-truth illumination maps by image-based rendering.
//!
//! Locales are sampled over a labeled point cloud (upward-facing floor or
//! furniture, clearance ball, 50 cm separation), then each locale's map is
//! produced in two steps: (1) forward-warp every visible RGB-D observation
//! onto the locale's sphere and keep the minimum distance per direction,
//! diffusing over holes; (2) push each direction back out to its 3D point
//! and gather HDR samples from every observation that sees it, blended with
//! weights `1/d⁴` in the camera-to-locale distance `d`.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{depth_to_points, Camera, DepthImage, GeometryMap};
use crate::inpaint::fill_panorama_holes;
use crate::panorama::{pixel_center_coord, Locale, PanoKind, PanoramaImage, INVALID_SENTINEL};
use crate::raster::RasterImage;
use crate::warp::{
    depth_tolerance, forward_warp, visibility_check, WarpRequest, WarpTarget, LOCALE_HEIGHT,
};

/// Semantic class of a scene point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceLabel {
    Floor,
    Furniture,
    Other,
}

/// Labeled, oriented point cloud in the world frame (z up).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledPointSet {
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub labels: Vec<SurfaceLabel>,
}

impl LabeledPointSet {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.normals.len() || self.points.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "point set columns disagree: {} points, {} normals, {} labels",
                self.points.len(),
                self.normals.len(),
                self.labels.len()
            )));
        }
        for (i, (p, n)) in self.points.iter().zip(&self.normals).enumerate() {
            if !(p.iter().all(|x| x.is_finite()) && n.iter().all(|x| x.is_finite())) {
                return Err(Error::InvalidInput(format!("non-finite entry at point {i}")));
            }
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "normal {i} is not unit length (|n| = {})",
                    n.norm()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Acceptance rules for locale sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocaleSamplingParams {
    /// Support normals must satisfy `n_z > support_cos_min`.
    pub support_cos_min: f64,
    /// Radius of the clearance ball around the locale position.
    pub clearance_radius: f64,
    /// Contact tolerance subtracted from the clearance radius, so points the
    /// locale legitimately rests on do not reject it.
    pub contact_tolerance: f64,
    /// Minimum distance between accepted locales.
    pub min_separation: f64,
    /// Height of the locale above its support point.
    pub height: f64,
}

impl Default for LocaleSamplingParams {
    fn default() -> Self {
        Self {
            support_cos_min: (std::f64::consts::PI / 8.0).cos(),
            clearance_radius: 0.10,
            contact_tolerance: 0.01,
            min_separation: 0.50,
            height: LOCALE_HEIGHT,
        }
    }
}

/// One registered RGB-D observation, fully loaded.
#[derive(Debug, Clone)]
pub struct Observation {
    pub hdr: RasterImage,
    pub depth: DepthImage,
    pub camera: Camera,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.camera.width, self.camera.height);
        if self.hdr.width() != w
            || self.hdr.height() != h
            || self.depth.width() != w
            || self.depth.height() != h
        {
            return Err(Error::DimensionMismatch(format!(
                "observation images {}x{} / {}x{} vs camera {w}x{h}",
                self.hdr.width(),
                self.hdr.height(),
                self.depth.width(),
                self.depth.height()
            )));
        }
        Ok(())
    }
}

/// Greedily samples locales over the point set, in input order.
///
/// A point becomes a locale support if its normal is within 22.5° of world
/// up, it is labeled floor or furniture, no scene point intrudes into the
/// clearance ball (radius minus contact tolerance), and the new locale is at
/// least `min_separation` from every previously accepted one.
pub fn sample_locales(
    scene: &LabeledPointSet,
    params: &LocaleSamplingParams,
) -> Result<Vec<Locale>> {
    scene.validate()?;
    if scene.is_empty() {
        return Err(Error::InvalidInput("cannot sample locales from an empty point set".into()));
    }
    let clear = params.clearance_radius - params.contact_tolerance;
    let mut accepted: Vec<Locale> = Vec::new();
    for i in 0..scene.len() {
        if scene.labels[i] == SurfaceLabel::Other {
            continue;
        }
        let n = scene.normals[i];
        if n.z <= params.support_cos_min {
            continue;
        }
        let position = scene.points[i] + n * params.height;
        if accepted
            .iter()
            .any(|l| (l.position - position).norm() < params.min_separation)
        {
            continue;
        }
        if scene
            .points
            .iter()
            .any(|q| (q - position).norm() < clear)
        {
            continue;
        }
        accepted.push(Locale::with_default_azimuth(position, n.normalize())?);
    }
    Ok(accepted)
}

fn points_only_geometry(depth: &DepthImage, camera: &Camera) -> GeometryMap {
    // The warp only consumes points and validity; normals are not needed
    // for the distance pass, so skip the plane fit (and its border mask).
    let pts = depth_to_points(depth, camera);
    GeometryMap {
        width: pts.width,
        height: pts.height,
        normals: vec![Vector3::zeros(); pts.points.len()],
        plane_offsets: vec![0.0; pts.points.len()],
        points: pts.points,
        valid: pts.valid,
    }
}

/// Step one: per-direction minimum of the forward-warped distances of every
/// visible observation, holes diffused closed. Errors when no observation
/// sees the locale.
pub fn build_distance_map(
    observations: &[Observation],
    locale: &Locale,
    pano_height: usize,
) -> Result<PanoramaImage> {
    let visible: Vec<&Observation> = observations
        .iter()
        .filter(|o| visibility_check(locale, &o.camera, &o.depth))
        .collect();
    if visible.is_empty() {
        return Err(Error::InvalidInput(
            "no observation has the locale in view; cannot build a distance map".into(),
        ));
    }
    let mut min_map = PanoramaImage::new(
        pano_height,
        1,
        PanoKind::DistanceMeters,
        locale.clone(),
        INVALID_SENTINEL,
    )?;
    for obs in visible {
        obs.validate()?;
        let geometry = points_only_geometry(&obs.depth, &obs.camera);
        let warped = forward_warp(&WarpRequest {
            image: &obs.hdr,
            geometry: &geometry,
            camera: &obs.camera,
            target: WarpTarget::Locale(locale.clone()),
            kind: PanoKind::HdrRadiance,
            pano_height,
        })?;
        for (dst, src) in min_map
            .data_mut()
            .iter_mut()
            .zip(warped.distance.data())
        {
            if *src != INVALID_SENTINEL && (*dst == INVALID_SENTINEL || *src < *dst) {
                *dst = *src;
            }
        }
    }
    fill_panorama_holes(&mut min_map)?;
    Ok(min_map)
}

/// Step two: reverse-mapped HDR gathering. Every panorama direction is
/// pushed out to its surface point `X = ℓ + dist·ω`; each observation that
/// sees `X` (in bounds, in front of the camera, and passing the depth test)
/// contributes a bilinear HDR sample, blended with weight `1/d⁴` where `d`
/// is that observation's camera-to-locale distance. Directions no
/// observation accepts stay at the −1 sentinel.
pub fn render_illumination(
    observations: &[Observation],
    locale: &Locale,
    distance_map: &PanoramaImage,
) -> Result<PanoramaImage> {
    if distance_map.kind() != PanoKind::DistanceMeters || distance_map.channels() != 1 {
        return Err(Error::InvalidInput(
            "render_illumination needs a single-channel distance map".into(),
        ));
    }
    let (w, h) = (distance_map.width(), distance_map.height());
    for v in 0..h {
        for u in 0..w {
            if !distance_map.is_observed(u, v) {
                return Err(Error::InvalidInput(format!(
                    "distance map has a hole at ({u},{v}); fill it before rendering"
                )));
            }
        }
    }
    let visible: Vec<(&Observation, f64)> = observations
        .iter()
        .filter(|o| visibility_check(locale, &o.camera, &o.depth))
        .map(|o| {
            let d = (o.camera.center_world() - locale.position).norm();
            (o, 1.0 / d.powi(4).max(1e-12))
        })
        .collect();
    if visible.is_empty() {
        return Err(Error::InvalidInput(
            "no observation has the locale in view; cannot render illumination".into(),
        ));
    }
    for (obs, _) in &visible {
        obs.validate()?;
    }

    let mut out = PanoramaImage::new(
        h,
        3,
        PanoKind::HdrRadiance,
        locale.clone(),
        INVALID_SENTINEL,
    )?;
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut row = vec![INVALID_SENTINEL; w * 3];
            let mut sample = vec![0.0; 0];
            for u in 0..w {
                let dir = locale.direction(pixel_center_coord(u, v, w, h));
                let x_world = locale.position + dir * distance_map.pixel(u, v)[0];
                let mut acc = [0.0; 3];
                let mut weight_sum = 0.0;
                for (obs, weight) in &visible {
                    let p_cam = obs.camera.point_to_camera(&x_world);
                    let Some((px, py)) = obs.camera.project(&p_cam) else {
                        continue;
                    };
                    if !obs.camera.contains(px, py) {
                        continue;
                    }
                    let (ix, iy) = (
                        (px.floor() as usize).min(obs.camera.width - 1),
                        (py.floor() as usize).min(obs.camera.height - 1),
                    );
                    // Two-sided consistency: the camera must have recorded
                    // (approximately) this surface point, not something in
                    // front of or behind it. Missing depth is non-occluding.
                    if obs.depth.is_valid(ix, iy)
                        && (p_cam.z - obs.depth.depth(ix, iy)).abs() > depth_tolerance(p_cam.z)
                    {
                        continue;
                    }
                    let ch = obs.hdr.channels();
                    sample.resize(ch, 0.0);
                    obs.hdr.bilinear_into(px, py, &mut sample);
                    for c in 0..3 {
                        acc[c] += weight * sample[c.min(ch - 1)];
                    }
                    weight_sum += weight;
                }
                if weight_sum > 0.0 {
                    for c in 0..3 {
                        row[u * 3 + c] = acc[c] / weight_sum;
                    }
                }
            }
            row
        })
        .collect();
    for (v, row) in rows.into_iter().enumerate() {
        out.data_mut()[v * w * 3..(v + 1) * w * 3].copy_from_slice(&row);
    }
    Ok(out)
}
