//! Forward warping of perspective observations onto a locale's sphere.
//!
//! Every valid source pixel carries a 3D point; the warp re-expresses that
//! point as a direction and distance from the locale, splats the pixel's
//! color into the nearest equirectangular cell, and resolves collisions with
//! a nearest-point-wins z-buffer. Colors are copied, never resampled, so the
//! output radiances form a sub-multiset of the input.

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, DepthImage, GeometryMap};
use crate::panorama::{Locale, PanoKind, PanoramaImage, INVALID_SENTINEL};
use crate::raster::RasterImage;

/// Source points closer to the locale than this are skipped: their direction
/// is numerically undefined.
pub const MIN_LOCALE_DISTANCE: f64 = 1e-6;

/// Height offset of a locale above its supporting surface, meters.
pub const LOCALE_HEIGHT: f64 = 0.10;

/// Slack for the occlusion depth test: generous near the sensor, 2% far out.
pub fn depth_tolerance(depth: f64) -> f64 {
    f64::max(0.02, 0.02 * depth)
}

/// Where the warp output should be centered.
#[derive(Debug, Clone)]
pub enum WarpTarget {
    /// An explicit locale.
    Locale(Locale),
    /// A pixel of the source image; the locale is derived from its geometry.
    SelectedPixel { x: usize, y: usize },
}

/// One observation to warp plus the target sphere parameters.
#[derive(Debug, Clone)]
pub struct WarpRequest<'a> {
    pub image: &'a RasterImage,
    pub geometry: &'a GeometryMap,
    pub camera: &'a Camera,
    pub target: WarpTarget,
    /// Kind recorded on the color output (LDR or HDR content).
    pub kind: PanoKind,
    /// Output panorama height; width is always twice this.
    pub pano_height: usize,
}

impl WarpRequest<'_> {
    fn validate(&self) -> Result<()> {
        let (w, h) = (self.camera.width, self.camera.height);
        if self.image.width() != w || self.image.height() != h {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} vs camera {}x{}",
                self.image.width(),
                self.image.height(),
                w,
                h
            )));
        }
        if self.geometry.width != w || self.geometry.height != h {
            return Err(Error::DimensionMismatch(format!(
                "geometry {}x{} vs camera {}x{}",
                self.geometry.width, self.geometry.height, w, h
            )));
        }
        if self.pano_height == 0 {
            return Err(Error::InvalidInput("pano_height = 0".into()));
        }
        Ok(())
    }

    /// The locale the warp is centered on, deriving it from the selected
    /// pixel when necessary.
    pub fn resolve_locale(&self) -> Result<Locale> {
        match &self.target {
            WarpTarget::Locale(l) => Ok(l.clone()),
            WarpTarget::SelectedPixel { x, y } => {
                locale_from_pixel(self.geometry, self.camera, *x, *y)
            }
        }
    }
}

/// Forward-warp output: color, per-direction distance, and a coverage mask
/// (1 where a source pixel splatted, 0 elsewhere). Unobserved color and
/// distance pixels hold the −1 sentinel.
#[derive(Debug, Clone)]
pub struct WarpedPanorama {
    pub color: PanoramaImage,
    pub distance: PanoramaImage,
    pub mask: PanoramaImage,
}

/// Builds the locale for a selected pixel: 10 cm along the surface normal,
/// up = the normal, azimuth from the default world reference.
pub fn locale_from_pixel(
    geometry: &GeometryMap,
    camera: &Camera,
    x: usize,
    y: usize,
) -> Result<Locale> {
    if x >= geometry.width || y >= geometry.height {
        return Err(Error::IndexOutOfRange(format!(
            "pixel ({x},{y}) outside {}x{}",
            geometry.width, geometry.height
        )));
    }
    let i = y * geometry.width + x;
    if !geometry.valid[i] {
        return Err(Error::InvalidInput(format!(
            "selected pixel ({x},{y}) has no valid geometry"
        )));
    }
    let p = camera.point_to_world(&geometry.points[i]);
    let n = camera.dir_to_world(&geometry.normals[i]);
    Locale::with_default_azimuth(p + LOCALE_HEIGHT * n, n)
}

/// Splats every valid source pixel onto the locale's sphere.
///
/// The z-buffer resolves collisions by distance, with the source pixel index
/// as a tie-break, so the result is deterministic and identical to the
/// sequential scan regardless of thread count.
pub fn forward_warp(req: &WarpRequest) -> Result<WarpedPanorama> {
    req.validate()?;
    let locale = req.resolve_locale()?;
    let (h, w) = (req.pano_height, 2 * req.pano_height);
    let channels = req.image.channels();
    let n_src = req.geometry.width * req.geometry.height;

    // Candidate splats, in source-pixel order.
    let candidates: Vec<Option<(usize, f64, usize)>> = (0..n_src)
        .into_par_iter()
        .map(|i| {
            if !req.geometry.valid[i] {
                return None;
            }
            let x_world = req.camera.point_to_world(&req.geometry.points[i]);
            let d = x_world - locale.position;
            let r = d.norm();
            if r <= MIN_LOCALE_DISTANCE {
                return None;
            }
            let coord = locale.spherical(&(d / r)).ok()?;
            let (uc, vc) = crate::panorama::spherical_to_continuous(coord, w, h);
            let (u, v) = crate::panorama::nearest_pixel(uc, vc, w, h);
            Some((v * w + u, r, i))
        })
        .collect();

    // Sequential z-buffer: min (distance, source index) per target cell.
    let mut best: Vec<Option<(f64, usize)>> = vec![None; w * h];
    for c in candidates.into_iter().flatten() {
        let (cell, r, i) = c;
        let better = match best[cell] {
            None => true,
            Some((br, bi)) => r < br || (r == br && i < bi),
        };
        if better {
            best[cell] = Some((r, i));
        }
    }

    let mut color = PanoramaImage::new(h, channels, req.kind, locale.clone(), INVALID_SENTINEL)?;
    let mut distance = PanoramaImage::new(
        h,
        1,
        PanoKind::DistanceMeters,
        locale.clone(),
        INVALID_SENTINEL,
    )?;
    let mut mask = PanoramaImage::new(h, 1, PanoKind::Mask, locale, 0.0)?;
    for (cell, entry) in best.iter().enumerate() {
        if let Some((r, i)) = entry {
            let (sx, sy) = (i % req.geometry.width, i / req.geometry.width);
            color.data_mut()[cell * channels..(cell + 1) * channels]
                .copy_from_slice(req.image.pixel(sx, sy));
            distance.data_mut()[cell] = *r;
            mask.data_mut()[cell] = 1.0;
        }
    }
    Ok(WarpedPanorama {
        color,
        distance,
        mask,
    })
}

/// Analytic Jacobian of the locale-frame spherical coordinates (φ, θ) of a
/// world point with respect to that point. Errors at the poles and at the
/// locale itself, where the parameterization is singular.
pub fn warp_jacobian(x: &Vector3<f64>, locale: &Locale) -> Result<Matrix2x3<f64>> {
    let d = x - locale.position;
    let r2 = d.norm_squared();
    if r2 == 0.0 {
        return Err(Error::Singularity("warp_jacobian at the locale".into()));
    }
    // Locale-frame coordinates of the offset.
    let basis = Matrix3::from_columns(&[locale.azimuth_ref(), locale.east(), locale.up()]);
    let q = basis.transpose() * d;
    let rho2 = q.x * q.x + q.y * q.y;
    let rho = rho2.sqrt();
    if rho < 1e-9 * r2.sqrt() {
        return Err(Error::Singularity(
            "warp_jacobian at a pole (theta in {0, pi})".into(),
        ));
    }
    let j_q = Matrix2x3::new(
        -q.y / rho2,
        q.x / rho2,
        0.0,
        q.z * q.x / (rho * r2),
        q.z * q.y / (rho * r2),
        -rho / r2,
    );
    Ok(j_q * basis.transpose())
}

/// True iff the locale projects inside the camera with positive depth and is
/// not occluded per the stored depth (within `depth_tolerance`). Pixels with
/// missing depth are treated as non-occluding.
pub fn visibility_check(locale: &Locale, camera: &Camera, depth: &DepthImage) -> bool {
    let p_cam = camera.point_to_camera(&locale.position);
    let Some((x, y)) = camera.project(&p_cam) else {
        return false;
    };
    if !camera.contains(x, y) {
        return false;
    }
    let (px, py) = (
        (x.floor() as usize).min(camera.width - 1),
        (y.floor() as usize).min(camera.height - 1),
    );
    if !depth.is_valid(px, py) {
        return true;
    }
    p_cam.z <= depth.depth(px, py) + depth_tolerance(p_cam.z)
}
