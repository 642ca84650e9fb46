//! Analytic test scenes: an axis-aligned box room and a spherical shell,
//! ray-cast in closed form. These provide exact ground truth for the warp
//! and rendering pipeline — cameras render Lambertian radiance plus planar
//! depth, and panoramas render the same scene directly from a locale.

use nalgebra::{Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Camera, DepthImage};
use crate::panorama::{pixel_center_coord, Locale, PanoKind, PanoramaImage};
use crate::raster::RasterImage;

/// A ray/surface intersection. `t` is metric distance for unit directions.
#[derive(Debug, Clone)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    /// Inward-facing (toward the scene interior) unit normal.
    pub normal: Vector3<f64>,
    /// Face id; 2·axis + (1 if the max-side plane) for boxes, 0 for shells.
    pub face: usize,
}

/// Closed scene that every interior ray intersects exactly once.
pub trait RayScene {
    /// Casts a unit-direction ray from a point strictly inside the scene.
    fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit>;
    /// View-independent RGB radiance of a surface point.
    fn radiance(&self, hit: &Hit) -> [f64; 3];
}

/// Per-face emission model of a [`BoxRoom`].
#[derive(Debug, Clone)]
pub enum Shading {
    /// Constant radiance per face.
    FaceConstant([[f64; 3]; 6]),
    /// Per-face base color modulated linearly across the face
    /// (`0.7 + 0.2 u + 0.1 w` in normalized in-plane coordinates), giving a
    /// smooth signal for resampling-tolerance tests.
    Gradient([[f64; 3]; 6]),
}

/// Axis-aligned box interior. Face ids: 0 −x, 1 +x, 2 −y, 3 +y, 4 −z, 5 +z.
#[derive(Debug, Clone)]
pub struct BoxRoom {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub shading: Shading,
}

impl BoxRoom {
    /// Cube of half-extent `half` centered at the origin.
    pub fn cube(half: f64, shading: Shading) -> Self {
        Self {
            min: Vector3::repeat(-half),
            max: Vector3::repeat(half),
            shading,
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }

    fn face_uv(&self, face: usize, p: &Vector3<f64>) -> (f64, f64) {
        let (b, c) = match face / 2 {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        (
            (p[b] - self.min[b]) / (self.max[b] - self.min[b]),
            (p[c] - self.min[c]) / (self.max[c] - self.min[c]),
        )
    }
}

impl RayScene for BoxRoom {
    fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        if !self.contains(origin) {
            return None;
        }
        let mut best: Option<Hit> = None;
        for axis in 0..3 {
            if dir[axis] == 0.0 {
                continue;
            }
            for (side, plane) in [(0usize, self.min[axis]), (1, self.max[axis])] {
                let t = (plane - origin[axis]) / dir[axis];
                if t <= 1e-12 {
                    continue;
                }
                if best.as_ref().is_some_and(|b| b.t <= t) {
                    continue;
                }
                let point = origin + dir * t;
                let (oa, ob) = ((axis + 1) % 3, (axis + 2) % 3);
                let eps = 1e-9;
                if point[oa] < self.min[oa] - eps
                    || point[oa] > self.max[oa] + eps
                    || point[ob] < self.min[ob] - eps
                    || point[ob] > self.max[ob] + eps
                {
                    continue;
                }
                let mut normal = Vector3::zeros();
                normal[axis] = if side == 0 { 1.0 } else { -1.0 };
                best = Some(Hit {
                    t,
                    point,
                    normal,
                    face: axis * 2 + side,
                });
            }
        }
        best
    }

    fn radiance(&self, hit: &Hit) -> [f64; 3] {
        match &self.shading {
            Shading::FaceConstant(colors) => colors[hit.face],
            Shading::Gradient(colors) => {
                let (u, w) = self.face_uv(hit.face, &hit.point);
                let m = 0.7 + 0.2 * u + 0.1 * w;
                let c = colors[hit.face];
                [c[0] * m, c[1] * m, c[2] * m]
            }
        }
    }
}

/// Uniform-radiance sphere interior.
#[derive(Debug, Clone)]
pub struct SphericalShell {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub radiance: [f64; 3],
}

impl RayScene for SphericalShell {
    fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let o = origin - self.center;
        let c0 = o.norm_squared() - self.radius * self.radius;
        if c0 >= 0.0 {
            return None; // on or outside the shell
        }
        let b = dir.dot(&o);
        let t = -b + (b * b - c0).sqrt();
        let point = origin + dir * t;
        Some(Hit {
            t,
            point,
            normal: (self.center - point) / self.radius,
            face: 0,
        })
    }

    fn radiance(&self, _hit: &Hit) -> [f64; 3] {
        self.radiance
    }
}

/// Renders an observation: Lambertian HDR image plus planar depth (the
/// camera-frame z of each hit, matching the depth-unprojection convention).
pub fn render_camera(scene: &impl RayScene, camera: &Camera) -> Result<(RasterImage, DepthImage)> {
    let (w, h) = (camera.width, camera.height);
    let origin = camera.center_world();
    let mut color = RasterImage::new(w, h, 3, 0.0)?;
    let mut depth = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let d_cam = camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
            let d_world = camera.dir_to_world(&d_cam).normalize();
            let hit = scene.raycast(&origin, &d_world).ok_or_else(|| {
                Error::InvalidInput(format!("camera ray ({x},{y}) escapes the scene"))
            })?;
            color.pixel_mut(x, y).copy_from_slice(&scene.radiance(&hit));
            depth[y * w + x] = camera.point_to_camera(&hit.point).z;
        }
    }
    Ok((color, DepthImage::from_data(w, h, depth)?))
}

/// Ray-casts the scene's radiance over a full sphere at the locale.
pub fn render_panorama(
    scene: &impl RayScene,
    locale: &Locale,
    height: usize,
) -> Result<PanoramaImage> {
    let mut out = PanoramaImage::new(height, 3, PanoKind::HdrRadiance, locale.clone(), 0.0)?;
    let (w, h) = (out.width(), out.height());
    for v in 0..h {
        for u in 0..w {
            let dir = locale.direction(pixel_center_coord(u, v, w, h));
            let hit = scene.raycast(&locale.position, &dir).ok_or_else(|| {
                Error::InvalidInput(format!("panorama ray ({u},{v}) escapes the scene"))
            })?;
            out.pixel_mut(u, v).copy_from_slice(&scene.radiance(&hit));
        }
    }
    Ok(out)
}

/// Ray-casts surface distance over a full sphere at the locale.
pub fn render_distance_panorama(
    scene: &impl RayScene,
    locale: &Locale,
    height: usize,
) -> Result<PanoramaImage> {
    let mut out = PanoramaImage::new(height, 1, PanoKind::DistanceMeters, locale.clone(), 0.0)?;
    let (w, h) = (out.width(), out.height());
    for v in 0..h {
        for u in 0..w {
            let dir = locale.direction(pixel_center_coord(u, v, w, h));
            let hit = scene.raycast(&locale.position, &dir).ok_or_else(|| {
                Error::InvalidInput(format!("panorama ray ({u},{v}) escapes the scene"))
            })?;
            out.pixel_mut(u, v)[0] = hit.t;
        }
    }
    Ok(out)
}

/// Pinhole camera at `position` looking at `target`, with square pixels,
/// a centered principal point, and image-up chosen from `up_hint`.
pub fn camera_looking_at(
    position: Vector3<f64>,
    target: Vector3<f64>,
    up_hint: Vector3<f64>,
    fx: f64,
    width: usize,
    height: usize,
) -> Result<Camera> {
    let forward = (target - position)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidInput("camera target coincides with position".into()))?;
    let right = forward
        .cross(&up_hint)
        .try_normalize(1e-9)
        .ok_or_else(|| Error::InvalidInput("camera up hint is parallel to the view".into()))?;
    let down = forward.cross(&right);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 1>(0, 0).copy_from(&right);
    m.fixed_view_mut::<3, 1>(0, 1).copy_from(&down);
    m.fixed_view_mut::<3, 1>(0, 2).copy_from(&forward);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&position);
    Camera::new(
        fx,
        fx,
        width as f64 / 2.0,
        height as f64 / 2.0,
        width,
        height,
        m,
    )
}
