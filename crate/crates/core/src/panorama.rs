//! Equirectangular panorama parameterization.
//!
//! An illumination map is a `W x H` spherical image with `W = 2H`: columns span
//! the azimuth phi in `[0, 2pi)` and rows span the polar angle theta in `[0, pi]`,
//! measured from the locale's up axis. Pixel centers sit at half-integer offsets,
//! so pixel `(u, v)` maps to `phi = (u + 0.5) * 2pi / W`, `theta = (v + 0.5) * pi / H`.
//!
//! Continuous pixel coordinates returned by [`PanoramaImage::direction_to_pixel`]
//! use the corner-origin convention: the valid range is `[0, W] x [0, H]` and the
//! center of pixel `(u, v)` is at `(u + 0.5, v + 0.5)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored in color channels of pixels that received no observation.
pub const INVALID_SENTINEL: f64 = -1.0;

/// Direction on the unit sphere in the locale frame.
///
/// `theta = 0` is the locale's up axis; `phi = 0` is the azimuth reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    /// Azimuth in radians, `[0, 2pi)`.
    pub phi: f64,
    /// Polar angle in radians, `[0, pi]`.
    pub theta: f64,
}

impl SphericalCoord {
    /// Builds a coordinate, wrapping `phi` into `[0, 2pi)` and clamping `theta` to `[0, pi]`.
    pub fn new(phi: f64, theta: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let mut phi = phi % tau;
        if phi < 0.0 {
            phi += tau;
        }
        // The wrap above can round back up to exactly tau.
        if phi >= tau {
            phi = 0.0;
        }
        Self {
            phi,
            theta: theta.clamp(0.0, std::f64::consts::PI),
        }
    }
}

/// A 3D evaluation point with the frame that orients its panorama.
///
/// `up` is the unit axis at `theta = 0`; `azimuth_ref` is a unit vector
/// orthogonal to `up` marking `phi = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locale {
    pub position: Vector3<f64>,
    up: Vector3<f64>,
    azimuth_ref: Vector3<f64>,
}

impl Locale {
    const UNIT_TOL: f64 = 1e-9;

    /// Builds a locale from an explicit frame.
    ///
    /// `up` must be unit length and `azimuth_ref` unit length and orthogonal
    /// to `up`, both within 1e-9.
    pub fn new(
        position: Vector3<f64>,
        up: Vector3<f64>,
        azimuth_ref: Vector3<f64>,
    ) -> Result<Self> {
        if (up.norm() - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "locale up axis is not unit length (|up| = {})",
                up.norm()
            )));
        }
        if (azimuth_ref.norm() - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "azimuth reference is not unit length (|ref| = {})",
                azimuth_ref.norm()
            )));
        }
        if up.dot(&azimuth_ref).abs() > Self::UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "azimuth reference is not orthogonal to up (dot = {})",
                up.dot(&azimuth_ref)
            )));
        }
        Ok(Self {
            position,
            up,
            azimuth_ref,
        })
    }

    /// Builds a locale with the default azimuth reference: world +x projected
    /// onto the plane orthogonal to `up` (falling back to +y when `up` is
    /// parallel to +x).
    pub fn with_default_azimuth(position: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let n = up.norm();
        if (n - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "locale up axis is not unit length (|up| = {n})"
            )));
        }
        let mut reference = Vector3::x() - up * up.x;
        if reference.norm() < 1e-6 {
            reference = Vector3::y() - up * up.y;
        }
        let azimuth_ref = reference.normalize();
        // Re-orthogonalize so the constructor's 1e-9 invariant holds exactly.
        let azimuth_ref = (azimuth_ref - up * up.dot(&azimuth_ref)).normalize();
        Self::new(position, up, azimuth_ref)
    }

    /// Canonical frame: origin, z-up, +x azimuth reference.
    pub fn canonical() -> Self {
        Self {
            position: Vector3::zeros(),
            up: Vector3::z(),
            azimuth_ref: Vector3::x(),
        }
    }

    pub fn up(&self) -> Vector3<f64> {
        self.up
    }

    pub fn azimuth_ref(&self) -> Vector3<f64> {
        self.azimuth_ref
    }

    /// Third frame axis `up x azimuth_ref`, pointing along `phi = pi/2`.
    pub fn east(&self) -> Vector3<f64> {
        self.up.cross(&self.azimuth_ref)
    }

    /// World-frame unit direction for a spherical coordinate, renormalized exactly.
    pub fn direction(&self, coord: SphericalCoord) -> Vector3<f64> {
        let (sin_t, cos_t) = coord.theta.sin_cos();
        let (sin_p, cos_p) = coord.phi.sin_cos();
        let d = self.azimuth_ref * (sin_t * cos_p) + self.east() * (sin_t * sin_p) + self.up * cos_t;
        d.normalize()
    }

    /// Spherical coordinate of a world-frame direction (need not be normalized;
    /// zero vectors are rejected).
    pub fn spherical(&self, d: &Vector3<f64>) -> Result<SphericalCoord> {
        let r = d.norm();
        if r < 1e-12 {
            return Err(Error::InvalidInput(
                "cannot take spherical coordinates of a zero vector".into(),
            ));
        }
        let x = d.dot(&self.azimuth_ref);
        let y = d.dot(&self.east());
        let z = d.dot(&self.up);
        let theta = (z / r).clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        Ok(SphericalCoord::new(phi, theta))
    }
}

/// What a panorama's channels mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanoKind {
    /// Linear HDR radiance, >= 0 (invalid pixels carry the -1 sentinel).
    HdrRadiance,
    /// LDR color in [0, 1] (invalid pixels carry the -1 sentinel).
    LdrColor,
    /// Distance from the locale in meters, >= 0.
    DistanceMeters,
    /// Validity mask: 1 = valid, 0 = invalid.
    Mask,
}

/// Equirectangular per-direction image (`W = 2H`), row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramaImage {
    width: usize,
    height: usize,
    channels: usize,
    kind: PanoKind,
    data: Vec<f64>,
    frame: Locale,
}

impl PanoramaImage {
    /// Allocates a panorama filled with `fill`.
    pub fn new(
        height: usize,
        channels: usize,
        kind: PanoKind,
        frame: Locale,
        fill: f64,
    ) -> Result<Self> {
        let width = height * 2;
        if height == 0 {
            return Err(Error::InvalidInput("panorama height must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "panorama must have 1 or 3 channels, got {channels}"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            kind,
            data: vec![fill; width * height * channels],
            frame,
        })
    }

    /// Wraps existing row-major data; `data.len()` must equal `2h * h * channels`.
    pub fn from_data(
        height: usize,
        channels: usize,
        kind: PanoKind,
        frame: Locale,
        data: Vec<f64>,
    ) -> Result<Self> {
        let mut img = Self::new(height, channels, kind, frame, 0.0)?;
        if data.len() != img.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {}x{}x{} panorama, got {}",
                img.data.len(),
                img.width,
                height,
                channels,
                data.len()
            )));
        }
        img.data = data;
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kind(&self) -> PanoKind {
        self.kind
    }

    pub fn set_kind(&mut self, kind: PanoKind) {
        self.kind = kind;
    }

    pub fn frame(&self) -> &Locale {
        &self.frame
    }

    pub fn set_frame(&mut self, frame: Locale) {
        self.frame = frame;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn index(&self, u: usize, v: usize) -> usize {
        (v * self.width + u) * self.channels
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let i = self.index(u, v);
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [f64] {
        let i = self.index(u, v);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    /// True when every channel of the pixel is non-sentinel.
    pub fn is_observed(&self, u: usize, v: usize) -> bool {
        self.pixel(u, v).iter().all(|&x| x != INVALID_SENTINEL)
    }

    fn check_pixel(&self, u: usize, v: usize) -> Result<()> {
        if u >= self.width || v >= self.height {
            return Err(Error::IndexOutOfRange(format!(
                "pixel ({u}, {v}) outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// World-frame unit direction of the center of pixel `(u, v)`.
    pub fn pixel_to_direction(&self, u: usize, v: usize) -> Result<Vector3<f64>> {
        self.check_pixel(u, v)?;
        Ok(self.frame.direction(pixel_center_coord(u, v, self.width, self.height)))
    }

    /// Continuous corner-origin pixel coordinate of a world-frame direction.
    ///
    /// The returned `(u, v)` lies in `[0, W] x [0, H]`; `phi` wraps periodically.
    pub fn direction_to_pixel(&self, d: &Vector3<f64>) -> Result<(f64, f64)> {
        let coord = self.frame.spherical(d)?;
        Ok(spherical_to_continuous(coord, self.width, self.height))
    }

    /// Nearest pixel index for a continuous coordinate (column wraps, row clamps).
    pub fn nearest_pixel(&self, uc: f64, vc: f64) -> (usize, usize) {
        nearest_pixel(uc, vc, self.width, self.height)
    }

    /// Solid angle in steradians of any pixel in row `v`.
    pub fn solid_angle(&self, v: usize) -> Result<f64> {
        if v >= self.height {
            return Err(Error::IndexOutOfRange(format!(
                "row {v} outside height {}",
                self.height
            )));
        }
        Ok(pixel_solid_angle(v, self.width, self.height))
    }

    /// Bilinear sample at a continuous corner-origin coordinate.
    ///
    /// Columns wrap in phi; rows clamp at the poles. Writes one value per
    /// channel into `out`.
    pub fn bilinear_into(&self, uc: f64, vc: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        let x = uc - 0.5;
        let y = (vc - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor() as usize;
        let fx = x - x0;
        let fy = y - y0 as f64;
        let w = self.width as i64;
        let u0 = (((x0 as i64) % w) + w) % w;
        let u1 = (u0 + 1) % w;
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.pixel(u0 as usize, y0);
        let p10 = self.pixel(u1 as usize, y0);
        let p01 = self.pixel(u0 as usize, y1);
        let p11 = self.pixel(u1 as usize, y1);
        for c in 0..self.channels {
            out[c] = p00[c] * (1.0 - fx) * (1.0 - fy)
                + p10[c] * fx * (1.0 - fy)
                + p01[c] * (1.0 - fx) * fy
                + p11[c] * fx * fy;
        }
    }

    /// Returns a copy with columns rolled left by `shift`: output column `u`
    /// holds input column `(u + shift) mod W`.
    pub fn roll_columns_left(&self, shift: usize) -> Self {
        let mut out = self.clone();
        let s = shift % self.width;
        for v in 0..self.height {
            for u in 0..self.width {
                let src = (u + s) % self.width;
                let si = self.index(src, v);
                let di = out.index(u, v);
                out.data[di..di + self.channels]
                    .copy_from_slice(&self.data[si..si + self.channels]);
            }
        }
        out
    }
}

/// Spherical coordinate of the center of pixel `(u, v)`.
pub fn pixel_center_coord(u: usize, v: usize, width: usize, height: usize) -> SphericalCoord {
    SphericalCoord {
        phi: (u as f64 + 0.5) * std::f64::consts::TAU / width as f64,
        theta: (v as f64 + 0.5) * std::f64::consts::PI / height as f64,
    }
}

/// Continuous corner-origin pixel coordinate of a spherical coordinate:
/// `u = phi * W / 2pi`, `v = theta * H / pi`.
pub fn spherical_to_continuous(coord: SphericalCoord, width: usize, height: usize) -> (f64, f64) {
    (
        coord.phi * width as f64 / std::f64::consts::TAU,
        coord.theta * height as f64 / std::f64::consts::PI,
    )
}

/// Nearest pixel index for a continuous corner-origin coordinate.
pub fn nearest_pixel(uc: f64, vc: f64, width: usize, height: usize) -> (usize, usize) {
    let w = width as i64;
    let u = ((uc.floor() as i64 % w) + w) % w;
    let v = (vc.floor() as i64).clamp(0, height as i64 - 1);
    (u as usize, v as usize)
}

/// Solid angle in steradians of a pixel in row `v` of a `width x height` panorama:
/// `(2pi/W) * (pi/H) * sin(theta_v)` with `theta_v = (v + 0.5) * pi / H`.
pub fn pixel_solid_angle(v: usize, width: usize, height: usize) -> f64 {
    let theta = (v as f64 + 0.5) * std::f64::consts::PI / height as f64;
    (std::f64::consts::TAU / width as f64) * (std::f64::consts::PI / height as f64) * theta.sin()
}

/// Distortion-aware sampling grid: for every pixel, the continuous coordinates
/// of `(2k+1)^2` gnomonic (tangent-plane) offsets around its direction.
#[derive(Debug, Clone)]
pub struct DistortionGrid {
    width: usize,
    height: usize,
    k: usize,
    /// `(2k+1)^2` coordinates per pixel, row-major over pixels, offset-major
    /// `(dj, di)` within a pixel.
    coords: Vec<(f64, f64)>,
}

impl DistortionGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kernel_half_width(&self) -> usize {
        self.k
    }

    pub fn samples_per_pixel(&self) -> usize {
        (2 * self.k + 1) * (2 * self.k + 1)
    }

    /// Sampling coordinates for pixel `(u, v)`, ordered by vertical then
    /// horizontal offset; the center sample is at index `samples_per_pixel() / 2`.
    pub fn samples(&self, u: usize, v: usize) -> &[(f64, f64)] {
        let n = self.samples_per_pixel();
        let i = (v * self.width + u) * n;
        &self.coords[i..i + n]
    }

    /// Sample at offset `(di, dj)` from the pixel center, `|di|, |dj| <= k`.
    pub fn sample(&self, u: usize, v: usize, di: i64, dj: i64) -> (f64, f64) {
        let k = self.k as i64;
        let side = 2 * self.k + 1;
        let idx = ((dj + k) as usize) * side + (di + k) as usize;
        self.samples(u, v)[idx]
    }
}

/// Builds the gnomonic sampling grid for a `2h x h` panorama.
///
/// Offsets `(di, dj)` are tangent-plane displacements of `di * delta` along
/// increasing phi and `dj * delta` along increasing theta, with
/// `delta = pi / H`. Each displaced tangent point is projected back onto the
/// sphere and mapped through the inverse parameterization, so the sampling
/// pattern stretches horizontally toward the poles exactly as the image does.
pub fn distortion_grid(height: usize, k: usize) -> Result<DistortionGrid> {
    let width = height * 2;
    if k < 1 {
        return Err(Error::InvalidInput("kernel half-width must be >= 1".into()));
    }
    if height < 2 * k + 1 {
        return Err(Error::InvalidInput(format!(
            "panorama height {height} too small for kernel half-width {k}"
        )));
    }
    let delta = std::f64::consts::PI / height as f64;
    let side = 2 * k + 1;
    let mut coords = Vec::with_capacity(width * height * side * side);
    let frame = Locale::canonical();
    for v in 0..height {
        for u in 0..width {
            let coord = pixel_center_coord(u, v, width, height);
            let center = frame.direction(coord);
            // Tangent basis: e_phi along increasing azimuth, e_theta along
            // increasing polar angle (toward the south pole).
            let (sin_t, cos_t) = coord.theta.sin_cos();
            let (sin_p, cos_p) = coord.phi.sin_cos();
            let e_phi = Vector3::new(-sin_p, cos_p, 0.0);
            let e_theta = Vector3::new(cos_t * cos_p, cos_t * sin_p, -sin_t);
            for dj in -(k as i64)..=(k as i64) {
                for di in -(k as i64)..=(k as i64) {
                    if di == 0 && dj == 0 {
                        coords.push((u as f64 + 0.5, v as f64 + 0.5));
                        continue;
                    }
                    let p = center + e_phi * (di as f64 * delta) + e_theta * (dj as f64 * delta);
                    let sph = frame.spherical(&p).expect("tangent offset is non-zero");
                    coords.push(spherical_to_continuous(sph, width, height));
                }
            }
        }
    }
    Ok(DistortionGrid {
        width,
        height,
        k,
        coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pano(height: usize) -> PanoramaImage {
        PanoramaImage::new(height, 3, PanoKind::HdrRadiance, Locale::canonical(), 0.0).unwrap()
    }

    #[test]
    fn top_row_center_offset() {
        let p = pano(160);
        let d = p.pixel_to_direction(0, 0).unwrap();
        let angle = d.dot(&Vector3::z()).clamp(-1.0, 1.0).acos();
        assert_relative_eq!(angle, 0.5 * std::f64::consts::PI / 160.0, epsilon = 1e-12);
    }

    #[test]
    fn equator_along_reference() {
        let frame = Locale::new(Vector3::zeros(), Vector3::z(), Vector3::x()).unwrap();
        let d = frame.direction(SphericalCoord::new(0.0, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(d.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(d.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn directions_are_unit_length() {
        let p = pano(16);
        for v in 0..16 {
            for u in 0..32 {
                let d = p.pixel_to_direction(u, v).unwrap();
                assert!((d.norm() - 1.0).abs() < 1e-15, "pixel ({u},{v})");
            }
        }
    }

    #[test]
    fn round_trip_exhaustive_16x32() {
        let p = pano(16);
        for v in 0..16 {
            for u in 0..32 {
                let d = p.pixel_to_direction(u, v).unwrap();
                let (uc, vc) = p.direction_to_pixel(&d).unwrap();
                assert_eq!(p.nearest_pixel(uc, vc), (u, v));
                // Identity on pixel centers, exact up to 1e-9 angle.
                let back = p
                    .frame()
                    .direction(pixel_center_coord(u, v, 32, 16));
                assert!(back.dot(&d).clamp(-1.0, 1.0).acos() < 1e-9);
            }
        }
    }

    #[test]
    fn poles_map_to_row_boundaries() {
        let p = pano(8);
        let (_, v_top) = p.direction_to_pixel(&Vector3::z()).unwrap();
        assert!((0.0..=0.5).contains(&v_top));
        let (_, v_bot) = p.direction_to_pixel(&(-Vector3::z())).unwrap();
        assert!((8.0 - 0.5..=8.0).contains(&v_bot));
    }

    #[test]
    fn direction_to_pixel_rejects_zero() {
        let p = pano(8);
        assert!(p.direction_to_pixel(&Vector3::zeros()).is_err());
    }

    #[test]
    fn pixel_to_direction_range_check() {
        let p = pano(8);
        assert!(p.pixel_to_direction(16, 0).is_err());
        assert!(p.pixel_to_direction(0, 8).is_err());
    }

    #[test]
    fn solid_angle_sums_to_sphere() {
        let p = pano(160);
        let mut total = 0.0;
        for v in 0..160 {
            total += p.solid_angle(v).unwrap() * 320.0;
        }
        let rel = (total - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI);
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn solid_angle_equator_and_monotonicity() {
        let (w, h) = (320usize, 160usize);
        let p = pano(h);
        // theta = pi/2 falls exactly between rows h/2-1 and h/2; both sit at
        // sin(theta) = sin(pi/2 -+ pi/(2h)). The closed form at sin = 1:
        let equator_exact = 2.0 * std::f64::consts::PI.powi(2) / (w as f64 * h as f64);
        let row = p.solid_angle(h / 2).unwrap();
        let theta = (h as f64 / 2.0 + 0.5) * std::f64::consts::PI / h as f64;
        assert_relative_eq!(row, equator_exact * theta.sin(), epsilon = 1e-15);
        assert!(row <= equator_exact);
        assert!(p.solid_angle(0).unwrap() < row);

        // Odd height puts a row exactly on the equator.
        let q = pano(5);
        let exact = 2.0 * std::f64::consts::PI.powi(2) / (10.0 * 5.0);
        assert_relative_eq!(q.solid_angle(2).unwrap(), exact, epsilon = 1e-15);
    }

    #[test]
    fn distortion_grid_center_is_identity() {
        let g = distortion_grid(16, 1).unwrap();
        for v in 0..16 {
            for u in 0..32 {
                assert_eq!(g.sample(u, v, 0, 0), (u as f64 + 0.5, v as f64 + 0.5));
            }
        }
    }

    #[test]
    fn distortion_grid_equator_neighbors() {
        let h = 160;
        let g = distortion_grid(h, 1).unwrap();
        // Rows straddling the equator: horizontal neighbor lands ~1 column away.
        for &v in &[h / 2 - 1, h / 2] {
            let (uc, vc) = g.sample(10, v, 1, 0);
            assert!((uc - 11.5).abs() < 0.01, "uc = {uc}");
            assert!((vc - (v as f64 + 0.5)).abs() < 0.01, "vc = {vc}");
        }
    }

    #[test]
    fn distortion_grid_spreads_near_pole() {
        let g = distortion_grid(160, 1).unwrap();
        let (uc, _) = g.sample(100, 1, 1, 0);
        assert!((uc - 100.5).abs() > 2.0, "spread {}", uc - 100.5);
    }

    #[test]
    fn distortion_grid_great_circle_distances() {
        let h = 160;
        let k = 2;
        let g = distortion_grid(h, k).unwrap();
        let p = pano(h);
        let delta = std::f64::consts::PI / h as f64;
        for &(u, v) in &[(0usize, 1usize), (17, 40), (200, 80), (310, 158)] {
            let center = p.pixel_to_direction(u, v).unwrap();
            for dj in -(k as i64)..=(k as i64) {
                for di in -(k as i64)..=(k as i64) {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (uc, vc) = g.sample(u, v, di, dj);
                    let d = p
                        .frame()
                        .direction(SphericalCoord::new(
                            uc * std::f64::consts::TAU / p.width() as f64,
                            vc * std::f64::consts::PI / p.height() as f64,
                        ));
                    let dist = center.dot(&d).clamp(-1.0, 1.0).acos();
                    let expect = ((di * di + dj * dj) as f64).sqrt() * delta;
                    assert!(
                        (dist - expect).abs() <= 0.01 * expect,
                        "pixel ({u},{v}) offset ({di},{dj}): {dist} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn distortion_grid_preconditions() {
        assert!(distortion_grid(16, 0).is_err());
        assert!(distortion_grid(4, 2).is_err());
    }

    #[test]
    fn roll_columns_round_trip() {
        let frame = Locale::canonical();
        let data: Vec<f64> = (0..4 * 8 * 3).map(|i| i as f64).collect();
        let p = PanoramaImage::from_data(4, 3, PanoKind::LdrColor, frame, data).unwrap();
        let rolled = p.roll_columns_left(3);
        assert_eq!(rolled.pixel(0, 0), p.pixel(3, 0));
        let back = rolled.roll_columns_left(8 - 3);
        assert_eq!(back, p);
    }
}
