//! Deterministic toolkit for locale-centered illumination maps.
//!
//! The pipeline turns perspective RGB-D observations of an indoor scene into
//! equirectangular HDR illumination maps centered at 3D *locales* (points of
//! interest slightly off a supporting surface). Everything is plain geometry
//! and image resampling — no learned components — so results are exactly
//! reproducible and each stage can be validated against closed-form oracles.
//!
//! Main stages:
//! - [`geometry`]: pinhole cameras, depth maps, plane fitting, and the
//!   plane-equation-to-point (PN) reconstruction.
//! - [`warp`]: forward warp of observation pixels onto a locale's sphere.
//! - [`ibr`]: locale sampling and two-step image-based rendering of
//!   ground-truth illumination maps from many RGB-D views.
//! - [`hdr`]: the piecewise LDR/HDR intensity curve and tone mapping.
//! - [`shading`]: diffuse (cosine-weighted) convolution of environment maps
//!   and a sphere relighting preview.
//! - [`completion`]: non-neural baselines that fill unobserved panorama
//!   regions (nearest-neighbor library retrieval, mirror fill).
//! - [`metrics`]: solid-angle-weighted evaluation losses with analytic
//!   gradients plus a finite-difference gradient checker.
//! - [`io`]: PFM + JSON sidecar serialization, 16-bit PNG LDR images, and
//!   the scene manifest format.
//! - [`synth`]: analytic box-room scenes used as test oracles.

pub mod completion;
pub mod error;
pub mod geometry;
pub mod hdr;
pub mod ibr;
pub mod inpaint;
pub mod io;
pub mod metrics;
pub mod panorama;
pub mod raster;
pub mod shading;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use geometry::{Camera, DepthImage, GeometryMap, PlaneMap, PointMap};
pub use panorama::{Locale, PanoKind, PanoramaImage, SphericalCoord};
pub use raster::RasterImage;
