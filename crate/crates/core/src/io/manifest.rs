//! Scene manifests: a JSON index naming the per-view HDR/LDR/depth files and
//! camera intrinsics/extrinsics, with paths resolved relative to the
//! manifest, plus loaders for the labeled point set and locale lists.

use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::ibr::{LabeledPointSet, Observation};
use crate::io::pfm;
use crate::panorama::Locale;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Camera-to-world rigid transform, 16 floats row-major.
    pub cam_to_world: Vec<f64>,
}

impl CameraSpec {
    pub fn from_camera(c: &Camera) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            cam_to_world: c.cam_to_world().transpose().as_slice().to_vec(),
        }
    }

    pub fn to_camera(&self) -> Result<Camera> {
        if self.cam_to_world.len() != 16 {
            return Err(Error::InvalidInput(format!(
                "cam_to_world needs 16 entries, got {}",
                self.cam_to_world.len()
            )));
        }
        let m = Matrix4::from_row_slice(&self.cam_to_world);
        Camera::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height, m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageEntry {
    pub hdr: PathBuf,
    pub ldr: PathBuf,
    pub depth: PathBuf,
    pub camera: CameraSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneManifestFile {
    pub scene_id: String,
    pub images: Vec<ImageEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
}

impl SceneManifestFile {
    pub fn load(path: &Path) -> Result<Self> {
        pfm::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        pfm::write_json(path, self)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// A manifest with every referenced file loaded.
#[derive(Debug)]
pub struct LoadedScene {
    pub scene_id: String,
    pub observations: Vec<Observation>,
    /// LDR counterpart of each observation, aligned by index.
    pub ldr: Vec<RasterImage>,
    pub points: Option<LabeledPointSet>,
}

/// Loads a manifest and all files it references; relative paths resolve
/// against the manifest's directory.
pub fn load_scene(path: &Path) -> Result<LoadedScene> {
    let manifest = SceneManifestFile::load(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut observations = Vec::with_capacity(manifest.images.len());
    let mut ldr = Vec::with_capacity(manifest.images.len());
    for entry in &manifest.images {
        let camera = entry.camera.to_camera()?;
        let obs = Observation {
            hdr: pfm::read_hdr_image(&resolve(&base, &entry.hdr))?,
            depth: pfm::read_depth(&resolve(&base, &entry.depth))?,
            camera,
        };
        obs.validate()?;
        let l = pfm::read_ldr_png(&resolve(&base, &entry.ldr))?;
        if l.width() != obs.camera.width || l.height() != obs.camera.height {
            return Err(Error::DimensionMismatch(format!(
                "ldr image {}x{} vs camera {}x{}",
                l.width(),
                l.height(),
                obs.camera.width,
                obs.camera.height
            )));
        }
        observations.push(obs);
        ldr.push(l);
    }
    let points = match &manifest.points {
        Some(p) => Some(load_point_set(&resolve(&base, p))?),
        None => None,
    };
    Ok(LoadedScene {
        scene_id: manifest.scene_id,
        observations,
        ldr,
        points,
    })
}

/// Reads a labeled point set (`{points, normals, labels}`, world frame).
pub fn load_point_set(path: &Path) -> Result<LabeledPointSet> {
    let set: LabeledPointSet = pfm::read_json(path)?;
    set.validate()?;
    Ok(set)
}

pub fn save_point_set(path: &Path, set: &LabeledPointSet) -> Result<()> {
    set.validate()?;
    pfm::write_json(path, set)
}

/// Writes a locale list as a JSON array of `{position, up, azimuth_ref}`.
pub fn save_locales(path: &Path, locales: &[Locale]) -> Result<()> {
    let specs: Vec<pfm::LocaleSpec> = locales.iter().map(pfm::LocaleSpec::from_locale).collect();
    pfm::write_json(path, &specs)
}

pub fn load_locales(path: &Path) -> Result<Vec<Locale>> {
    let specs: Vec<pfm::LocaleSpec> = pfm::read_json(path)?;
    specs.iter().map(|s| s.to_locale()).collect()
}

/// Loads every `.pfm` panorama in a directory as a completion library, in
/// file-name order; ids are the file stems.
pub fn load_library(dir: &Path) -> Result<Vec<(String, crate::panorama::PanoramaImage)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(dir.to_path_buf()),
            _ => Error::Io(e),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pfm"))
        .collect();
    paths.sort();
    let mut entries = Vec::with_capacity(paths.len());
    for p in paths {
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push((id, pfm::read_panorama(&p)?));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DepthImage;
    use crate::ibr::SurfaceLabel;
    use nalgebra::Vector3;

    fn rig_camera() -> Camera {
        Camera::new(30.0, 30.0, 16.0, 12.0, 32, 24, Matrix4::identity()).unwrap()
    }

    #[test]
    fn camera_spec_roundtrip_row_major() {
        let mut m = Matrix4::identity();
        // 90° about z plus a translation; row-major layout checked below.
        m[(0, 0)] = 0.0;
        m[(0, 1)] = -1.0;
        m[(1, 0)] = 1.0;
        m[(1, 1)] = 0.0;
        m[(0, 3)] = 2.0;
        m[(1, 3)] = -3.0;
        m[(2, 3)] = 0.5;
        let cam = Camera::new(500.0, 480.0, 320.0, 240.0, 640, 480, m).unwrap();
        let spec = CameraSpec::from_camera(&cam);
        assert_eq!(spec.cam_to_world[1], -1.0); // row 0, column 1
        assert_eq!(spec.cam_to_world[3], 2.0); // row 0, column 3
        let back = spec.to_camera().unwrap();
        assert_eq!(back.cam_to_world(), cam.cam_to_world());
    }

    #[test]
    fn camera_spec_rejects_nonrigid() {
        let mut spec = CameraSpec::from_camera(&rig_camera());
        spec.cam_to_world[0] = 2.0; // scale is not rigid
        assert!(spec.to_camera().is_err());
        spec.cam_to_world.truncate(12);
        assert!(spec.to_camera().is_err());
    }

    #[test]
    fn scene_roundtrip_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cam = rig_camera();
        let hdr = RasterImage::new(32, 24, 3, 0.25).unwrap();
        let mut ldr = RasterImage::new(32, 24, 3, 0.5).unwrap();
        ldr.pixel_mut(3, 4)[0] = 0.75;
        let depth = DepthImage::from_data(32, 24, vec![2.0; 32 * 24]).unwrap();
        pfm::write_hdr_image(&dir.path().join("v0_hdr.pfm"), &hdr).unwrap();
        pfm::write_ldr_png(&dir.path().join("v0_ldr.png"), &ldr).unwrap();
        pfm::write_depth(&dir.path().join("v0_depth.pfm"), &depth).unwrap();
        let set = LabeledPointSet {
            points: vec![Vector3::new(0.0, 0.0, 0.0)],
            normals: vec![Vector3::new(0.0, 0.0, 1.0)],
            labels: vec![SurfaceLabel::Floor],
        };
        save_point_set(&dir.path().join("points.json"), &set).unwrap();

        let manifest = SceneManifestFile {
            scene_id: "demo".into(),
            images: vec![ImageEntry {
                hdr: "v0_hdr.pfm".into(),
                ldr: "v0_ldr.png".into(),
                depth: "v0_depth.pfm".into(),
                camera: CameraSpec::from_camera(&cam),
            }],
            points: Some("points.json".into()),
        };
        let mpath = dir.path().join("scene.json");
        manifest.save(&mpath).unwrap();

        let scene = load_scene(&mpath).unwrap();
        assert_eq!(scene.scene_id, "demo");
        assert_eq!(scene.observations.len(), 1);
        assert_eq!(scene.observations[0].hdr.pixel(0, 0)[0], 0.25);
        assert!((scene.ldr[0].pixel(3, 4)[0] - 0.75).abs() < 1e-4);
        assert_eq!(scene.observations[0].depth.depth(5, 5), 2.0);
        let pts = scene.points.unwrap();
        assert_eq!(pts.labels, vec![SurfaceLabel::Floor]);
        assert_eq!(pts.points[0], Vector3::zeros());
    }

    #[test]
    fn missing_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = SceneManifestFile {
            scene_id: "gone".into(),
            images: vec![ImageEntry {
                hdr: "nope.pfm".into(),
                ldr: "nope.png".into(),
                depth: "nope.pfm".into(),
                camera: CameraSpec::from_camera(&rig_camera()),
            }],
            points: None,
        };
        let mpath = dir.path().join("scene.json");
        manifest.save(&mpath).unwrap();
        match load_scene(&mpath).unwrap_err() {
            Error::MissingFile(p) => assert!(p.ends_with("nope.pfm")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn locale_list_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let locales = vec![
            Locale::with_default_azimuth(Vector3::new(1.0, 2.0, 0.1), Vector3::z()).unwrap(),
            Locale::canonical(),
        ];
        let path = dir.path().join("locales.json");
        save_locales(&path, &locales).unwrap();
        let back = load_locales(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].position, locales[0].position);
        assert_eq!(back[0].up(), locales[0].up());
        assert_eq!(back[0].azimuth_ref(), locales[0].azimuth_ref());
    }

    #[test]
    fn library_loads_in_name_order() {
        use crate::panorama::{PanoKind, PanoramaImage};
        let dir = tempfile::tempdir().unwrap();
        for (name, fill) in [("b", 0.2), ("a", 0.1), ("c", 0.3)] {
            let p =
                PanoramaImage::new(4, 3, PanoKind::LdrColor, Locale::canonical(), fill).unwrap();
            pfm::write_panorama(&dir.path().join(format!("{name}.pfm")), &p).unwrap();
        }
        let lib = load_library(dir.path()).unwrap();
        let ids: Vec<&str> = lib.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(lib[0].1.pixel(0, 0)[0], f64::from(0.1f32));
    }
}
