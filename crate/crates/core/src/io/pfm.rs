//! Portable float map (PFM) reading and writing, plus the JSON sidecar that
//! turns a bare float image into a panorama (kind + locale frame).
//!
//! Layout: `PF\n<W> <H>\n<scale>\n` followed by float32 rows bottom-to-top;
//! `PF` is 3-channel, `Pf` single-channel; a negative scale marks
//! little-endian data (always written as `-1.0`). Writes are atomic
//! (temp file + rename) and NaN is rejected in both directions.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DepthImage;
use crate::panorama::{Locale, PanoKind, PanoramaImage};
use crate::raster::RasterImage;

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

/// Writes `bytes` to `path` atomically: the data lands in a temporary file in
/// the same directory, which is then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serializes a raw float image (1 or 3 channels) into PFM bytes.
pub fn encode_pfm(width: usize, height: usize, channels: usize, data: &[f64]) -> Result<Vec<u8>> {
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidInput(format!(
            "pfm supports 1 or 3 channels, got {channels}"
        )));
    }
    if width == 0 || height == 0 || data.len() != width * height * channels {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height}x{channels} pfm",
            data.len()
        )));
    }
    let magic = if channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * channels * 4);
    for file_row in 0..height {
        let v = height - 1 - file_row; // rows are stored bottom-to-top
        let row = &data[v * width * channels..(v + 1) * width * channels];
        for &x in row {
            let f = x as f32;
            if !f.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "pfm value {x} is not representable as a finite float32"
                )));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses PFM bytes into `(width, height, channels, data)`.
pub fn decode_pfm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut pos = 0usize;
    let mut line = |expect: &str| -> Result<(usize, String)> {
        let start = pos;
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| parse_err(path, bytes.len(), format!("missing newline after {expect}")))?;
        let text = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| parse_err(path, start, format!("{expect} is not valid ASCII")))?;
        pos = end + 1;
        Ok((start, text.to_string()))
    };

    let (off, magic) = line("the magic number")?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(parse_err(path, off, format!("bad magic {other:?}, expected PF or Pf"))),
    };
    let (off, dims) = line("the dimensions")?;
    let mut it = dims.split_whitespace();
    let (w, h) = match (it.next(), it.next(), it.next()) {
        (Some(w), Some(h), None) => (w, h),
        _ => return Err(parse_err(path, off, format!("bad dimension line {dims:?}"))),
    };
    let width: usize = w
        .parse()
        .map_err(|_| parse_err(path, off, format!("bad width {w:?}")))?;
    let height: usize = h
        .parse()
        .map_err(|_| parse_err(path, off, format!("bad height {h:?}")))?;
    if width == 0 || height == 0 {
        return Err(parse_err(path, off, "zero dimension"));
    }
    let (off, scale_text) = line("the scale")?;
    let scale: f32 = scale_text
        .trim()
        .parse()
        .map_err(|_| parse_err(path, off, format!("bad scale {scale_text:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(parse_err(path, off, format!("scale must be finite and nonzero, got {scale}")));
    }
    let little_endian = scale < 0.0;

    let expected = width * height * channels * 4;
    if bytes.len() - pos < expected {
        return Err(parse_err(
            path,
            bytes.len(),
            format!("truncated data: expected {expected} bytes, found {}", bytes.len() - pos),
        ));
    }
    if bytes.len() - pos > expected {
        return Err(parse_err(
            path,
            pos + expected,
            format!("{} trailing bytes after the pixel data", bytes.len() - pos - expected),
        ));
    }
    let mut data = vec![0.0f64; width * height * channels];
    for file_row in 0..height {
        let v = height - 1 - file_row;
        for i in 0..width * channels {
            let at = pos + (file_row * width * channels + i) * 4;
            let raw: [u8; 4] = bytes[at..at + 4].try_into().expect("length checked");
            let f = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if f.is_nan() {
                return Err(parse_err(path, at, "NaN pixel value"));
            }
            data[v * width * channels + i] = f64::from(f);
        }
    }
    Ok((width, height, channels, data))
}

pub fn write_pfm_raw(path: &Path, width: usize, height: usize, channels: usize, data: &[f64]) -> Result<()> {
    atomic_write(path, &encode_pfm(width, height, channels, data)?)
}

pub fn read_pfm_raw(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_pfm(path, &bytes)
}

/// A locale frame as it appears in JSON files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocaleSpec {
    pub position: [f64; 3],
    pub up: [f64; 3],
    pub azimuth_ref: [f64; 3],
}

impl LocaleSpec {
    pub fn from_locale(l: &Locale) -> Self {
        Self {
            position: l.position.into(),
            up: l.up().into(),
            azimuth_ref: l.azimuth_ref().into(),
        }
    }

    pub fn to_locale(&self) -> Result<Locale> {
        Locale::new(
            Vector3::from(self.position),
            Vector3::from(self.up),
            Vector3::from(self.azimuth_ref),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    kind: PanoKind,
    locale: LocaleSpec,
    resolution: [usize; 2],
}

/// Sidecar path for a panorama file: the same name with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Deserializes JSON, reporting failures as parse errors with a byte offset.
pub fn json_from_bytes<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| {
        let mut offset = 0usize;
        let (mut line, mut col) = (1usize, 1usize);
        for &b in bytes {
            if line == e.line() && col == e.column() {
                break;
            }
            offset += 1;
            if b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        parse_err(path, offset, e.to_string())
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    json_from_bytes(path, &bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Writes a panorama as PFM plus its JSON sidecar (kind, locale, resolution).
pub fn write_panorama(path: &Path, pano: &PanoramaImage) -> Result<()> {
    write_pfm_raw(path, pano.width(), pano.height(), pano.channels(), pano.data())?;
    let sidecar = Sidecar {
        kind: pano.kind(),
        locale: LocaleSpec::from_locale(pano.frame()),
        resolution: [pano.width(), pano.height()],
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a panorama written by [`write_panorama`], validating the sidecar
/// against the PFM dimensions.
pub fn read_panorama(path: &Path) -> Result<PanoramaImage> {
    let (w, h, ch, data) = read_pfm_raw(path)?;
    let sc_path = sidecar_path(path);
    let sidecar: Sidecar = read_json(&sc_path)?;
    if sidecar.resolution != [w, h] {
        return Err(Error::InvalidInput(format!(
            "sidecar resolution {:?} disagrees with pfm {w}x{h}",
            sidecar.resolution
        )));
    }
    PanoramaImage::from_data(h, ch, sidecar.kind, sidecar.locale.to_locale()?, data)
}

/// Writes a camera depth image as a single-channel PFM (meters, 0 invalid).
pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    write_pfm_raw(path, depth.width(), depth.height(), 1, depth.data())
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let (w, h, ch, data) = read_pfm_raw(path)?;
    if ch != 1 {
        return Err(Error::InvalidInput(format!(
            "depth map must be single-channel, {path:?} has {ch}"
        )));
    }
    DepthImage::from_data(w, h, data)
}

/// Reads a perspective HDR image stored as 3-channel PFM.
pub fn read_hdr_image(path: &Path) -> Result<RasterImage> {
    let (w, h, ch, data) = read_pfm_raw(path)?;
    if ch != 3 {
        return Err(Error::InvalidInput(format!(
            "hdr image must have 3 channels, {path:?} has {ch}"
        )));
    }
    RasterImage::from_data(w, h, 3, data)
}

pub fn write_hdr_image(path: &Path, img: &RasterImage) -> Result<()> {
    write_pfm_raw(path, img.width(), img.height(), img.channels(), img.data())
}

/// Writes an LDR image as 16-bit PNG; 65535 maps to J = 1.0.
pub fn write_ldr_png(path: &Path, img: &RasterImage) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "ldr png expects 3 channels, got {}",
            img.channels()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let mut buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            let mut px = [0u16; 3];
            for c in 0..3 {
                px[c] = (p[c].clamp(0.0, 1.0) * 65535.0).round() as u16;
            }
            buf.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    atomic_write(path, &bytes)
}

/// Writes an RGBA image in `[0,1]` as 16-bit PNG (used for sphere renders).
pub fn write_rgba_png(path: &Path, img: &RasterImage) -> Result<()> {
    if img.channels() != 4 {
        return Err(Error::InvalidInput(format!(
            "rgba png expects 4 channels, got {}",
            img.channels()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let mut buf = image::ImageBuffer::<image::Rgba<u16>, Vec<u16>>::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            let mut px = [0u16; 4];
            for c in 0..4 {
                px[c] = (p[c].clamp(0.0, 1.0) * 65535.0).round() as u16;
            }
            buf.put_pixel(x as u32, y as u32, image::Rgba(px));
        }
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    atomic_write(path, &bytes)
}

pub fn read_ldr_png(path: &Path) -> Result<RasterImage> {
    let img = image::open(path)?.into_rgb16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = RasterImage::new(w, h, 3, 0.0)?;
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x as u32, y as u32);
            let o = out.pixel_mut(x, y);
            for c in 0..3 {
                o[c] = f64::from(p[c]) / 65535.0;
            }
        }
    }
    Ok(out)
}
