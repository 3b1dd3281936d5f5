use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::operators::{FanBeamGeometry, Image, Sinogram};

pub const DTYPE: &str = "f32le";
pub const PAYLOAD_EXT: &str = "f32";
pub const HEADER_EXT: &str = "json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterKind {
    Image,
    Sinogram,
    Weights,
}

/// Sidecar describing a raw payload. Sinograms store `num_detectors` as the
/// width and `num_views` as the height (view-major payload).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub kind: RasterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<FanBeamGeometry>,
}

/// A little-endian `f32` array with its JSON sidecar: `<stem>.f32` + `<stem>.json`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterFile {
    pub header: RasterHeader,
    pub data: Vec<f32>,
}

/// Payload and header paths for a raster given either file or the bare stem.
pub fn raster_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some(PAYLOAD_EXT) | Some(HEADER_EXT) => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let add = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (add(PAYLOAD_EXT), add(HEADER_EXT))
}

impl RasterFile {
    pub fn new(header: RasterHeader, data: Vec<f32>) -> Result<Self> {
        let raster = RasterFile { header, data };
        raster.validate()?;
        Ok(raster)
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.dtype != DTYPE {
            return Err(CtError::config(format!("unsupported raster dtype {:?}", h.dtype)));
        }
        if h.width == 0 || h.height == 0 {
            return Err(CtError::config("raster dimensions must be positive"));
        }
        if self.data.len() != h.width * h.height {
            return Err(CtError::config(format!(
                "raster payload has {} values, header says {}x{}",
                self.data.len(),
                h.width,
                h.height
            )));
        }
        if let Some(g) = &h.geometry {
            g.validate()?;
            if h.kind == RasterKind::Sinogram
                && (g.num_detectors() != h.width || g.num_views() != h.height)
            {
                return Err(CtError::config("sinogram header disagrees with its geometry"));
            }
        }
        Ok(())
    }

    pub fn from_image(x: &Image, kind: RasterKind) -> Self {
        RasterFile {
            header: RasterHeader {
                width: x.width(),
                height: x.height(),
                dtype: DTYPE.into(),
                kind,
                pixel_size: Some(x.pixel_size()),
                geometry: None,
            },
            data: x.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_sinogram(y: &Sinogram) -> Self {
        let g = y.geometry();
        RasterFile {
            header: RasterHeader {
                width: g.num_detectors(),
                height: g.num_views(),
                dtype: DTYPE.into(),
                kind: RasterKind::Sinogram,
                pixel_size: None,
                geometry: Some(g.clone()),
            },
            data: y.data().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Image view of an image or weight raster. `pixel_size` overrides the
    /// header value; without either, 1.0 is used.
    pub fn to_image(&self, pixel_size: Option<f64>) -> Result<Image> {
        if self.header.kind == RasterKind::Sinogram {
            return Err(CtError::config("expected an image raster, found a sinogram"));
        }
        let ps = pixel_size.or(self.header.pixel_size).unwrap_or(1.0);
        Image::new(
            self.header.width,
            self.header.height,
            self.data.iter().map(|&v| v as f64).collect(),
            ps,
        )
    }

    pub fn to_sinogram(&self) -> Result<Sinogram> {
        if self.header.kind != RasterKind::Sinogram {
            return Err(CtError::config("expected a sinogram raster"));
        }
        let g = self
            .header
            .geometry
            .clone()
            .ok_or_else(|| CtError::config("sinogram raster lacks a geometry"))?;
        Sinogram::new(g, self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let (payload, header) = raster_paths(path);
        if let Some(dir) = payload.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CtError::io(dir, e))?;
        }
        let mut bytes = Vec::with_capacity(4 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&payload, bytes).map_err(|e| CtError::io(&payload, e))?;
        let mut text = serde_json::to_string_pretty(&self.header)
            .map_err(|e| CtError::config(format!("cannot encode raster header: {e}")))?;
        text.push('\n');
        fs::write(&header, text).map_err(|e| CtError::io(&header, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (payload, header_path) = raster_paths(path);
        let text = fs::read_to_string(&header_path).map_err(|e| CtError::io(&header_path, e))?;
        let header: RasterHeader = serde_json::from_str(&text).map_err(|e| {
            CtError::config(format!("invalid raster header {}: {e}", header_path.display()))
        })?;
        let bytes = fs::read(&payload).map_err(|e| CtError::io(&payload, e))?;
        if bytes.len() != 4 * header.width * header.height {
            return Err(CtError::config(format!(
                "{}: {} bytes, expected {} for {}x{} f32",
                payload.display(),
                bytes.len(),
                4 * header.width * header.height,
                header.width,
                header.height
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        RasterFile::new(header, data)
    }

    /// True when both files of the raster exist.
    pub fn exists(path: &Path) -> bool {
        let (payload, header) = raster_paths(path);
        payload.is_file() && header.is_file()
    }
}

pub fn write_image(path: &Path, x: &Image, kind: RasterKind) -> Result<()> {
    RasterFile::from_image(x, kind).write(path)
}

pub fn read_image(path: &Path) -> Result<Image> {
    RasterFile::read(path)?.to_image(None)
}

pub fn write_sinogram(path: &Path, y: &Sinogram) -> Result<()> {
    RasterFile::from_sinogram(y).write(path)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    RasterFile::read(path)?.to_sinogram()
}
