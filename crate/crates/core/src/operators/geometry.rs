use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};

/// Flat-detector fan-beam scanner.
///
/// The source sits at distance `source_to_center` from the rotation axis at
/// angle `angle` (counter-clockwise from +x); the detector is perpendicular to
/// the central ray at distance `source_to_detector` from the source. Detector
/// bin `k` is centred at offset `(k - (num_detectors - 1) / 2) * detector_spacing`
/// along the detector axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanBeamGeometry {
    angles_deg: Vec<f64>,
    num_detectors: usize,
    detector_spacing: f64,
    source_to_center: f64,
    source_to_detector: f64,
}

impl FanBeamGeometry {
    pub fn new(
        angles_deg: Vec<f64>,
        num_detectors: usize,
        detector_spacing: f64,
        source_to_center: f64,
        source_to_detector: f64,
    ) -> Result<Self> {
        let g = FanBeamGeometry {
            angles_deg,
            num_detectors,
            detector_spacing,
            source_to_center,
            source_to_detector,
        };
        g.validate()?;
        Ok(g)
    }

    /// `num_views` angles uniformly spaced over `[0, 180)`.
    pub fn uniform(
        num_views: usize,
        num_detectors: usize,
        detector_spacing: f64,
        source_to_center: f64,
        source_to_detector: f64,
    ) -> Result<Self> {
        Self::new(
            uniform_angles(num_views),
            num_detectors,
            detector_spacing,
            source_to_center,
            source_to_detector,
        )
    }

    /// Default scanner for a `width x height` image: source at twice the image
    /// diagonal, detector at four times the diagonal, `2 * max(width, height)`
    /// bins spanning the fan that encloses the image's circumscribed circle.
    pub fn for_image(width: usize, height: usize, pixel_size: f64, num_views: usize) -> Result<Self> {
        let diagonal = pixel_size * ((width * width + height * height) as f64).sqrt();
        let source_to_center = 2.0 * diagonal;
        let source_to_detector = 4.0 * diagonal;
        let num_detectors = 2 * width.max(height);
        let half_fan = (0.5 * diagonal / source_to_center).asin();
        let detector_spacing = 2.0 * source_to_detector * half_fan.tan() / num_detectors as f64;
        Self::uniform(
            num_views,
            num_detectors,
            detector_spacing,
            source_to_center,
            source_to_detector,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles_deg.is_empty() {
            return Err(CtError::config("geometry needs at least one view"));
        }
        if self.num_detectors == 0 {
            return Err(CtError::config("geometry needs at least one detector bin"));
        }
        for (i, &a) in self.angles_deg.iter().enumerate() {
            if !(a.is_finite() && (0.0..180.0).contains(&a)) {
                return Err(CtError::config(format!("view angle {i} = {a} outside [0, 180)")));
            }
            if i > 0 && a <= self.angles_deg[i - 1] {
                return Err(CtError::config("view angles must be strictly increasing"));
            }
        }
        if !(self.detector_spacing.is_finite() && self.detector_spacing > 0.0) {
            return Err(CtError::config("detector spacing must be positive"));
        }
        if !(self.source_to_center.is_finite() && self.source_to_center > 0.0) {
            return Err(CtError::config("source-to-center distance must be positive"));
        }
        if !(self.source_to_detector.is_finite() && self.source_to_detector > self.source_to_center)
        {
            return Err(CtError::config(
                "source-to-detector distance must exceed source-to-center distance",
            ));
        }
        Ok(())
    }

    /// Checks that the source orbit stays outside an image of the given size.
    pub fn validate_for_image(&self, width: usize, height: usize, pixel_size: f64) -> Result<()> {
        let half_diagonal = 0.5 * pixel_size * ((width * width + height * height) as f64).sqrt();
        if self.source_to_center <= half_diagonal {
            return Err(CtError::config(format!(
                "source-to-center distance {} does not clear the image half diagonal {}",
                self.source_to_center, half_diagonal
            )));
        }
        Ok(())
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn num_views(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn source_to_center(&self) -> f64 {
        self.source_to_center
    }

    pub fn source_to_detector(&self) -> f64 {
        self.source_to_detector
    }

    /// Number of measurements `m = views * detectors`.
    pub fn num_measurements(&self) -> usize {
        self.num_views() * self.num_detectors
    }

    /// Signed offset of detector bin `k` from the detector centre.
    pub fn detector_offset(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.num_detectors as f64 - 1.0)) * self.detector_spacing
    }
}

pub(crate) fn uniform_angles(num_views: usize) -> Vec<f64> {
    (0..num_views)
        .map(|i| 180.0 * i as f64 / num_views as f64)
        .collect()
}

/// Projection data ordered view-major, then detector bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    geometry: FanBeamGeometry,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: FanBeamGeometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.num_measurements() {
            return Err(CtError::config(format!(
                "sinogram has {} entries, geometry expects {}",
                data.len(),
                geometry.num_measurements()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CtError::config(format!("sinogram entry {i} is not finite")));
        }
        Ok(Sinogram { geometry, data })
    }

    pub fn zeros(geometry: FanBeamGeometry) -> Self {
        let data = vec![0.0; geometry.num_measurements()];
        Sinogram { geometry, data }
    }

    pub fn geometry(&self) -> &FanBeamGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, view: usize, detector: usize) -> f64 {
        self.data[view * self.geometry.num_detectors + detector]
    }

    /// Detector readings of one view.
    pub fn view(&self, view: usize) -> &[f64] {
        let nd = self.geometry.num_detectors;
        &self.data[view * nd..(view + 1) * nd]
    }

    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Sinogram::new(self.geometry.clone(), data)
    }
}
