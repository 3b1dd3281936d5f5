use crate::error::{CtError, Result};

/// A row-major grid of real intensities.
///
/// Pixel `(row, col)` has its centre at physical coordinates
/// `x = (col - (width - 1) / 2) * pixel_size`, `y = ((height - 1) / 2 - row) * pixel_size`,
/// so row 0 is the top of the image and the grid is centred on the rotation axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixel_size: f64,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>, pixel_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CtError::config("image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(CtError::config(format!(
                "image data has {} entries, expected {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(CtError::config(format!("invalid pixel size {pixel_size}")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CtError::config(format!("image entry {i} is not finite")));
        }
        Ok(Image {
            width,
            height,
            pixel_size,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, pixel_size: f64) -> Self {
        Self::constant(width, height, 0.0, pixel_size)
    }

    pub fn constant(width: usize, height: usize, value: f64, pixel_size: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Image {
            width,
            height,
            pixel_size,
            data: vec![value; width * height],
        }
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_size: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image {
            width,
            height,
            pixel_size,
            data,
        }
    }

    /// Same shape and pixel size, new pixel values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Image::new(self.width, self.height, data, self.pixel_size)
    }

    /// Same samples on a grid with a different pixel size.
    pub fn with_pixel_size(&self, pixel_size: f64) -> Result<Self> {
        Image::new(self.width, self.height, self.data.clone(), pixel_size)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
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

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Projection onto the non-negative orthant.
    pub fn clamp_nonnegative(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Physical side length of the half diagonal.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.pixel_size * ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }
}
