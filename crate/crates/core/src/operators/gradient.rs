use super::image::Image;
use crate::error::{CtError, Result};

/// Stacked discrete gradient `Dx = (D_h x, D_v x)`, each component row-major
/// with the image's shape.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    pixel_size: f64,
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

impl GradientField {
    pub fn new(
        width: usize,
        height: usize,
        pixel_size: f64,
        horizontal: Vec<f64>,
        vertical: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if horizontal.len() != n || vertical.len() != n {
            return Err(CtError::config(format!(
                "gradient components must both have {n} entries"
            )));
        }
        Ok(GradientField {
            width,
            height,
            pixel_size,
            horizontal,
            vertical,
        })
    }

    pub fn zeros(width: usize, height: usize, pixel_size: f64) -> Self {
        let n = width * height;
        GradientField {
            width,
            height,
            pixel_size,
            horizontal: vec![0.0; n],
            vertical: vec![0.0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Concatenation `[D_h x; D_v x]` of length `2n`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.horizontal.len());
        v.extend_from_slice(&self.horizontal);
        v.extend_from_slice(&self.vertical);
        v
    }

    /// Inverse of [`GradientField::stacked`].
    pub fn from_stacked(width: usize, height: usize, pixel_size: f64, stacked: &[f64]) -> Result<Self> {
        let n = width * height;
        if stacked.len() != 2 * n {
            return Err(CtError::config(format!(
                "stacked gradient has {} entries, expected {}",
                stacked.len(),
                2 * n
            )));
        }
        Self::new(
            width,
            height,
            pixel_size,
            stacked[..n].to_vec(),
            stacked[n..].to_vec(),
        )
    }
}

/// Forward differences with a zero last column (horizontal) and zero last row
/// (vertical). The kernel of this operator is exactly the constant images.
pub fn grad_into(x: &[f64], width: usize, height: usize, dh: &mut [f64], dv: &mut [f64]) {
    let n = width * height;
    assert!(x.len() == n && dh.len() == n && dv.len() == n);
    for r in 0..height {
        let row = &x[r * width..(r + 1) * width];
        let out = &mut dh[r * width..(r + 1) * width];
        for c in 0..width - 1 {
            out[c] = row[c + 1] - row[c];
        }
        out[width - 1] = 0.0;
    }
    for r in 0..height - 1 {
        for c in 0..width {
            let i = r * width + c;
            dv[i] = x[i + width] - x[i];
        }
    }
    dv[(height - 1) * width..].fill(0.0);
}

/// `out = D^T (dh, dv)`, the negative divergence matching [`grad_into`].
pub fn grad_adjoint_into(dh: &[f64], dv: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = width * height;
    assert!(dh.len() == n && dv.len() == n && out.len() == n);
    for r in 0..height {
        let base = r * width;
        for c in 0..width {
            let i = base + c;
            let mut v = 0.0;
            if c + 1 < width {
                v -= dh[i];
            }
            if c > 0 {
                v += dh[i - 1];
            }
            if r + 1 < height {
                v -= dv[i];
            }
            if r > 0 {
                v += dv[i - width];
            }
            out[i] = v;
        }
    }
}

pub fn grad(x: &Image) -> GradientField {
    let mut g = GradientField::zeros(x.width(), x.height(), x.pixel_size());
    grad_into(
        x.data(),
        x.width(),
        x.height(),
        &mut g.horizontal,
        &mut g.vertical,
    );
    g
}

pub fn grad_adjoint(f: &GradientField) -> Image {
    let mut out = vec![0.0; f.width * f.height];
    grad_adjoint_into(&f.horizontal, &f.vertical, f.width, f.height, &mut out);
    Image::new(f.width, f.height, out, f.pixel_size).expect("gradient field shape is valid")
}

/// Per-pixel Euclidean norm `|Dx|_i = sqrt(h_i^2 + v_i^2)`.
pub fn gradient_magnitude(f: &GradientField) -> Image {
    let data = f
        .horizontal
        .iter()
        .zip(&f.vertical)
        .map(|(h, v)| h.hypot(*v))
        .collect();
    Image::new(f.width, f.height, data, f.pixel_size).expect("gradient field shape is valid")
}
