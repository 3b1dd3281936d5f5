//! Per-pixel weights for the weighted TV term.
//!
//! The adaptive law maps gradient magnitude `g` to
//! `(eta / sqrt(eta^2 + g^2))^(1 - p)`: 1 on flat regions, decreasing towards 0
//! across edges. The same law evaluated on the running iterate with `p = 0` is
//! reweighting rule A; rule B is the Gaussian `exp(-g^2 / eta^2)`.

use crate::error::{CtError, Result};
use crate::operators::{grad, Image};

/// Largest double strictly below one. Non-zero gradients never map to a unit
/// weight, even when `g / eta` is below double precision.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightRule {
    /// All weights 1 (global TV).
    Uniform,
    /// `(eta / sqrt(eta^2 + g^2))^(1 - p)`.
    Adaptive,
    /// `exp(-g^2 / eta^2)`.
    Exponential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    width: usize,
    height: usize,
    data: Vec<f64>,
    eta: f64,
    p_exponent: f64,
    rule: WeightRule,
}

impl WeightField {
    /// Unit weights, which turn the weighted TV into plain TV.
    pub fn ones(width: usize, height: usize) -> Self {
        WeightField {
            width,
            height,
            data: vec![1.0; width * height],
            eta: 1.0,
            p_exponent: 0.0,
            rule: WeightRule::Uniform,
        }
    }

    /// Wraps externally supplied weights; every entry must lie in `(0, 1]`.
    pub fn from_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CtError::config(format!(
                "weight field has {} entries, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(i) = data.iter().position(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(CtError::parameter(format!(
                "weight {i} = {} outside (0, 1]",
                data[i]
            )));
        }
        Ok(WeightField {
            width,
            height,
            data,
            eta: f64::NAN,
            p_exponent: f64::NAN,
            rule: WeightRule::Adaptive,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
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

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p_exponent(&self) -> f64 {
        self.p_exponent
    }

    pub fn rule(&self) -> WeightRule {
        self.rule
    }

    /// The weights as an image, for export and inspection.
    pub fn to_image(&self, pixel_size: f64) -> Image {
        Image::new(self.width, self.height, self.data.clone(), pixel_size)
            .expect("weight field shape is valid")
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(CtError::parameter(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// Adaptive weight for a single gradient magnitude.
pub fn adaptive_weight(magnitude: f64, eta: f64, p: f64) -> f64 {
    if magnitude == 0.0 {
        return 1.0;
    }
    let ratio = eta / eta.hypot(magnitude);
    ratio.powf(1.0 - p).clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Exponential weight for a squared gradient magnitude.
pub fn exponential_weight(squared_magnitude: f64, eta: f64) -> f64 {
    if squared_magnitude == 0.0 {
        return 1.0;
    }
    (-squared_magnitude / (eta * eta)).exp().clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Fixed weights computed once from an intermediate image `x_tilde`.
pub fn compute_weights(x_tilde: &Image, eta: f64, p: f64) -> Result<WeightField> {
    let g = grad(x_tilde);
    let magnitude: Vec<f64> = g.horizontal.iter().zip(&g.vertical).map(|(h, v)| h.hypot(*v)).collect();
    weights_from_magnitude(x_tilde.width(), x_tilde.height(), &magnitude, eta, p)
}

/// The adaptive law applied to a given gradient-magnitude field.
pub fn weights_from_magnitude(
    width: usize,
    height: usize,
    magnitude: &[f64],
    eta: f64,
    p: f64,
) -> Result<WeightField> {
    check_eta(eta)?;
    if !(p.is_finite() && (0.0..1.0).contains(&p)) {
        return Err(CtError::parameter(format!("p must lie in [0, 1), got {p}")));
    }
    if magnitude.len() != width * height {
        return Err(CtError::config("magnitude field size differs from image size"));
    }
    if magnitude.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(CtError::parameter("gradient magnitudes must be finite and non-negative"));
    }
    Ok(WeightField {
        width,
        height,
        data: magnitude.iter().map(|&g| adaptive_weight(g, eta, p)).collect(),
        eta,
        p_exponent: p,
        rule: WeightRule::Adaptive,
    })
}

/// Reweighting rule A: the adaptive law on the current iterate.
pub fn ir_update_a(x_k: &Image, eta: f64, p: f64) -> Result<WeightField> {
    compute_weights(x_k, eta, p)
}

/// Reweighting rule B: `exp(-((D_h x)_i^2 + (D_v x)_i^2) / eta^2)`.
pub fn ir_update_b(x_k: &Image, eta: f64) -> Result<WeightField> {
    check_eta(eta)?;
    let g = grad(x_k);
    let data = g
        .horizontal
        .iter()
        .zip(&g.vertical)
        .map(|(h, v)| exponential_weight(h * h + v * v, eta))
        .collect();
    Ok(WeightField {
        width: x_k.width(),
        height: x_k.height(),
        data,
        eta,
        p_exponent: 0.0,
        rule: WeightRule::Exponential,
    })
}
