//! Discrete imaging operators: the fan-beam projector `K`, the forward
//! difference operator `D`, and the stacked operator `M = [K; D]`.

mod geometry;
mod gradient;
mod image;
mod norm;
mod projector;

pub use geometry::{FanBeamGeometry, Sinogram};
pub use gradient::{
    grad, grad_adjoint, grad_adjoint_into, grad_into, gradient_magnitude, GradientField,
};
pub use image::Image;
pub use norm::{
    balanced_pixel_size, kernel_assumption_check, operator_norm, power_iteration, GradientOperator, LinearOperator,
    StackedOperator, DEFAULT_NORM_ITERS, DEFAULT_NORM_TOL, GRADIENT_NORM_BOUND,
};
pub use projector::{backproject, project, FanBeamOperator};

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
