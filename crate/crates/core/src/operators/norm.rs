use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gradient::{grad_adjoint_into, grad_into};
use super::projector::FanBeamOperator;
use super::geometry::FanBeamGeometry;
use super::{dot, norm2};
use crate::error::{CtError, Result};
use crate::operators::Image;

pub const DEFAULT_NORM_ITERS: usize = 50;
pub const DEFAULT_NORM_TOL: f64 = 1e-6;

/// A real linear map with its transpose, acting on flat buffers.
pub trait LinearOperator {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);
}

impl LinearOperator for FanBeamOperator {
    fn input_len(&self) -> usize {
        self.num_pixels()
    }

    fn output_len(&self) -> usize {
        self.num_measurements()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.forward_into(x, out)
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.adjoint_into(y, out)
    }
}

/// `D` as a map from `R^n` to `R^{2n}` (horizontal block first).
#[derive(Clone, Copy, Debug)]
pub struct GradientOperator {
    pub width: usize,
    pub height: usize,
}

impl LinearOperator for GradientOperator {
    fn input_len(&self) -> usize {
        self.width * self.height
    }

    fn output_len(&self) -> usize {
        2 * self.width * self.height
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.input_len();
        let (dh, dv) = out.split_at_mut(n);
        grad_into(x, self.width, self.height, dh, dv);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let n = self.input_len();
        grad_adjoint_into(&y[..n], &y[n..], self.width, self.height, out);
    }
}

/// Row stacking `[A; B]` of two operators sharing the input space.
pub struct StackedOperator<'a> {
    pub top: &'a dyn LinearOperator,
    pub bottom: &'a dyn LinearOperator,
}

impl LinearOperator for StackedOperator<'_> {
    fn input_len(&self) -> usize {
        self.top.input_len()
    }

    fn output_len(&self) -> usize {
        self.top.output_len() + self.bottom.output_len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.top.output_len());
        self.top.apply(x, a);
        self.bottom.apply(x, b);
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (a, b) = y.split_at(self.top.output_len());
        let mut tmp = vec![0.0; self.input_len()];
        self.top.apply_adjoint(a, out);
        self.bottom.apply_adjoint(b, &mut tmp);
        for (o, t) in out.iter_mut().zip(tmp) {
            *o += t;
        }
    }
}

/// Power iteration on `A^T A` from a seeded Gaussian start vector.
///
/// Returns `||A v_k||` for the last normalised iterate `v_k`, a lower bound on
/// `||A||_2` that is non-decreasing in `k`. Stops after `iters` steps or once
/// the estimate changes by less than `rel_tol` relative.
pub fn power_iteration(op: &dyn LinearOperator, iters: usize, seed: u64, rel_tol: f64) -> f64 {
    assert!(iters >= 1, "power iteration needs at least one step");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..op.input_len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let nv = norm2(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; op.output_len()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        op.apply(&v, &mut av);
        let next = norm2(&av);
        op.apply_adjoint(&av, &mut v);
        let nv = norm2(&v);
        let change = (next - estimate).abs();
        estimate = f64::max(estimate, next);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        if change <= rel_tol * estimate {
            break;
        }
    }
    estimate
}

/// Upper bound `sqrt(8)` on `||D||_2` for forward differences.
pub const GRADIENT_NORM_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Pixel size at which the default fan-beam projector for a `width x height`
/// grid and `num_views` views has `||K||_2 = sqrt(8)`, i.e. the same scale as
/// `D`. The default geometry scales with the pixel size, so `||K||` is
/// proportional to it and one norm estimate at unit pixel size suffices.
/// Balancing the two blocks of `M` markedly speeds up the primal-dual solver.
pub fn balanced_pixel_size(width: usize, height: usize, num_views: usize, seed: u64) -> Result<f64> {
    let g = FanBeamGeometry::for_image(width, height, 1.0, num_views)?;
    let op = FanBeamOperator::new(g, width, height, 1.0)?;
    let k = power_iteration(&op, DEFAULT_NORM_ITERS, seed, DEFAULT_NORM_TOL);
    if !(k > 0.0) {
        return Err(CtError::config("projector has zero norm"));
    }
    Ok(GRADIENT_NORM_BOUND / k)
}

/// Estimate of `||[K; D]||_2` for the projector's image shape.
pub fn operator_norm(op: &FanBeamOperator, iters: usize, seed: u64) -> f64 {
    let d = GradientOperator {
        width: op.width(),
        height: op.height(),
    };
    let m = StackedOperator { top: op, bottom: &d };
    power_iteration(&m, iters, seed, DEFAULT_NORM_TOL)
}

/// True when `K` does not annihilate constant images, which together with
/// `ker(D) = constants` gives `ker(K) ∩ ker(D) = {0}`.
pub fn kernel_assumption_check(op: &FanBeamOperator) -> bool {
    let ones = Image::constant(op.width(), op.height(), 1.0, op.pixel_size());
    let mut k1 = vec![0.0; op.num_measurements()];
    op.forward_into(ones.data(), &mut k1);
    let tol = 1e-12 * op.pixel_size() * (op.num_measurements() as f64).sqrt();
    dot(&k1, &k1).sqrt() > tol
}
