//! Chambolle-Pock solver for non-negative weighted-TV regularised least squares.
//!
//! Internally the solver minimises `1/2 ||Kx - y||^2 + lambda ||w ⊙ |Dx| ||_1`
//! over `x >= 0`. Reported objective values use the unscaled fidelity
//! `||Kx - y||^2 + 2 lambda ||w ⊙ |Dx| ||_1`, which has the same minimisers.

mod cp;
mod prox;

use serde::{Deserialize, Serialize};

pub use cp::{
    chambolle_pock, early_stopped_tv, ir_reweighted_solve, solve_global_tv, ChambollePock,
    IrRule,
};
pub use prox::{
    dual_excess, project_dual_ball, prox_fidelity_dual, prox_fidelity_dual_in_place,
    prox_tv_dual,
};

use crate::error::{CtError, Result};
use crate::operators::{grad, FanBeamOperator, Image, Sinogram};
use crate::simulation::MetricsRecord;
use crate::weights::WeightField;

/// Slack allowed on `sigma * tau * ||M||^2 <= 1`.
pub const STEP_CONDITION_SLACK: f64 = 1e-6;

/// Absolute tolerance of the dual-feasibility check.
pub const DUAL_FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularisation weight multiplying the weighted TV in the half-scaled model.
    pub lambda: f64,
    /// Dual step.
    pub sigma: f64,
    /// Primal step.
    pub tau: f64,
    /// Extrapolation (inertia) parameter in `[0, 1]`.
    pub beta: f64,
    pub max_iters: usize,
    /// Objective (and metrics, when a reference is given) every this many iterations.
    pub record_every: usize,
    /// Stop once `||x_{k+1} - x_k|| / ||x_{k+1}||` drops below this value.
    pub stop_tol: f64,
}

impl SolverConfig {
    pub const DEFAULT_MAX_ITERS: usize = 2000;
    pub const DEFAULT_STOP_TOL: f64 = 1e-7;
    pub const DEFAULT_RECORD_EVERY: usize = 10;

    /// Steps `sigma = tau = 1 / ||M||`, `beta = 1`.
    pub fn new(lambda: f64, operator_norm: f64) -> Self {
        SolverConfig {
            lambda,
            sigma: 1.0 / operator_norm,
            tau: 1.0 / operator_norm,
            beta: 1.0,
            max_iters: Self::DEFAULT_MAX_ITERS,
            record_every: Self::DEFAULT_RECORD_EVERY,
            stop_tol: Self::DEFAULT_STOP_TOL,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: f64) -> Self {
        self.stop_tol = stop_tol;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(CtError::parameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0 && self.tau.is_finite() && self.tau > 0.0)
        {
            return Err(CtError::parameter("step sizes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(CtError::parameter(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.record_every == 0 {
            return Err(CtError::parameter("record_every must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(CtError::parameter("stop_tol must be non-negative"));
        }
        Ok(())
    }

    /// Checks the step condition against an operator norm estimate.
    pub fn validate_steps(&self, operator_norm: f64) -> Result<()> {
        self.validate()?;
        let product = self.sigma * self.tau * operator_norm * operator_norm;
        if product > 1.0 + STEP_CONDITION_SLACK {
            return Err(CtError::parameter(format!(
                "sigma * tau * ||M||^2 = {product} exceeds 1"
            )));
        }
        Ok(())
    }
}

/// Dual iterates and the extrapolated primal point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    /// `p`, length `m`.
    pub dual_fid: Vec<f64>,
    /// `q`, length `2n`, horizontal block first.
    pub dual_grad: Vec<f64>,
    pub x_bar: Image,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    TolReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub image: Image,
    /// `(iteration, objective)` with the unscaled fidelity term.
    pub objective_history: Vec<(usize, f64)>,
    /// `(iteration, metrics vs reference)`, empty without a reference.
    pub metric_history: Vec<(usize, MetricsRecord)>,
    pub iters_run: usize,
    pub stop_reason: StopReason,
    /// Iterations at which the weights were recomputed (reweighted runs only).
    pub weight_refreshes: Vec<usize>,
    /// Recorded iterations where `x < 0` somewhere or a dual pair left its disk.
    pub feasibility_violations: usize,
    /// Weights in force at the end of the run.
    pub final_weights: WeightField,
}

impl ReconstructionResult {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().map(|&(_, v)| v)
    }

    /// History rows `iteration,objective,re,psnr,ssim`; metric columns are
    /// empty when no reference was supplied.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,objective,re,psnr,ssim\n");
        let mut metrics = self.metric_history.iter().peekable();
        for &(it, obj) in &self.objective_history {
            match metrics.peek() {
                Some(&&(mi, m)) if mi == it => {
                    out.push_str(&format!("{it},{obj:.10e},{:.8},{:.6},{:.8}\n", m.re, m.psnr, m.ssim));
                    metrics.next();
                }
                _ => out.push_str(&format!("{it},{obj:.10e},,,\n")),
            }
        }
        out
    }
}

/// `||Kx - y||^2 + lambda * sum_i w_i |Dx|_i`.
pub fn objective(
    op: &FanBeamOperator,
    x: &Image,
    y: &Sinogram,
    w: &WeightField,
    lambda: f64,
) -> Result<f64> {
    op.check_image(x)?;
    op.check_sinogram(y)?;
    if w.len() != x.len() {
        return Err(CtError::config("weight field size differs from image size"));
    }
    let mut kx = vec![0.0; op.num_measurements()];
    op.forward_into(x.data(), &mut kx);
    Ok(objective_from_parts(&kx, y.data(), x, w.data(), lambda))
}

pub(crate) fn objective_from_parts(kx: &[f64], y: &[f64], x: &Image, w: &[f64], lambda: f64) -> f64 {
    let fidelity: f64 = kx.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if lambda == 0.0 {
        return fidelity;
    }
    let g = grad(x);
    let tv: f64 = g
        .horizontal
        .iter()
        .zip(&g.vertical)
        .zip(w)
        .map(|((h, v), wi)| wi * h.hypot(*v))
        .sum();
    fidelity + lambda * tv
}
