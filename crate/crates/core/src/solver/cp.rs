use super::prox::{dual_excess, project_dual_ball, prox_fidelity_dual_in_place};
use super::{
    objective_from_parts, DualState, ReconstructionResult, SolverConfig, StopReason,
    DUAL_FEASIBILITY_TOL,
};
use crate::error::{CtError, Result};
use crate::operators::{
    grad_adjoint_into, grad_into, kernel_assumption_check, FanBeamOperator, Image,
    Sinogram,
};
use crate::simulation::evaluate;
use crate::weights::{ir_update_a, ir_update_b, WeightField};

/// Primal-dual iteration state for one problem instance.
///
/// Each [`step`](ChambollePock::step) performs
///
/// ```text
/// p     <- prox_{sigma F1*}(p + sigma K x_bar)
/// q     <- proj_{|q_i| <= lambda w_i}(q + sigma D x_bar)
/// x_new <- max(0, x - tau (K^T p + D^T q))
/// x_bar <- x_new + beta (x_new - x)
/// ```
pub struct ChambollePock<'a> {
    op: &'a FanBeamOperator,
    y: &'a [f64],
    cfg: SolverConfig,
    x: Vec<f64>,
    state: DualState,
    iteration: usize,
    // scratch
    kx: Vec<f64>,
    dh: Vec<f64>,
    dv: Vec<f64>,
    back: Vec<f64>,
    div: Vec<f64>,
}

impl<'a> ChambollePock<'a> {
    pub fn new(
        op: &'a FanBeamOperator,
        y: &'a Sinogram,
        cfg: &SolverConfig,
        x0: &Image,
    ) -> Result<Self> {
        cfg.validate()?;
        op.check_image(x0)?;
        op.check_sinogram(y)?;
        let n = op.num_pixels();
        let m = op.num_measurements();
        Ok(ChambollePock {
            op,
            y: y.data(),
            cfg: cfg.clone(),
            x: x0.data().to_vec(),
            state: DualState {
                dual_fid: vec![0.0; m],
                dual_grad: vec![0.0; 2 * n],
                x_bar: x0.clone(),
            },
            iteration: 0,
            kx: vec![0.0; m],
            dh: vec![0.0; n],
            dv: vec![0.0; n],
            back: vec![0.0; n],
            div: vec![0.0; n],
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn image(&self) -> Image {
        self.state
            .x_bar
            .with_data(self.x.clone())
            .expect("iterate has the image shape")
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// One iteration with weights `w`; returns the relative iterate change.
    pub fn step(&mut self, w: &[f64]) -> Result<f64> {
        let (w_img, h_img) = (self.op.width(), self.op.height());
        let n = self.x.len();
        assert_eq!(w.len(), n);
        let sigma = self.cfg.sigma;
        let tau = self.cfg.tau;
        let x_bar = self.state.x_bar.data();

        // Fidelity dual.
        self.op.forward_into(x_bar, &mut self.kx);
        for (p, kx) in self.state.dual_fid.iter_mut().zip(&self.kx) {
            *p += sigma * kx;
        }
        prox_fidelity_dual_in_place(&mut self.state.dual_fid, sigma, self.y);

        // TV dual.
        grad_into(x_bar, w_img, h_img, &mut self.dh, &mut self.dv);
        let (qh, qv) = self.state.dual_grad.split_at_mut(n);
        for i in 0..n {
            qh[i] += sigma * self.dh[i];
            qv[i] += sigma * self.dv[i];
        }
        project_dual_ball(qh, qv, w, self.cfg.lambda);

        // Primal.
        self.op.adjoint_into(&self.state.dual_fid, &mut self.back);
        grad_adjoint_into(qh, qv, w_img, h_img, &mut self.div);
        let beta = self.cfg.beta;
        let x_bar = self.state.x_bar.data_mut();
        let mut diff2 = 0.0;
        let mut norm2_new = 0.0;
        let mut finite = true;
        for i in 0..n {
            let old = self.x[i];
            let new = (old - tau * (self.back[i] + self.div[i])).max(0.0);
            finite &= new.is_finite();
            let d = new - old;
            diff2 += d * d;
            norm2_new += new * new;
            self.x[i] = new;
            x_bar[i] = new + beta * d;
        }
        self.iteration += 1;
        if !finite || !diff2.is_finite() {
            return Err(CtError::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(if norm2_new > 0.0 {
            (diff2 / norm2_new).sqrt()
        } else {
            diff2.sqrt()
        })
    }

    /// Objective of the current iterate with the unscaled fidelity term.
    pub fn objective(&mut self, w: &[f64]) -> f64 {
        self.op.forward_into(&self.x, &mut self.kx);
        let x = self.image();
        objective_from_parts(&self.kx, self.y, &x, w, 2.0 * self.cfg.lambda)
    }

    /// True when `x >= 0` and every dual pair lies in its disk.
    pub fn is_feasible(&self, w: &[f64]) -> bool {
        let lambda = self.cfg.lambda;
        self.x.iter().all(|&v| v >= 0.0)
            && dual_excess(&self.state.dual_grad, w, lambda)
                <= DUAL_FEASIBILITY_TOL * (1.0 + lambda)
    }
}

/// Weight schedule used by [`run`].
enum Weights<'w> {
    Fixed(&'w WeightField),
    Reweighted {
        rule: IrRule,
        eta: f64,
        p: f64,
        every: Option<usize>,
        initial: Option<&'w WeightField>,
    },
}

/// Iterative reweighting rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrRule {
    /// `(eta / sqrt(eta^2 + |Dx|^2))^(1 - p)` on the current iterate.
    A,
    /// `exp(-|Dx|^2 / eta^2)` on the current iterate.
    B,
}

fn run(
    op: &FanBeamOperator,
    y: &Sinogram,
    weights: Weights<'_>,
    cfg: &SolverConfig,
    x0: &Image,
    reference: Option<&Image>,
    use_tol: bool,
) -> Result<ReconstructionResult> {
    if !kernel_assumption_check(op) {
        return Err(CtError::config(
            "no ray crosses the image: K annihilates constants, the model is ill-posed",
        ));
    }
    let mut cp = ChambollePock::new(op, y, cfg, x0)?;
    let mut current = match &weights {
        Weights::Fixed(w) => (*w).clone(),
        Weights::Reweighted { initial, .. } => initial
            .cloned()
            .unwrap_or_else(|| WeightField::ones(op.width(), op.height())),
    };
    if current.len() != op.num_pixels() {
        return Err(CtError::config("weight field size differs from image size"));
    }

    let mut objective_history = Vec::new();
    let mut metric_history = Vec::new();
    let mut weight_refreshes = Vec::new();
    let mut violations = 0;
    let mut stop_reason = StopReason::MaxIters;

    while cp.iteration() < cfg.max_iters {
        if let Weights::Reweighted {
            rule,
            eta,
            p,
            every,
            initial,
        } = &weights
        {
            let k = cp.iteration();
            let due = match every {
                Some(e) => k % e == 0,
                None => k == 0 && initial.is_none(),
            };
            if due {
                let xk = cp.image();
                current = match rule {
                    IrRule::A => ir_update_a(&xk, *eta, *p)?,
                    IrRule::B => ir_update_b(&xk, *eta)?,
                };
                weight_refreshes.push(k);
            }
        }
        let change = cp.step(current.data())?;
        let k = cp.iteration();
        let converged = use_tol && change < cfg.stop_tol;
        if converged {
            stop_reason = StopReason::TolReached;
        }
        let last = converged || k == cfg.max_iters;
        if k % cfg.record_every == 0 || last {
            let obj = cp.objective(current.data());
            if !obj.is_finite() {
                return Err(CtError::Divergence { iteration: k });
            }
            objective_history.push((k, obj));
            if !cp.is_feasible(current.data()) {
                violations += 1;
            }
            if let Some(r) = reference {
                metric_history.push((k, evaluate(&cp.image(), r)?));
            }
        }
        if converged {
            break;
        }
    }

    Ok(ReconstructionResult {
        image: cp.image(),
        objective_history,
        metric_history,
        iters_run: cp.iteration(),
        stop_reason,
        weight_refreshes,
        feasibility_violations: violations,
        final_weights: current,
    })
}

/// Solves the weighted-TV model with fixed weights `w` from `x0`.
pub fn chambolle_pock(
    op: &FanBeamOperator,
    y: &Sinogram,
    w: &WeightField,
    cfg: &SolverConfig,
    x0: &Image,
    reference: Option<&Image>,
) -> Result<ReconstructionResult> {
    run(op, y, Weights::Fixed(w), cfg, x0, reference, true)
}

/// Plain isotropic TV: unit weights everywhere.
pub fn solve_global_tv(
    op: &FanBeamOperator,
    y: &Sinogram,
    cfg: &SolverConfig,
    x0: &Image,
    reference: Option<&Image>,
) -> Result<ReconstructionResult> {
    let ones = WeightField::ones(op.width(), op.height());
    chambolle_pock(op, y, &ones, cfg, x0, reference)
}

/// The global-TV iterate after exactly `k_early` iterations.
pub fn early_stopped_tv(
    op: &FanBeamOperator,
    y: &Sinogram,
    cfg: &SolverConfig,
    k_early: usize,
    x0: &Image,
) -> Result<Image> {
    if k_early == 0 {
        op.check_image(x0)?;
        return Ok(x0.clone());
    }
    let cfg = SolverConfig {
        max_iters: k_early,
        record_every: k_early,
        ..cfg.clone()
    };
    let ones = WeightField::ones(op.width(), op.height());
    Ok(run(op, y, Weights::Fixed(&ones), &cfg, x0, None, false)?.image)
}

/// Reweighted solve: the weights are recomputed from the current iterate with
/// `rule` every `reweight_every` iterations (starting at iteration 0). With
/// `reweight_every = None` the weights computed from `x0` stay fixed.
#[allow(clippy::too_many_arguments)]
pub fn ir_reweighted_solve(
    op: &FanBeamOperator,
    y: &Sinogram,
    cfg: &SolverConfig,
    rule: IrRule,
    eta: f64,
    p: f64,
    reweight_every: Option<usize>,
    x0: &Image,
    reference: Option<&Image>,
) -> Result<ReconstructionResult> {
    if reweight_every == Some(0) {
        return Err(CtError::parameter("reweight_every must be at least 1"));
    }
    let weights = Weights::Reweighted {
        rule,
        eta,
        p,
        every: reweight_every,
        initial: None,
    };
    run(op, y, weights, cfg, x0, reference, true)
}
