//! End-to-end reconstruction methods and the stability experiments.
//!
//! An [`Experiment`] fixes the ground truth, the projector and the noiseless
//! data, and caches `||[K; D]||`. [`run_method`] simulates noisy data, builds
//! the intermediate image `x~` the method prescribes, turns it into weights
//! and solves the weighted-TV problem.

mod presets;
mod stability;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::fbp::{fbp, FbpFilter};
use crate::io::{RasterFile, RasterKind};
use crate::operators::{operator_norm, FanBeamGeometry, FanBeamOperator, Image, Sinogram};
use crate::simulation::{add_noise, evaluate, relative_error, MetricsRecord, NoiseSpec};
use crate::solver::{
    chambolle_pock, early_stopped_tv, ir_reweighted_solve, solve_global_tv, IrRule,
    ReconstructionResult, SolverConfig,
};
use crate::weights::compute_weights;

pub use presets::{all_presets, preset, Preset, PresetPhantom, PRESET_NAMES};
pub use stability::{
    noise_stability_sweep, perturbation_direction, reconstructor_stability_sweep, Perturbation,
    SweepPoint, SweepReport,
};

/// Iterations of the power method behind the cached operator norm.
pub const NORM_ITERS: usize = 100;

/// Default reweighting cadence of the IR baselines.
pub const DEFAULT_REWEIGHT_EVERY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    GlobalTv,
    GtWl1,
    FbpWl1,
    TvWl1,
    FbpNetWl1,
    FbpGnetWl1,
    Irl1A,
    Irl1B,
}

impl MethodKind {
    pub const ALL: [MethodKind; 8] = [
        MethodKind::GlobalTv,
        MethodKind::GtWl1,
        MethodKind::FbpWl1,
        MethodKind::TvWl1,
        MethodKind::FbpNetWl1,
        MethodKind::FbpGnetWl1,
        MethodKind::Irl1A,
        MethodKind::Irl1B,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::GlobalTv => "global-tv",
            MethodKind::GtWl1 => "gt-wl1",
            MethodKind::FbpWl1 => "fbp-wl1",
            MethodKind::TvWl1 => "tv-wl1",
            MethodKind::FbpNetWl1 => "fbp-net-wl1",
            MethodKind::FbpGnetWl1 => "fbp-gnet-wl1",
            MethodKind::Irl1A => "irl1-a",
            MethodKind::Irl1B => "irl1-b",
        }
    }

    /// Methods that derive fixed weights from an intermediate image.
    pub fn uses_intermediate(self) -> bool {
        matches!(
            self,
            MethodKind::GtWl1
                | MethodKind::FbpWl1
                | MethodKind::TvWl1
                | MethodKind::FbpNetWl1
                | MethodKind::FbpGnetWl1
        )
    }

    fn needs_file(self) -> bool {
        matches!(self, MethodKind::FbpNetWl1 | MethodKind::FbpGnetWl1)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = CtError;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = MethodKind::ALL.iter().map(|k| k.name()).collect();
                CtError::config(format!("unknown method {s:?}; known: {}", known.join(", ")))
            })
    }
}

/// Starting point of the solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Filtered back projection of the noisy data, clamped to `>= 0`.
    Fbp,
}

/// A reconstruction method with its parameters. `lambda`, when set, overrides
/// the solver configuration's value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconMethod {
    pub kind: MethodKind,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Iterations of the early-stopped TV intermediate (tv-wl1).
    #[serde(default)]
    pub k_early: Option<usize>,
    /// Reweighting cadence of the IR methods; defaults to 10.
    #[serde(default)]
    pub reweight_every: Option<usize>,
    /// Network output raster for fbp-net-wl1 / fbp-gnet-wl1.
    #[serde(default)]
    pub intermediate: Option<PathBuf>,
    #[serde(default)]
    pub filter: FbpFilter,
    #[serde(default)]
    pub init: InitialGuess,
}

impl ReconMethod {
    pub fn new(kind: MethodKind) -> Self {
        ReconMethod {
            kind,
            lambda: None,
            eta: None,
            p: None,
            k_early: None,
            reweight_every: None,
            intermediate: None,
            filter: FbpFilter::default(),
            init: InitialGuess::Zero,
        }
    }

    pub fn global_tv(lambda: f64) -> Self {
        ReconMethod {
            lambda: Some(lambda),
            ..Self::new(MethodKind::GlobalTv)
        }
    }

    /// One of the fixed-weight methods with the adaptive law `(eta, p)`.
    pub fn weighted(kind: MethodKind, lambda: f64, eta: f64, p: f64) -> Self {
        ReconMethod {
            lambda: Some(lambda),
            eta: Some(eta),
            p: Some(p),
            ..Self::new(kind)
        }
    }

    pub fn irl1_a(lambda: f64, eta: f64, p: f64) -> Self {
        Self::weighted(MethodKind::Irl1A, lambda, eta, p)
    }

    pub fn irl1_b(lambda: f64, eta: f64) -> Self {
        ReconMethod {
            lambda: Some(lambda),
            eta: Some(eta),
            ..Self::new(MethodKind::Irl1B)
        }
    }

    fn require<T: Copy>(&self, value: Option<T>, name: &str) -> Result<T> {
        value.ok_or_else(|| CtError::config(format!("method {} needs `{name}`", self.kind)))
    }

    pub fn eta_value(&self) -> Result<f64> {
        self.require(self.eta, "eta")
    }

    pub fn p_value(&self) -> Result<f64> {
        match self.kind {
            MethodKind::Irl1A => Ok(self.p.unwrap_or(0.0)),
            _ => self.require(self.p, "p"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(CtError::parameter(format!("lambda must be positive, got {l}")));
            }
        }
        self.filter.validate()?;
        match self.kind {
            MethodKind::GlobalTv => {}
            MethodKind::Irl1B => {
                self.eta_value()?;
            }
            _ => {
                self.eta_value()?;
                self.p_value()?;
            }
        }
        if self.kind == MethodKind::TvWl1 {
            self.require(self.k_early, "k_early")?;
        }
        if self.kind.needs_file() {
            self.require(self.intermediate.as_ref(), "intermediate")?;
        }
        if self.reweight_every == Some(0) {
            return Err(CtError::parameter("reweight_every must be at least 1"));
        }
        Ok(())
    }
}

/// Ground truth, projector, noiseless data and the cached operator norm.
#[derive(Clone, Debug)]
pub struct Experiment {
    gt: Image,
    op: FanBeamOperator,
    clean: Sinogram,
    norm: f64,
}

impl Experiment {
    pub fn new(gt: Image, geometry: FanBeamGeometry, norm_seed: u64) -> Result<Self> {
        let op = FanBeamOperator::for_image(geometry, &gt)?;
        let norm = operator_norm(&op, NORM_ITERS, norm_seed);
        Self::with_norm(gt, op, norm)
    }

    /// Reuses a known norm estimate for the same projector.
    pub fn with_norm(gt: Image, op: FanBeamOperator, norm: f64) -> Result<Self> {
        op.check_image(&gt)?;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CtError::config(format!("invalid operator norm {norm}")));
        }
        let clean = op.project(&gt)?;
        Ok(Experiment { gt, op, clean, norm })
    }

    pub fn gt(&self) -> &Image {
        &self.gt
    }

    pub fn op(&self) -> &FanBeamOperator {
        &self.op
    }

    pub fn clean(&self) -> &Sinogram {
        &self.clean
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Steps `sigma = tau = 1 / ||M||` for the given `lambda`.
    pub fn solver_config(&self, lambda: f64) -> SolverConfig {
        SolverConfig::new(lambda, self.norm)
    }

    pub fn measure(&self, noise: &NoiseSpec) -> Result<Sinogram> {
        add_noise(&self.clean, noise)
    }

    pub fn zeros(&self) -> Image {
        Image::zeros(self.gt.width(), self.gt.height(), self.gt.pixel_size())
    }
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub method: ReconMethod,
    /// Intermediate image `x~`, for methods that use one.
    pub x_tilde: Option<Image>,
    pub x_tilde_metrics: Option<MetricsRecord>,
    pub final_metrics: MetricsRecord,
    /// `RE(x*, x*_GT)` against the solution computed with ground-truth weights.
    pub re_vs_gt_weights_solution: Option<f64>,
    pub result: ReconstructionResult,
    /// Files written for this run (filled in by the command layer).
    pub artifacts: Vec<PathBuf>,
}

impl PipelineReport {
    pub fn image(&self) -> &Image {
        &self.result.image
    }

    /// Fills in the distance to the ground-truth-weights solution.
    pub fn compare_to_gt_weights(&mut self, gt_weights_solution: &Image) -> Result<()> {
        self.re_vs_gt_weights_solution =
            Some(relative_error(&self.result.image, gt_weights_solution)?);
        Ok(())
    }

    /// One CSV row `method,x_re,x_psnr,x_ssim,re,psnr,ssim,re_vs_gt_weights`;
    /// absent values are empty.
    pub fn summary_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let xt = self.x_tilde_metrics;
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.method.kind,
            opt(xt.map(|m| m.re)),
            opt(xt.map(|m| m.psnr)),
            opt(xt.map(|m| m.ssim)),
            self.final_metrics.re,
            self.final_metrics.psnr,
            self.final_metrics.ssim,
            opt(self.re_vs_gt_weights_solution),
        )
    }
}

pub const SUMMARY_HEADER: &str = "method,x_tilde_re,x_tilde_psnr,x_tilde_ssim,re,psnr,ssim,re_vs_gt_weights";

fn effective_config(method: &ReconMethod, cfg: &SolverConfig) -> SolverConfig {
    let mut cfg = cfg.clone();
    if let Some(l) = method.lambda {
        cfg.lambda = l;
    }
    cfg
}

fn initial_guess(method: &ReconMethod, exp: &Experiment, y: &Sinogram) -> Result<Image> {
    match method.init {
        InitialGuess::Zero => Ok(exp.zeros()),
        InitialGuess::Fbp => {
            let gt = exp.gt();
            let mut x = fbp(y, &method.filter, gt.width(), gt.height(), gt.pixel_size())?;
            x.clamp_nonnegative();
            Ok(x)
        }
    }
}

/// Loads a network export, which must match the ground-truth grid.
pub fn load_intermediate(path: &std::path::Path, like: &Image) -> Result<Image> {
    if !RasterFile::exists(path) {
        return Err(CtError::Dependency {
            path: path.to_path_buf(),
        });
    }
    let raster = RasterFile::read(path)?;
    if raster.header.kind == RasterKind::Sinogram {
        return Err(CtError::config(format!("{} is a sinogram, not an image", path.display())));
    }
    let x = raster.to_image(Some(like.pixel_size()))?;
    if !x.same_shape(like) {
        return Err(CtError::config(format!(
            "{} is {}x{}, expected {}x{}",
            path.display(),
            x.width(),
            x.height(),
            like.width(),
            like.height()
        )));
    }
    Ok(x)
}

/// The intermediate image `x~` a method derives from data `y`; `None` for
/// methods without one.
pub fn build_intermediate(
    method: &ReconMethod,
    exp: &Experiment,
    y: &Sinogram,
    cfg: &SolverConfig,
) -> Result<Option<Image>> {
    method.validate()?;
    let cfg = effective_config(method, cfg);
    let gt = exp.gt();
    Ok(match method.kind {
        MethodKind::GtWl1 => Some(gt.clone()),
        MethodKind::FbpWl1 => Some(fbp(y, &method.filter, gt.width(), gt.height(), gt.pixel_size())?),
        MethodKind::TvWl1 => {
            let k = method.k_early.expect("validated");
            Some(early_stopped_tv(exp.op(), y, &cfg, k, &exp.zeros())?)
        }
        MethodKind::FbpNetWl1 | MethodKind::FbpGnetWl1 => {
            let path = method.intermediate.as_ref().expect("validated");
            Some(load_intermediate(path, gt)?)
        }
        MethodKind::GlobalTv | MethodKind::Irl1A | MethodKind::Irl1B => None,
    })
}

/// Simulates `y = K x_gt + e` and runs `method` on it.
pub fn run_method(
    method: &ReconMethod,
    exp: &Experiment,
    noise: &NoiseSpec,
    cfg: &SolverConfig,
) -> Result<PipelineReport> {
    method.validate()?;
    let y = exp.measure(noise)?;
    run_on_data(method, exp, &y, cfg)
}

/// Runs `method` on given data `y` (generated from the experiment's ground truth).
pub fn run_on_data(
    method: &ReconMethod,
    exp: &Experiment,
    y: &Sinogram,
    cfg: &SolverConfig,
) -> Result<PipelineReport> {
    method.validate()?;
    let cfg = effective_config(method, cfg);
    let gt = exp.gt();
    let x_tilde = build_intermediate(method, exp, y, &cfg)?;
    match x_tilde {
        Some(x_tilde) => run_with_intermediate(method, exp, y, &cfg, x_tilde),
        None => {
            let x0 = initial_guess(method, exp, y)?;
            let every = Some(method.reweight_every.unwrap_or(DEFAULT_REWEIGHT_EVERY));
            let result = match method.kind {
                MethodKind::GlobalTv => solve_global_tv(exp.op(), y, &cfg, &x0, Some(gt))?,
                MethodKind::Irl1A => ir_reweighted_solve(
                    exp.op(),
                    y,
                    &cfg,
                    IrRule::A,
                    method.eta_value()?,
                    method.p_value()?,
                    every,
                    &x0,
                    Some(gt),
                )?,
                MethodKind::Irl1B => ir_reweighted_solve(
                    exp.op(),
                    y,
                    &cfg,
                    IrRule::B,
                    method.eta_value()?,
                    0.0,
                    every,
                    &x0,
                    Some(gt),
                )?,
                _ => unreachable!("intermediate-based methods handled above"),
            };
            finish(method, None, exp, result)
        }
    }
}

/// The shared fixed-weight path: weights from `x_tilde`, then one solve.
/// Every intermediate-based method funnels through here.
pub fn run_with_intermediate(
    method: &ReconMethod,
    exp: &Experiment,
    y: &Sinogram,
    cfg: &SolverConfig,
    x_tilde: Image,
) -> Result<PipelineReport> {
    method.validate()?;
    let cfg = effective_config(method, cfg);
    exp.op().check_image(&x_tilde)?;
    let w = compute_weights(&x_tilde, method.eta_value()?, method.p_value()?)?;
    let x0 = initial_guess(method, exp, y)?;
    let result = chambolle_pock(exp.op(), y, &w, &cfg, &x0, Some(exp.gt()))?;
    finish(method, Some(x_tilde), exp, result)
}

fn finish(
    method: &ReconMethod,
    x_tilde: Option<Image>,
    exp: &Experiment,
    result: ReconstructionResult,
) -> Result<PipelineReport> {
    let x_tilde_metrics = x_tilde.as_ref().map(|x| evaluate(x, exp.gt())).transpose()?;
    let final_metrics = evaluate(&result.image, exp.gt())?;
    let re_vs_gt_weights_solution = (method.kind == MethodKind::GtWl1).then_some(0.0);
    Ok(PipelineReport {
        method: method.clone(),
        x_tilde,
        x_tilde_metrics,
        final_metrics,
        re_vs_gt_weights_solution,
        result,
        artifacts: Vec::new(),
    })
}
