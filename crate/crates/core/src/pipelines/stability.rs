//! Stability sweeps: noise level -> 0 with frozen weights, and a perturbed
//! reconstructor -> ground truth at a fixed noise level.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::{build_intermediate, effective_config, Experiment, MethodKind, ReconMethod};
use crate::error::{CtError, Result};
use crate::operators::{grad, norm2, Image};
use crate::simulation::{add_scaled_noise, noise_direction, relative_error, NoiseSpec};
use crate::solver::{chambolle_pock, SolverConfig};
use crate::weights::{compute_weights, weights_from_magnitude, WeightField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `nu` or `epsilon`.
    pub level: f64,
    pub distance: f64,
}

/// Sweep distances plus the feasibility violations summed over every solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub feasibility_violations: usize,
}

/// Which quantity the reconstructor perturbation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// `x~ = gt + eps ||gt|| z / ||z||`.
    Image,
    /// `|Dx~| = | |D gt| + eps || |D gt| || z / ||z|| |`.
    Gradient,
}

/// Seeded standard-normal direction scaled to unit Euclidean norm.
pub fn perturbation_direction(len: usize, seed: u64) -> Vec<f64> {
    let mut z = noise_direction(len, seed);
    let n = norm2(&z);
    z.iter_mut().for_each(|v| *v /= n);
    z
}

fn check_levels(levels: &[f64], what: &str) -> Result<()> {
    if levels.is_empty() {
        return Err(CtError::config(format!("{what} list is empty")));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(CtError::parameter(format!("{what} values must be finite and >= 0")));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CtError::config(format!("{what} values must be strictly decreasing")));
    }
    Ok(())
}

/// Distances `RE(x*_nu, x*_0)` with weights frozen across the sweep.
///
/// The weights come from `x~` built once on noiseless data (ground truth for
/// gt-wl1, FBP / early TV of the clean sinogram, or the loaded export); global
/// TV uses unit weights. All levels reuse one noise direction `z`.
pub fn noise_stability_sweep(
    exp: &Experiment,
    method: &ReconMethod,
    nus: &[f64],
    noise_seed: u64,
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    check_levels(nus, "noise level")?;
    if *nus.last().unwrap() != 0.0 {
        return Err(CtError::config("noise levels must end at 0"));
    }
    if matches!(method.kind, MethodKind::Irl1A | MethodKind::Irl1B) {
        return Err(CtError::config(format!(
            "{} changes its weights during the solve; the noise sweep needs a fixed reconstructor",
            method.kind
        )));
    }
    let cfg = effective_config(method, cfg);
    let gt = exp.gt();
    let w = match build_intermediate(method, exp, exp.clean(), &cfg)? {
        Some(x_tilde) => compute_weights(&x_tilde, method.eta_value()?, method.p_value()?)?,
        None => WeightField::ones(gt.width(), gt.height()),
    };
    let z = noise_direction(exp.clean().len(), noise_seed);
    let violations = Cell::new(0);
    let solve = |nu: f64| -> Result<Image> {
        let y = add_scaled_noise(exp.clean(), &z, nu)?;
        let r = chambolle_pock(exp.op(), &y, &w, &cfg, &exp.zeros(), None)?;
        violations.set(violations.get() + r.feasibility_violations);
        Ok(r.image)
    };
    let reference = solve(0.0)?;
    let points = nus
        .iter()
        .map(|&nu| {
            let distance = if nu == 0.0 {
                0.0
            } else {
                relative_error(&solve(nu)?, &reference)?
            };
            Ok(SweepPoint { level: nu, distance })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        points,
        feasibility_violations: violations.get(),
    })
}

/// Distances `RE(x*_eps, x*_GT)` at one noise level, where `x*_eps` uses
/// weights from a perturbed ground truth (or ground-truth gradient magnitude)
/// at relative size `eps`.
pub fn reconstructor_stability_sweep(
    exp: &Experiment,
    noise: &NoiseSpec,
    eta: f64,
    p: f64,
    epsilons: &[f64],
    kind: Perturbation,
    perturbation_seed: u64,
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    check_levels(epsilons, "perturbation")?;
    let gt = exp.gt();
    let (w, h) = (gt.width(), gt.height());
    let y = exp.measure(noise)?;
    let violations = Cell::new(0);
    let solve = |weights: &WeightField| -> Result<Image> {
        let r = chambolle_pock(exp.op(), &y, weights, cfg, &exp.zeros(), None)?;
        violations.set(violations.get() + r.feasibility_violations);
        Ok(r.image)
    };
    let g = grad(gt);
    let magnitude: Vec<f64> = g.horizontal.iter().zip(&g.vertical).map(|(a, b)| a.hypot(*b)).collect();
    let z = perturbation_direction(w * h, perturbation_seed);
    let weights_at = |eps: f64| -> Result<WeightField> {
        match kind {
            Perturbation::Image => {
                let s = eps * norm2(gt.data());
                let data = gt.data().iter().zip(&z).map(|(v, d)| v + s * d).collect();
                compute_weights(&gt.with_data(data)?, eta, p)
            }
            Perturbation::Gradient => {
                let s = eps * norm2(&magnitude);
                let m: Vec<f64> = magnitude.iter().zip(&z).map(|(v, d)| (v + s * d).abs()).collect();
                weights_from_magnitude(w, h, &m, eta, p)
            }
        }
    };
    let reference = solve(&weights_at(0.0)?)?;
    let points = epsilons
        .iter()
        .map(|&eps| {
            let distance = if eps == 0.0 {
                0.0
            } else {
                relative_error(&solve(&weights_at(eps)?)?, &reference)?
            };
            Ok(SweepPoint { level: eps, distance })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        points,
        feasibility_violations: violations.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{balanced_pixel_size, FanBeamGeometry};
    use crate::simulation::{make_phantom, PhantomSpec};

    fn experiment() -> Experiment {
        let ps = balanced_pixel_size(24, 24, 12, 0).unwrap();
        let gt = make_phantom(&PhantomSpec::synthetic(24)).unwrap().with_pixel_size(ps).unwrap();
        let g = FanBeamGeometry::for_image(24, 24, ps, 12).unwrap();
        Experiment::new(gt, g, 0).unwrap()
    }

    #[test]
    fn direction_has_unit_norm() {
        let z = perturbation_direction(100, 5);
        assert!((norm2(&z) - 1.0).abs() < 1e-12);
        assert_eq!(z, perturbation_direction(100, 5));
    }

    #[test]
    fn zero_only_sweeps_are_zero() {
        let exp = experiment();
        let cfg = exp.solver_config(1e-3).with_max_iters(20);
        let m = ReconMethod::weighted(MethodKind::GtWl1, 1e-3, 2e-5, 0.3);
        let pts = noise_stability_sweep(&exp, &m, &[0.0], 1, &cfg).unwrap().points;
        assert_eq!(pts, vec![SweepPoint { level: 0.0, distance: 0.0 }]);
        let noise = NoiseSpec::new(0.01, 1).unwrap();
        for kind in [Perturbation::Image, Perturbation::Gradient] {
            let pts = reconstructor_stability_sweep(&exp, &noise, 2e-5, 0.3, &[0.0], kind, 3, &cfg).unwrap().points;
            assert_eq!(pts[0].distance, 0.0);
        }
    }

    #[test]
    fn level_lists_are_validated() {
        let exp = experiment();
        let cfg = exp.solver_config(1e-3).with_max_iters(5);
        let m = ReconMethod::global_tv(1e-3);
        assert!(noise_stability_sweep(&exp, &m, &[0.01, 0.02, 0.0], 1, &cfg).is_err());
        assert!(noise_stability_sweep(&exp, &m, &[0.01], 1, &cfg).is_err());
        assert!(noise_stability_sweep(&exp, &m, &[], 1, &cfg).is_err());
        let ir = ReconMethod::irl1_b(1e-3, 6e-3);
        assert!(noise_stability_sweep(&exp, &ir, &[0.01, 0.0], 1, &cfg).is_err());
        let noise = NoiseSpec::noiseless();
        assert!(reconstructor_stability_sweep(&exp, &noise, 1e-3, 0.3, &[0.1, 0.1], Perturbation::Image, 0, &cfg).is_err());
    }

    #[test]
    fn sweeps_shrink_with_the_level() {
        let exp = experiment();
        let cfg = exp.solver_config(2e-3).with_max_iters(300);
        let m = ReconMethod::weighted(MethodKind::GtWl1, 2e-3, 2e-5, 0.3);
        let rep = noise_stability_sweep(&exp, &m, &[0.04, 0.01, 0.0], 7, &cfg).unwrap();
        assert_eq!(rep.feasibility_violations, 0);
        let pts = rep.points;
        assert!(pts[0].distance > pts[1].distance && pts[1].distance > 0.0);
        let noise = NoiseSpec::new(0.01, 1).unwrap();
        let pts = reconstructor_stability_sweep(&exp, &noise, 1e-2, 0.3, &[0.3, 0.01], Perturbation::Image, 3, &cfg)
            .unwrap()
            .points;
        assert!(pts[0].distance > pts[1].distance, "{pts:?}");
    }
}
