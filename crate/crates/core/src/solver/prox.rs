//! Proximal maps of the two conjugate terms in the primal-dual splitting.

use crate::error::{CtError, Result};
use crate::operators::GradientField;
use crate::weights::WeightField;

/// `prox_{sigma F1*}(p) = (p - sigma y) / (1 + sigma)` for
/// `F1(u) = 1/2 ||u - y||^2`, whose conjugate is `<p, y> + 1/2 ||p||^2`.
pub fn prox_fidelity_dual(p: &[f64], sigma: f64, y: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    prox_fidelity_dual_in_place(&mut out, sigma, y);
    out
}

pub fn prox_fidelity_dual_in_place(p: &mut [f64], sigma: f64, y: &[f64]) {
    assert_eq!(p.len(), y.len());
    let inv = 1.0 / (1.0 + sigma);
    for (pi, yi) in p.iter_mut().zip(y) {
        *pi = (*pi - sigma * yi) * inv;
    }
}

/// Radial projection of each pixel pair `(qh_i, qv_i)` onto the disk of
/// radius `lambda * w_i`.
pub fn project_dual_ball(qh: &mut [f64], qv: &mut [f64], w: &[f64], lambda: f64) {
    assert!(qh.len() == w.len() && qv.len() == w.len());
    for ((h, v), &wi) in qh.iter_mut().zip(qv.iter_mut()).zip(w) {
        let radius = lambda * wi;
        let mag = h.hypot(*v);
        if mag > radius {
            let s = radius / mag;
            *h *= s;
            *v *= s;
        }
    }
}

/// `prox_{sigma F2*}(q + sigma D x_bar)` for the weighted isotropic TV
/// `F2(u) = lambda sum_i w_i |u_i|`: the projection of `t = q + sigma D x_bar`
/// onto the product of disks `{|t_i| <= lambda w_i}`. `q` is stacked
/// `[horizontal; vertical]`.
pub fn prox_tv_dual(
    q: &[f64],
    sigma: f64,
    w: &WeightField,
    lambda: f64,
    dx_bar: &GradientField,
) -> Result<Vec<f64>> {
    let n = w.len();
    if q.len() != 2 * n || dx_bar.horizontal.len() != n {
        return Err(CtError::config("dual variable, weights and gradient sizes differ"));
    }
    let mut t: Vec<f64> = q
        .iter()
        .zip(dx_bar.horizontal.iter().chain(&dx_bar.vertical))
        .map(|(qi, di)| qi + sigma * di)
        .collect();
    let (th, tv) = t.split_at_mut(n);
    project_dual_ball(th, tv, w.data(), lambda);
    Ok(t)
}

/// Largest amount by which any pair `(qh_i, qv_i)` leaves its disk.
pub fn dual_excess(q: &[f64], w: &[f64], lambda: f64) -> f64 {
    let n = w.len();
    (0..n)
        .map(|i| q[i].hypot(q[n + i]) - lambda * w[i])
        .fold(f64::NEG_INFINITY, f64::max)
}
