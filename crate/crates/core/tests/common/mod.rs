//! Shared instances and independent oracles for the integration tests.
#![allow(dead_code)]

use awtv::operators::{balanced_pixel_size, operator_norm, FanBeamGeometry, FanBeamOperator, Image, Sinogram};
use awtv::simulation::{make_phantom, PhantomSpec};

pub struct Instance {
    pub gt: Image,
    pub op: FanBeamOperator,
    pub y: Sinogram,
    pub norm: f64,
}

/// Noiseless data of a phantom at the balanced pixel size.
pub fn instance(spec: &PhantomSpec, views: usize, norm_iters: usize) -> Instance {
    let n = spec.size;
    let ps = balanced_pixel_size(n, n, views, 0).unwrap();
    let gt = make_phantom(spec).unwrap().with_pixel_size(ps).unwrap();
    let g = FanBeamGeometry::for_image(n, n, ps, views).unwrap();
    let op = FanBeamOperator::for_image(g, &gt).unwrap();
    let y = op.project(&gt).unwrap();
    let norm = operator_norm(&op, norm_iters, 0);
    Instance { gt, op, y, norm }
}

/// Row-major dense `K`, built by walking every ray.
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn of(op: &FanBeamOperator) -> Self {
        Dense {
            rows: op.num_measurements(),
            cols: op.num_pixels(),
            a: op.to_dense().unwrap(),
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_t(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &zr) in self.a.chunks_exact(self.cols).zip(z) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * zr;
            }
        }
        out
    }
}

/// Forward differences written out loop by loop (zero at the far border).
pub fn grad_loops(x: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dh = vec![0.0; w * h];
    let mut dv = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                dh[i] = x[i + 1] - x[i];
            }
            if r + 1 < h {
                dv[i] = x[i + w] - x[i];
            }
        }
    }
    (dh, dv)
}

pub fn grad_t_loops(dh: &[f64], dv: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                out[i + 1] += dh[i];
                out[i] -= dh[i];
            }
            if r + 1 < h {
                out[i + w] += dv[i];
                out[i] -= dv[i];
            }
        }
    }
    out
}

/// Projected FISTA on `1/2 ||Kx - y||^2 + lambda sum sqrt(|Dx|_i^2 + eps^2)`
/// over `x >= 0`, with dense `K` and continuation in `eps`. Independent of
/// the primal-dual solver: no duals, no operator norm estimate from the crate.
pub fn smoothed_tv_oracle(
    dense: &Dense,
    y: &[f64],
    width: usize,
    height: usize,
    lambda: f64,
    eps_schedule: &[f64],
) -> Vec<f64> {
    let n = dense.cols;
    let mut v = vec![1.0; n];
    let mut k2 = 0.0;
    for _ in 0..300 {
        let w = dense.mul_t(&dense.mul(&v));
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        k2 = nw / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / nw).collect();
    }
    let k2 = 1.01 * k2;
    let mut x = vec![0.0; n];
    for &eps in eps_schedule {
        // ||D||^2 <= 8 bounds the Hessian of the smoothed TV term by 8 / eps.
        let lip = k2 + 8.0 * lambda / eps;
        let step = 1.0 / lip;
        let iters = ((200.0 * (lip / k2).sqrt()) as usize).min(200_000);
        let mut z = x.clone();
        let mut t = 1.0f64;
        for _ in 0..iters {
            let r: Vec<f64> = dense.mul(&z).iter().zip(y).map(|(a, b)| a - b).collect();
            let mut g = dense.mul_t(&r);
            let (dh, dv) = grad_loops(&z, width, height);
            let (nh, nv): (Vec<f64>, Vec<f64>) = dh
                .iter()
                .zip(&dv)
                .map(|(a, b)| {
                    let s = (a * a + b * b + eps * eps).sqrt();
                    (a / s, b / s)
                })
                .unzip();
            for (gi, d) in g.iter_mut().zip(grad_t_loops(&nh, &nv, width, height)) {
                *gi += lambda * d;
            }
            let xn: Vec<f64> = z.iter().zip(&g).map(|(a, gi)| (a - step * gi).max(0.0)).collect();
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = xn.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
            x = xn;
            t = tn;
        }
    }
    x
}
