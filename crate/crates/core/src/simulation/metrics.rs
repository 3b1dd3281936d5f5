use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::operators::Image;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_WINDOW: usize = 11;
const SSIM_RANGE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub re: f64,
    pub psnr: f64,
    pub ssim: f64,
}

fn check_shapes(x: &Image, reference: &Image) -> Result<()> {
    if !x.same_shape(reference) {
        return Err(CtError::config(format!(
            "image is {}x{}, reference is {}x{}",
            x.width(),
            x.height(),
            reference.width(),
            reference.height()
        )));
    }
    Ok(())
}

/// `||x - ref||_2 / ||ref||_2`.
pub fn relative_error(x: &Image, reference: &Image) -> Result<f64> {
    check_shapes(x, reference)?;
    let (num, den) = x
        .data()
        .iter()
        .zip(reference.data())
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - b) * (a - b), d + b * b));
    if den == 0.0 {
        return Err(CtError::DegenerateInput("relative error against an all-zero reference".into()));
    }
    Ok((num / den).sqrt())
}

/// `10 log10(peak^2 / MSE)`, or [`PSNR_CAP`] when the images coincide.
pub fn psnr(x: &Image, reference: &Image, peak: f64) -> Result<f64> {
    check_shapes(x, reference)?;
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = 0.5 * (size as f64 - 1.0);
    let mut k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" convolution: output is `(h - k + 1) x (w - k + 1)`.
fn filter_valid(data: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut rows = vec![0.0; height * ow];
    for r in 0..height {
        let src = &data[r * width..(r + 1) * width];
        for c in 0..ow {
            rows[r * ow + c] = kernel.iter().zip(&src[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for (t, kv) in kernel.iter().enumerate() {
            let src = &rows[(r + t) * ow..(r + t + 1) * ow];
            for (o, s) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03 and dynamic range 1. Only windows fully inside the
/// image are averaged. Images smaller than the window use the largest odd
/// window that fits.
pub fn ssim(x: &Image, reference: &Image) -> Result<f64> {
    check_shapes(x, reference)?;
    let (w, h) = (x.width(), x.height());
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let kernel = gaussian_kernel(size, SSIM_SIGMA);
    let a = x.data();
    let b = reference.data();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(u, v)| u * v).collect();

    let mu_a = filter_valid(a, w, h, &kernel);
    let mu_b = filter_valid(b, w, h, &kernel);
    let e_aa = filter_valid(&aa, w, h, &kernel);
    let e_bb = filter_valid(&bb, w, h, &kernel);
    let e_ab = filter_valid(&ab, w, h, &kernel);

    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// RE, PSNR (peak 1) and SSIM of `x` against `reference`.
pub fn evaluate(x: &Image, reference: &Image) -> Result<MetricsRecord> {
    Ok(MetricsRecord {
        re: relative_error(x, reference)?,
        psnr: psnr(x, reference, 1.0)?,
        ssim: ssim(x, reference)?,
    })
}
