use super::geometry::{FanBeamGeometry, Sinogram};
use super::image::Image;
use crate::error::{CtError, Result};

/// One ray's sampling schedule in continuous pixel-index coordinates.
#[derive(Clone, Copy, Debug)]
struct Ray {
    row: f64,
    col: f64,
    d_row: f64,
    d_col: f64,
    count: usize,
    /// Physical length of one sampling step.
    weight: f64,
}

/// Rows of `K` with duplicate pixel hits merged, pixel indices ascending.
#[derive(Clone, Debug)]
struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Upper bound on stored matrix entries (about 12 bytes each); larger
/// problems fall back to walking the rays on every application.
const MAX_STORED_ENTRIES: usize = 48 << 20;

/// Fan-beam projector bound to an image shape.
///
/// Each ray is sampled at equidistant points (step at most half a pixel) inside
/// the image square; every sample reads the image by bilinear interpolation.
/// Forward and adjoint share the same sample schedule and interpolation
/// weights, so they are an exact transpose pair. When it fits in memory the
/// resulting sparse matrix is assembled once and reused.
#[derive(Clone, Debug)]
pub struct FanBeamOperator {
    geometry: FanBeamGeometry,
    width: usize,
    height: usize,
    pixel_size: f64,
    rays: Vec<Ray>,
    matrix: Option<SparseRows>,
}

impl FanBeamOperator {
    pub fn new(
        geometry: FanBeamGeometry,
        width: usize,
        height: usize,
        pixel_size: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        if width == 0 || height == 0 {
            return Err(CtError::config("image dimensions must be positive"));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(CtError::config(format!("invalid pixel size {pixel_size}")));
        }
        geometry.validate_for_image(width, height, pixel_size)?;
        let rays = build_rays(&geometry, width, height, pixel_size);
        let mut op = FanBeamOperator {
            geometry,
            width,
            height,
            pixel_size,
            rays,
            matrix: None,
        };
        // Each sample touches at most 4 pixels, and consecutive samples half a
        // pixel apart share most of them.
        let estimate: usize = op.rays.iter().map(|r| 2 * r.count + 4).sum();
        if estimate <= MAX_STORED_ENTRIES {
            op.matrix = Some(op.assemble());
        }
        Ok(op)
    }

    fn assemble(&self) -> SparseRows {
        let mut offsets = Vec::with_capacity(self.rays.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut row: Vec<(u32, f64)> = Vec::new();
        offsets.push(0);
        for ray in &self.rays {
            row.clear();
            self.walk(ray, |idx, w| row.push((idx as u32, w)));
            row.sort_unstable_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < row.len() {
                let idx = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == idx {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    cols.push(idx);
                    vals.push(acc * ray.weight);
                }
            }
            offsets.push(cols.len());
        }
        SparseRows { offsets, cols, vals }
    }

    /// Operator for images shaped like `image`.
    pub fn for_image(geometry: FanBeamGeometry, image: &Image) -> Result<Self> {
        Self::new(geometry, image.width(), image.height(), image.pixel_size())
    }

    pub fn geometry(&self) -> &FanBeamGeometry {
        &self.geometry
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    /// `n`, the number of pixels.
    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// `m`, the number of measurements.
    pub fn num_measurements(&self) -> usize {
        self.rays.len()
    }

    pub fn check_image(&self, x: &Image) -> Result<()> {
        if x.width() != self.width || x.height() != self.height {
            return Err(CtError::config(format!(
                "image is {}x{}, projector expects {}x{}",
                x.width(),
                x.height(),
                self.width,
                self.height
            )));
        }
        if (x.pixel_size() - self.pixel_size).abs() > 1e-12 * self.pixel_size {
            return Err(CtError::config(format!(
                "image pixel size {} differs from projector pixel size {}",
                x.pixel_size(),
                self.pixel_size
            )));
        }
        Ok(())
    }

    pub fn check_sinogram(&self, y: &Sinogram) -> Result<()> {
        if y.geometry() != &self.geometry {
            return Err(CtError::config("sinogram geometry differs from projector geometry"));
        }
        Ok(())
    }

    /// `out = K x` on raw buffers.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.num_pixels());
        assert_eq!(out.len(), self.num_measurements());
        if let Some(a) = &self.matrix {
            for (r, o) in out.iter_mut().enumerate() {
                let span = a.offsets[r]..a.offsets[r + 1];
                *o = a.cols[span.clone()]
                    .iter()
                    .zip(&a.vals[span])
                    .map(|(&c, &v)| v * x[c as usize])
                    .sum();
            }
            return;
        }
        for (ray, o) in self.rays.iter().zip(out.iter_mut()) {
            let mut acc = 0.0;
            self.walk(ray, |idx, w| acc += w * x[idx]);
            *o = acc * ray.weight;
        }
    }

    /// `out = K^T y` on raw buffers.
    pub fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.num_measurements());
        assert_eq!(out.len(), self.num_pixels());
        out.fill(0.0);
        if let Some(a) = &self.matrix {
            for (r, &v) in y.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let span = a.offsets[r]..a.offsets[r + 1];
                for (&c, &w) in a.cols[span.clone()].iter().zip(&a.vals[span]) {
                    out[c as usize] += w * v;
                }
            }
            return;
        }
        for (ray, &v) in self.rays.iter().zip(y) {
            if v == 0.0 {
                continue;
            }
            let s = v * ray.weight;
            self.walk(ray, |idx, w| out[idx] += w * s);
        }
    }

    pub fn project(&self, x: &Image) -> Result<Sinogram> {
        self.check_image(x)?;
        let mut out = vec![0.0; self.num_measurements()];
        self.forward_into(x.data(), &mut out);
        Sinogram::new(self.geometry.clone(), out)
    }

    pub fn backproject(&self, y: &Sinogram) -> Result<Image> {
        self.check_sinogram(y)?;
        let mut out = vec![0.0; self.num_pixels()];
        self.adjoint_into(y.data(), &mut out);
        Image::new(self.width, self.height, out, self.pixel_size)
    }

    /// Dense `m x n` matrix, row-major. Restricted to images of at most 32x32.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        if self.width > 32 || self.height > 32 {
            return Err(CtError::config("dense materialisation is limited to 32x32 images"));
        }
        let n = self.num_pixels();
        let m = self.num_measurements();
        let mut dense = vec![0.0; m * n];
        for (r, ray) in self.rays.iter().enumerate() {
            let row = &mut dense[r * n..(r + 1) * n];
            self.walk(ray, |idx, w| row[idx] += w * ray.weight);
        }
        Ok(dense)
    }

    /// Visits every (pixel, bilinear weight) pair along `ray`, one entry per
    /// sample and neighbour. Neighbours outside the grid read as zero.
    #[inline(always)]
    fn walk(&self, ray: &Ray, mut visit: impl FnMut(usize, f64)) {
        let w = self.width as isize;
        let h = self.height as isize;
        let mut r = ray.row;
        let mut c = ray.col;
        for _ in 0..ray.count {
            let r0 = r.floor();
            let c0 = c.floor();
            let fr = r - r0;
            let fc = c - c0;
            let i0 = r0 as isize;
            let j0 = c0 as isize;
            let w00 = (1.0 - fr) * (1.0 - fc);
            let w01 = (1.0 - fr) * fc;
            let w10 = fr * (1.0 - fc);
            let w11 = fr * fc;
            if i0 >= 0 && j0 >= 0 && i0 + 1 < h && j0 + 1 < w {
                let base = (i0 * w + j0) as usize;
                let stride = self.width;
                visit(base, w00);
                visit(base + 1, w01);
                visit(base + stride, w10);
                visit(base + stride + 1, w11);
            } else {
                for (di, dj, wt) in [(0, 0, w00), (0, 1, w01), (1, 0, w10), (1, 1, w11)] {
                    let i = i0 + di;
                    let j = j0 + dj;
                    if i >= 0 && j >= 0 && i < h && j < w {
                        visit((i * w + j) as usize, wt);
                    }
                }
            }
            r += ray.d_row;
            c += ray.d_col;
        }
    }
}

fn build_rays(g: &FanBeamGeometry, width: usize, height: usize, pixel_size: f64) -> Vec<Ray> {
    let half_w = 0.5 * width as f64 * pixel_size;
    let half_h = 0.5 * height as f64 * pixel_size;
    let max_step = 0.5 * pixel_size;
    let mut rays = Vec::with_capacity(g.num_measurements());
    for &angle in g.angles_deg() {
        let (sin_b, cos_b) = angle.to_radians().sin_cos();
        let src = (g.source_to_center() * cos_b, g.source_to_center() * sin_b);
        let det_center = (
            src.0 - g.source_to_detector() * cos_b,
            src.1 - g.source_to_detector() * sin_b,
        );
        for k in 0..g.num_detectors() {
            let u = g.detector_offset(k);
            let target = (det_center.0 - u * sin_b, det_center.1 + u * cos_b);
            let (dx, dy) = (target.0 - src.0, target.1 - src.1);
            let len = dx.hypot(dy);
            let dir = (dx / len, dy / len);
            let ray = match clip_to_box(src, dir, half_w, half_h) {
                Some((t0, t1)) if t1 > t0 => {
                    let length = t1 - t0;
                    let count = (length / max_step).ceil().max(1.0) as usize;
                    let dt = length / count as f64;
                    let t = t0 + 0.5 * dt;
                    let (x, y) = (src.0 + t * dir.0, src.1 + t * dir.1);
                    Ray {
                        row: 0.5 * (height as f64 - 1.0) - y / pixel_size,
                        col: x / pixel_size + 0.5 * (width as f64 - 1.0),
                        d_row: -dir.1 * dt / pixel_size,
                        d_col: dir.0 * dt / pixel_size,
                        count,
                        weight: dt,
                    }
                }
                _ => Ray {
                    row: 0.0,
                    col: 0.0,
                    d_row: 0.0,
                    d_col: 0.0,
                    count: 0,
                    weight: 0.0,
                },
            };
            rays.push(ray);
        }
    }
    rays
}

/// Parametric interval `[t0, t1]` where `origin + t * dir` lies inside the
/// axis-aligned box `[-half_w, half_w] x [-half_h, half_h]`.
fn clip_to_box(origin: (f64, f64), dir: (f64, f64), half_w: f64, half_h: f64) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (o, d, half) in [(origin.0, dir.0, half_w), (origin.1, dir.1, half_h)] {
        if d.abs() < 1e-15 {
            if o < -half || o > half {
                return None;
            }
        } else {
            let a = (-half - o) / d;
            let b = (half - o) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// `K x` for the given geometry.
pub fn project(x: &Image, geometry: &FanBeamGeometry) -> Result<Sinogram> {
    FanBeamOperator::for_image(geometry.clone(), x)?.project(x)
}

/// `K^T y` onto a `width x height` grid with the given pixel size.
pub fn backproject(y: &Sinogram, width: usize, height: usize, pixel_size: f64) -> Result<Image> {
    FanBeamOperator::new(y.geometry().clone(), width, height, pixel_size)?.backproject(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{dot, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_operator(side: usize, views: usize) -> FanBeamOperator {
        let g = FanBeamGeometry::for_image(side, side, 1.0, views).unwrap();
        FanBeamOperator::new(g, side, side, 1.0).unwrap()
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let op = small_operator(16, 8);
        let y = op.project(&Image::zeros(16, 16, 1.0)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_sinogram_backprojects_to_zero() {
        let op = small_operator(16, 8);
        let x = op.backproject(&Sinogram::zeros(op.geometry().clone())).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_bin_backprojection_stays_on_ray_footprint() {
        let op = small_operator(16, 4);
        let m = op.num_measurements();
        let target = m / 2 + 3;
        let mut y = vec![0.0; m];
        y[target] = 1.0;
        let mut bp = vec![0.0; op.num_pixels()];
        op.adjoint_into(&y, &mut bp);

        // Footprint: pixels touched by the same ray's interpolation stencil.
        let mut footprint = vec![false; op.num_pixels()];
        op.walk(&op.rays[target], |idx, w| {
            if w > 0.0 {
                footprint[idx] = true;
            }
        });
        assert!(footprint.iter().any(|&f| f));
        for (i, &v) in bp.iter().enumerate() {
            if footprint[i] {
                assert!(v >= 0.0);
            } else {
                assert_eq!(v, 0.0, "pixel {i} off the footprint");
            }
        }
        assert!(bp.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let op = small_operator(24, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..op.num_pixels()).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..op.num_measurements()).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut kx = vec![0.0; op.num_measurements()];
            let mut kty = vec![0.0; op.num_pixels()];
            op.forward_into(&x, &mut kx);
            op.adjoint_into(&y, &mut kty);
            let mismatch = (dot(&kx, &y) - dot(&x, &kty)).abs() / (norm2(&kx) * norm2(&y));
            assert!(mismatch < 1e-12, "mismatch {mismatch}");
        }
    }

    #[test]
    fn stored_matrix_matches_ray_walk() {
        let op = small_operator(20, 7);
        assert!(op.matrix.is_some());
        let mut free = op.clone();
        free.matrix = None;
        let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.11).cos()).collect();
        let y: Vec<f64> = (0..op.num_measurements()).map(|i| (i as f64 * 0.07).sin()).collect();
        let (mut a, mut b) = (vec![0.0; y.len()], vec![0.0; y.len()]);
        op.forward_into(&x, &mut a);
        free.forward_into(&x, &mut b);
        assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs())));
        let (mut a, mut b) = (vec![0.0; 400], vec![0.0; 400]);
        op.adjoint_into(&y, &mut a);
        free.adjoint_into(&y, &mut b);
        assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs())));
    }

    #[test]
    fn dense_matrix_matches_forward() {
        let op = small_operator(8, 5);
        let dense = op.to_dense().unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut kx = vec![0.0; op.num_measurements()];
        op.forward_into(&x, &mut kx);
        for (r, &v) in kx.iter().enumerate() {
            let row = &dense[r * 64..(r + 1) * 64];
            assert!((dot(row, &x) - v).abs() < 1e-12);
        }
        assert!(small_operator(40, 2).to_dense().is_err());
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let op = small_operator(16, 4);
        assert!(matches!(
            op.project(&Image::zeros(8, 16, 1.0)),
            Err(CtError::Config(_))
        ));
        let other = FanBeamGeometry::for_image(16, 16, 1.0, 5).unwrap();
        assert!(op.backproject(&Sinogram::zeros(other)).is_err());
    }

    #[test]
    fn rays_missing_the_image_are_empty() {
        assert!(clip_to_box((10.0, 5.0), (0.0, 1.0), 2.0, 2.0).is_none());
        let (t0, t1) = clip_to_box((-10.0, 0.0), (1.0, 0.0), 2.0, 2.0).unwrap();
        assert!((t0 - 8.0).abs() < 1e-12 && (t1 - 12.0).abs() < 1e-12);
    }
}
