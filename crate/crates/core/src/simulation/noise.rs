use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::operators::{norm2, Sinogram};

/// Relative Gaussian noise level `nu` and the seed of its direction `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub nu: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(nu: f64, seed: u64) -> Result<Self> {
        let spec = NoiseSpec { nu, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noiseless() -> Self {
        NoiseSpec { nu: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(CtError::parameter(format!("noise level must be >= 0, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Standard normal vector `z` drawn from ChaCha20 seeded with `seed`
/// (ziggurat sampling from `rand_distr`).
pub fn noise_direction(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `y + nu * (||y|| / ||z||) * z` for a given direction `z`.
pub fn add_scaled_noise(y: &Sinogram, z: &[f64], nu: f64) -> Result<Sinogram> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(CtError::parameter(format!("noise level must be >= 0, got {nu}")));
    }
    if z.len() != y.len() {
        return Err(CtError::config("noise direction length differs from sinogram length"));
    }
    if nu == 0.0 {
        return Ok(y.clone());
    }
    let ny = norm2(y.data());
    if ny == 0.0 {
        return Err(CtError::DegenerateInput(
            "cannot scale relative noise against an all-zero sinogram".into(),
        ));
    }
    let nz = norm2(z);
    if nz == 0.0 {
        return Err(CtError::DegenerateInput("noise direction is zero".into()));
    }
    let scale = nu * ny / nz;
    let data = y.data().iter().zip(z).map(|(v, e)| v + scale * e).collect();
    y.with_data(data)
}

/// Noisy sinogram with `||y_noisy - y|| = nu * ||y||`.
pub fn add_noise(y: &Sinogram, spec: &NoiseSpec) -> Result<Sinogram> {
    spec.validate()?;
    if spec.nu == 0.0 {
        return Ok(y.clone());
    }
    let z = noise_direction(y.len(), spec.seed);
    add_scaled_noise(y, &z, spec.nu)
}
