//! Phantoms, measurement noise and image quality metrics.

mod metrics;
mod noise;
mod phantom;

pub use metrics::{evaluate, psnr, relative_error, ssim, MetricsRecord, PSNR_CAP};
pub use noise::{add_noise, add_scaled_noise, noise_direction, NoiseSpec};
pub use phantom::{make_phantom, PhantomSpec, Primitive};
