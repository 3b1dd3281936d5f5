//! Few-view fan-beam CT reconstruction with spatially adaptive weighted
//! total variation.
//!
//! The crate is organised bottom-up:
//!
//! - [`operators`]: images, fan-beam geometry, the projector pair `K`/`K^T`,
//!   the finite-difference pair `D`/`D^T` and the spectral norm of `[K; D]`.
//! - [`fbp`]: fan-beam filtered back projection.
//! - [`weights`]: the fixed adaptive weight law and the two reweighting rules.
//! - [`solver`]: Chambolle-Pock for the weighted-TV model with a
//!   non-negativity constraint, plus global-TV, early-stopped TV and
//!   iteratively reweighted variants.
//! - [`simulation`]: phantoms, the norm-calibrated noise model and RE/PSNR/SSIM.
//! - [`pipelines`]: end-to-end method runs and stability sweeps.
//! - [`io`]: raster exchange files, run configuration and the CLI commands.

pub mod error;
pub mod fbp;
pub mod io;
pub mod operators;
pub mod pipelines;
pub mod simulation;
pub mod solver;
pub mod weights;

pub use error::{CtError, Result};
pub use operators::{FanBeamGeometry, FanBeamOperator, GradientField, Image, Sinogram};
