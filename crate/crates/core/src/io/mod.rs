//! File formats, run configuration and the command implementations behind
//! the `awtv` binary.

mod raster;

pub use raster::{
    raster_paths, read_image, read_sinogram, write_image, write_sinogram, RasterFile,
    RasterHeader, RasterKind, DTYPE, HEADER_EXT, PAYLOAD_EXT,
};

mod commands;
mod config;

pub use commands::{
    cmd_evaluate, cmd_reconstruct, cmd_render, cmd_simulate, cmd_stability, metrics_csv, re_curve,
    sweep_csv, to_gray8, write_png, SimulateSummary, METRICS_HEADER,
};
pub use config::{
    GeometryConfig, MethodConfig, NoiseConfig, PhantomConfig, RunConfig, SolverSection,
    StabilityConfig, SweepKind, DEFAULT_COULE_ELLIPSES, DEFAULT_SIZE, DEFAULT_VIEWS,
};
