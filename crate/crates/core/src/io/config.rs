//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! out = "runs/synthetic"
//! preset = "synthetic-nu02"        # optional defaults for the sections below
//!
//! [phantom]                        # or `input = "gt"` naming an image raster
//! kind = "synthetic"
//! size = 128
//!
//! [geometry]
//! views = 45                       # pixel_size omitted: balanced
//!
//! [noise]
//! nu = 0.02                        # seed defaults to the top-level seed
//!
//! [method]
//! kind = "fbp-wl1"                 # lambda / eta / p default to the preset
//!
//! [solver]
//! max_iters = 2000
//!
//! [stability]
//! sweep = "noise"
//! levels = [0.02, 0.01, 0.005, 0.0025, 0.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CtError, Result};
use crate::fbp::FbpFilter;
use crate::io::{read_image, RasterFile};
use crate::operators::{balanced_pixel_size, FanBeamGeometry, Image};
use crate::pipelines::{preset, Experiment, InitialGuess, MethodKind, Preset, PresetPhantom, ReconMethod};
use crate::simulation::{make_phantom, NoiseSpec, PhantomSpec};
use crate::solver::SolverConfig;

pub const DEFAULT_VIEWS: usize = 45;
pub const DEFAULT_SIZE: usize = 128;
pub const DEFAULT_COULE_ELLIPSES: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhantomConfig {
    Synthetic {
        size: usize,
    },
    Disk {
        size: usize,
        radius: f64,
    },
    Coule {
        size: usize,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Custom {
        spec: PhantomSpec,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub views: Option<usize>,
    #[serde(default)]
    pub pixel_size: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Method section; unset fields come from the preset, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub k_early: Option<usize>,
    #[serde(default)]
    pub reweight_every: Option<usize>,
    #[serde(default)]
    pub intermediate: Option<PathBuf>,
    #[serde(default)]
    pub filter: Option<FbpFilter>,
    #[serde(default)]
    pub init: Option<InitialGuess>,
}

impl MethodConfig {
    pub fn new(kind: MethodKind) -> Self {
        MethodConfig {
            kind,
            lambda: None,
            eta: None,
            p: None,
            k_early: None,
            reweight_every: None,
            intermediate: None,
            filter: None,
            init: None,
        }
    }

    pub fn resolve(&self, preset: Option<&Preset>) -> Result<ReconMethod> {
        let mut m = match preset {
            Some(p) => p.method(self.kind),
            None => ReconMethod::new(self.kind),
        };
        m.lambda = self.lambda.or(m.lambda);
        m.eta = self.eta.or(m.eta);
        m.p = self.p.or(m.p);
        m.k_early = self.k_early.or(m.k_early);
        m.reweight_every = self.reweight_every.or(m.reweight_every);
        m.intermediate = self.intermediate.clone().or(m.intermediate);
        m.filter = self.filter.unwrap_or(m.filter);
        m.init = self.init.unwrap_or(m.init);
        if m.lambda.is_none() {
            return Err(CtError::config(format!("method {} needs `lambda`", m.kind)));
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Noise level -> 0 with the method's weights frozen.
    Noise,
    /// Ground truth perturbed in the image domain.
    ReconstructorImage,
    /// Ground-truth gradient magnitude perturbed.
    ReconstructorGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub sweep: SweepKind,
    pub levels: Vec<f64>,
    #[serde(default)]
    pub perturbation_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub phantom: Option<PhantomConfig>,
    /// Ground-truth image raster, instead of a phantom.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CtError::config(format!("invalid run configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CtError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CtError::config(format!("cannot encode configuration: {e}")))
    }

    pub fn preset(&self) -> Result<Option<Preset>> {
        self.preset.as_deref().map(preset).transpose()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn views(&self) -> Result<usize> {
        Ok(self
            .geometry
            .views
            .or(self.preset()?.map(|p| p.views))
            .unwrap_or(DEFAULT_VIEWS))
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let nu = self.noise.nu.or(self.preset()?.map(|p| p.nu)).unwrap_or(0.0);
        NoiseSpec::new(nu, self.noise.seed.unwrap_or(self.seed))
    }

    pub fn method(&self) -> Result<ReconMethod> {
        let m = self
            .method
            .as_ref()
            .ok_or_else(|| CtError::config("configuration has no [method] section"))?;
        m.resolve(self.preset()?.as_ref())
    }

    /// Ground truth at pixel size 1 (phantom or input raster).
    fn ground_truth_raw(&self) -> Result<Image> {
        let preset = self.preset()?;
        match (&self.phantom, &self.input) {
            (Some(_), Some(_)) => Err(CtError::config("set either [phantom] or `input`, not both")),
            (None, Some(path)) => {
                if !RasterFile::exists(path) {
                    return Err(CtError::Dependency { path: path.clone() });
                }
                read_image(path)?.with_pixel_size(1.0)
            }
            (Some(p), None) => make_phantom(&phantom_spec(p, self.seed)?),
            (None, None) => match preset.map(|p| p.phantom) {
                Some(PresetPhantom::Synthetic) => make_phantom(&PhantomSpec::synthetic(DEFAULT_SIZE)),
                Some(PresetPhantom::Coule) => make_phantom(&PhantomSpec::coule_like(
                    DEFAULT_SIZE,
                    self.seed,
                    DEFAULT_COULE_ELLIPSES,
                )),
                Some(PresetPhantom::Input) => {
                    Err(CtError::config("this preset needs an `input` ground-truth raster"))
                }
                None => Err(CtError::config("configuration needs a [phantom] section or `input`")),
            },
        }
    }

    pub fn pixel_size(&self, width: usize, height: usize) -> Result<f64> {
        let explicit = self
            .geometry
            .pixel_size
            .or(self.preset()?.and_then(|p| p.pixel_size));
        match explicit {
            Some(ps) if ps.is_finite() && ps > 0.0 => Ok(ps),
            Some(ps) => Err(CtError::config(format!("pixel_size must be positive, got {ps}"))),
            None => balanced_pixel_size(width, height, self.views()?, self.seed),
        }
    }

    pub fn ground_truth(&self) -> Result<Image> {
        let raw = self.ground_truth_raw()?;
        let ps = self.pixel_size(raw.width(), raw.height())?;
        raw.with_pixel_size(ps)
    }

    pub fn geometry_for(&self, gt: &Image) -> Result<FanBeamGeometry> {
        FanBeamGeometry::for_image(gt.width(), gt.height(), gt.pixel_size(), self.views()?)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let gt = self.ground_truth()?;
        let g = self.geometry_for(&gt)?;
        Experiment::new(gt, g, self.seed)
    }

    /// Solver settings for `lambda` with steps from the experiment's norm.
    pub fn solver_config(&self, exp: &Experiment, lambda: f64) -> Result<SolverConfig> {
        let mut cfg = exp.solver_config(lambda);
        let s = &self.solver;
        cfg.max_iters = s.max_iters.unwrap_or(cfg.max_iters);
        cfg.stop_tol = s.stop_tol.unwrap_or(cfg.stop_tol);
        cfg.record_every = s.record_every.unwrap_or(cfg.record_every);
        cfg.beta = s.beta.unwrap_or(cfg.beta);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn phantom_spec(p: &PhantomConfig, seed: u64) -> Result<PhantomSpec> {
    let spec = match p {
        PhantomConfig::Synthetic { size } => PhantomSpec::synthetic(*size),
        PhantomConfig::Disk { size, radius } => PhantomSpec::disk(*size, *radius),
        PhantomConfig::Coule { size, count, seed: s } => {
            PhantomSpec::coule_like(*size, s.unwrap_or(seed), count.unwrap_or(DEFAULT_COULE_ELLIPSES))
        }
        PhantomConfig::Custom { spec } => spec.clone(),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let text = r#"
seed = 7
out = "runs/synthetic"
preset = "synthetic-nu02"

[phantom]
kind = "synthetic"
size = 32

[geometry]
views = 12

[noise]
nu = 0.02

[method]
kind = "fbp-wl1"

[solver]
max_iters = 50

[stability]
sweep = "noise"
levels = [0.02, 0.0]
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let m = cfg.method().unwrap();
        let p = preset("synthetic-nu02").unwrap();
        assert_eq!((m.lambda, m.eta, m.p), (Some(p.lambda_weighted), Some(p.eta), Some(p.p)));
        assert_eq!(cfg.noise().unwrap(), NoiseSpec { nu: 0.02, seed: 7 });
        let gt = cfg.ground_truth().unwrap();
        assert_eq!(gt.width(), 32);
        assert_eq!(cfg.views().unwrap(), 12);
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_configurations_are_config_errors() {
        for text in [
            "[method]\nkind = \"fbp-unet\"\n",
            "sede = 1\n",
            "[phantom]\nkind = \"synthetic\"\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CtError::Config(_))), "{text}");
        }
        let cfg = RunConfig::from_toml("[method]\nkind = \"gt-wl1\"\nlambda = 1.0\n").unwrap();
        assert!(matches!(cfg.method(), Err(CtError::Config(_))));
        assert!(matches!(cfg.ground_truth(), Err(CtError::Config(_))));
    }

    #[test]
    fn missing_input_is_a_dependency() {
        let cfg = RunConfig {
            input: Some("/no/such/gt".into()),
            ..Default::default()
        };
        assert!(matches!(cfg.ground_truth(), Err(CtError::Dependency { .. })));
    }

    #[test]
    fn paper_presets_use_unit_pixels() {
        let cfg = RunConfig {
            preset: Some("coule-g45-nu01".into()),
            phantom: Some(PhantomConfig::Coule { size: 16, count: Some(3), seed: None }),
            ..Default::default()
        };
        assert_eq!(cfg.ground_truth().unwrap().pixel_size(), 1.0);
        assert_eq!(cfg.views().unwrap(), 45);
    }
}
