use serde::{Deserialize, Serialize};

use super::{MethodKind, ReconMethod};
use crate::error::{CtError, Result};

const PRESETS_TOML: &str = include_str!("presets.toml");

pub const PRESET_NAMES: [&str; 6] = [
    "synthetic-nu005",
    "synthetic-nu02",
    "coule-g90-nu03",
    "coule-g90-nu05",
    "coule-g45-nu01",
    "mayo-g45-nu005",
];

/// Which ground truth a preset is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetPhantom {
    Synthetic,
    Coule,
    /// No built-in phantom; the run configuration must name an input raster.
    Input,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub phantom: PresetPhantom,
    pub views: usize,
    pub nu: f64,
    #[serde(default)]
    pub pixel_size: Option<f64>,
    /// Shared by all fixed-weight methods.
    pub lambda_weighted: f64,
    pub eta: f64,
    pub p: f64,
    pub lambda_tv: f64,
    pub lambda_ir_a: f64,
    pub eta_ir_a: f64,
    pub lambda_ir_b: f64,
    pub eta_ir_b: f64,
    pub k_early: usize,
}

#[derive(Deserialize)]
struct PresetTable {
    preset: Vec<Preset>,
}

/// All shipped presets, in file order.
pub fn all_presets() -> Vec<Preset> {
    let table: PresetTable = toml::from_str(PRESETS_TOML).expect("embedded presets parse");
    table.preset
}

/// Looks a preset up by name; `ν` is accepted in place of `nu`.
pub fn preset(name: &str) -> Result<Preset> {
    let key = name.replace('ν', "nu");
    all_presets()
        .into_iter()
        .find(|p| p.name == key)
        .ok_or_else(|| {
            CtError::config(format!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")))
        })
}

impl Preset {
    /// The preset's parameters for one method. Network methods still need
    /// their `intermediate` path filled in.
    pub fn method(&self, kind: MethodKind) -> ReconMethod {
        let mut m = match kind {
            MethodKind::GlobalTv => ReconMethod::global_tv(self.lambda_tv),
            MethodKind::Irl1A => ReconMethod::irl1_a(self.lambda_ir_a, self.eta_ir_a, 0.0),
            MethodKind::Irl1B => ReconMethod::irl1_b(self.lambda_ir_b, self.eta_ir_b),
            _ => ReconMethod::weighted(kind, self.lambda_weighted, self.eta, self.p),
        };
        if kind == MethodKind::TvWl1 {
            m.k_early = Some(self.k_early);
        }
        m
    }
}
