//! Run configuration files and the per-model denoising presets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::VoxelParams;

pub const DEFAULT_MU_G_LIST: [f64; 6] = [0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub nf: usize,
    pub nv: usize,
    pub mu_g: f64,
    pub ts: usize,
    pub alpha_c: f64,
    pub n_heads: usize,
    pub mu_g_list: Vec<f64>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            nf: 10,
            nv: 20,
            mu_g: 0.3,
            ts: 20,
            alpha_c: 8.0,
            n_heads: DEFAULT_MU_G_LIST.len(),
            mu_g_list: DEFAULT_MU_G_LIST.to_vec(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.mu_g_list.len() != self.n_heads {
            return Err(Error::InvalidParams(format!(
                "n_heads is {} but mu_g_list has {} entries",
                self.n_heads,
                self.mu_g_list.len()
            )));
        }
        if self.mu_g_list.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidParams("mu_g values must be positive".into()));
        }
        head_index(&self.mu_g_list, self.mu_g)?;
        self.voxel().validate()
    }

    pub fn voxel(&self) -> VoxelParams {
        VoxelParams {
            half_extent: self.ts,
            alpha_c: self.alpha_c,
            ..VoxelParams::default()
        }
    }

    pub fn apply_preset(&mut self, preset: &ModelPreset) {
        self.nf = preset.nf;
        self.nv = preset.nv;
        self.mu_g = preset.mu_g;
    }
}

/// Position of `mu_g` in `list`. Values are matched exactly up to parsing
/// noise; there is no interpolation between heads.
pub fn head_index(list: &[f64], mu_g: f64) -> Result<usize> {
    list.iter()
        .position(|&m| (m - mu_g).abs() <= 1e-12)
        .ok_or_else(|| {
            Error::InvalidParams(format!(
                "mu_g {mu_g} is not one of the network heads {list:?}"
            ))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPreset {
    pub model: String,
    pub nf: usize,
    pub nv: usize,
    pub mu_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetTable {
    pub models: Vec<ModelPreset>,
}

const PRESETS: &str = include_str!("../../configs/model_presets.json");

impl PresetTable {
    /// The shipped per-model iteration counts and head choices.
    pub fn builtin() -> Self {
        Self::parse(PRESETS).expect("shipped presets parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("presets serialize")
    }

    pub fn get(&self, model: &str) -> Option<&ModelPreset> {
        self.models
            .iter()
            .find(|p| p.model.eq_ignore_ascii_case(model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{ "nf": 3, "mu_g": 0.45 }"#).unwrap();
        assert_eq!((cfg.nf, cfg.nv, cfg.mu_g, cfg.ts), (3, 20, 0.45, 20));
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<PipelineConfig>(r#"{ "nff": 3 }"#).is_err());
    }

    #[test]
    fn off_list_mu_g_is_rejected() {
        let cfg = PipelineConfig {
            mu_g: 0.33,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(head_index(&DEFAULT_MU_G_LIST, 0.4).unwrap(), 3);
    }

    #[test]
    fn head_count_must_match_list() {
        let cfg = PipelineConfig {
            n_heads: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn preset_lookup() {
        let t = PresetTable::builtin();
        let p = t.get("twelve").unwrap();
        assert_eq!((p.nf, p.nv, p.mu_g), (25, 10, 0.3));
        let mut cfg = PipelineConfig::default();
        cfg.apply_preset(p);
        assert_eq!(cfg.nf, 25);
    }
}
