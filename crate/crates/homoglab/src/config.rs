//! Experiment configuration: parsing, validation with aggregated errors, and
//! the canonical hash that identifies a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::media::{
    lipschitz_transform, sample_gaussian_field, sample_poisson_inclusions, InclusionSpec,
    SpectrumSpec, TransformSpec,
};
use crate::solver::SolveOptions;
use crate::CoefficientField;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub grid: GridConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    pub campaign: CampaignConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub d: usize,
    pub l: usize,
    #[serde(default = "default_spacing")]
    pub h: f64,
}

fn default_spacing() -> f64 {
    1.0
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.l, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleConfig {
    Gaussian {
        spectrum: SpectrumSpec,
        transform: TransformSpec,
    },
    Inclusions {
        #[serde(flatten)]
        spec: InclusionSpec,
    },
}

impl EnsembleConfig {
    /// Draw the coefficient field for one sample.
    pub fn sample(&self, grid: &TorusGrid, seed: u64) -> Result<CoefficientField> {
        match self {
            EnsembleConfig::Gaussian {
                spectrum,
                transform,
            } => {
                let omega = sample_gaussian_field(spectrum, grid, seed)?;
                lipschitz_transform(&omega, transform)
            }
            EnsembleConfig::Inclusions { spec } => sample_poisson_inclusions(spec, grid, seed),
        }
    }

    /// Correlation-decay exponent driving the scaling-law predictions.
    pub fn effective_beta(&self, d: usize) -> f64 {
        match self {
            EnsembleConfig::Gaussian { spectrum, .. } => spectrum.effective_beta(d),
            // fixed-size inclusions have compactly supported correlations
            EnsembleConfig::Inclusions { .. } => d as f64 + 1.0,
        }
    }

    pub fn lambda(&self, grid: &TorusGrid) -> Result<f64> {
        match self {
            EnsembleConfig::Gaussian { transform, .. } => Ok(transform.lambda),
            EnsembleConfig::Inclusions { spec } => spec.validate(grid),
        }
    }

    fn validate(&self, grid: &TorusGrid, errors: &mut Vec<String>) {
        match self {
            EnsembleConfig::Gaussian {
                spectrum,
                transform,
            } => {
                if let Err(e) = spectrum.validate(grid.dim()) {
                    errors.push(format!("ensemble.spectrum: {e}"));
                }
                if let Err(e) = transform.validate() {
                    errors.push(format!("ensemble.transform: {e}"));
                }
            }
            EnsembleConfig::Inclusions { spec } => {
                if let Err(e) = spec.validate(grid) {
                    errors.push(format!("ensemble: {e}"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    AvgDecay,
    Growth,
    TwoScale,
    AppendixA,
    Ahom,
    HelmholtzProbe,
}

impl CampaignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CampaignKind::AvgDecay => "avg-decay",
            CampaignKind::Growth => "growth",
            CampaignKind::TwoScale => "two-scale",
            CampaignKind::AppendixA => "appendix-a",
            CampaignKind::Ahom => "ahom",
            CampaignKind::HelmholtzProbe => "helmholtz-probe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Leas,
    Leap,
}

impl Default for ProbeKind {
    fn default() -> Self {
        ProbeKind::Leap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub kind: CampaignKind,
    /// Radii for decay/growth/probe/appendix campaigns (length units).
    #[serde(default)]
    pub radii: Vec<f64>,
    /// Scale ratios for two-scale campaigns, each of the form 2^-m.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Number of sphere directions for decay/growth statistics.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Macroscopic cells per side for two-scale campaigns.
    #[serde(default = "default_macro_cells")]
    pub macro_cells: usize,
    /// Helmholtz probe selection and parameters.
    #[serde(default)]
    pub probe: ProbeKind,
    #[serde(default = "default_probe_radius")]
    pub probe_radius: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Appendix-A campaigns: also run the Monte-Carlo cross-check.
    #[serde(default)]
    pub with_mc: bool,
}

fn default_directions() -> usize {
    8
}

fn default_macro_cells() -> usize {
    8
}

fn default_probe_radius() -> f64 {
    4.0
}

fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Validate the whole configuration, collecting every violation.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        let grid = match self.grid.to_grid() {
            Ok(g) => Some(g),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        };
        if let Some(grid) = &grid {
            self.ensemble.validate(grid, &mut errors);
            let quarter = grid.period() / 4.0;
            let eighth = grid.period() / 8.0;
            match self.campaign.kind {
                CampaignKind::AvgDecay | CampaignKind::Growth => {
                    if self.campaign.radii.is_empty() {
                        errors.push("campaign.radii: must be non-empty".into());
                    }
                    for &r in &self.campaign.radii {
                        if !(2.0..=eighth).contains(&r) {
                            errors.push(format!(
                                "campaign.radii: {r} outside [2, period/8 = {eighth}]"
                            ));
                        }
                    }
                }
                CampaignKind::AppendixA => {
                    if self.campaign.radii.is_empty() {
                        errors.push("campaign.radii: must be non-empty".into());
                    }
                    for &r in &self.campaign.radii {
                        if r > quarter {
                            errors.push(format!(
                                "campaign.radii: {r} exceeds period/4 = {quarter}"
                            ));
                        }
                    }
                }
                CampaignKind::HelmholtzProbe => {
                    for &r in &self.campaign.radii {
                        if r > quarter {
                            errors.push(format!(
                                "campaign.radii: {r} exceeds period/4 = {quarter}"
                            ));
                        }
                    }
                }
                CampaignKind::TwoScale => {
                    if self.campaign.eps.is_empty() {
                        errors.push("campaign.eps: must be non-empty".into());
                    }
                    for &e in &self.campaign.eps {
                        let m = 1.0 / e;
                        if !(e > 0.0 && e <= 1.0 && m.fract() == 0.0 && (m as usize).is_power_of_two())
                        {
                            errors.push(format!("campaign.eps: {e} is not of the form 2^-m"));
                        }
                    }
                    if !self.campaign.macro_cells.is_power_of_two()
                        || self.campaign.macro_cells < 4
                    {
                        errors.push(format!(
                            "campaign.macro_cells: {} must be a power of two >= 4",
                            self.campaign.macro_cells
                        ));
                    }
                }
                CampaignKind::Ahom => {}
            }
        }
        if let Err(e) = self.solver.validate() {
            errors.push(format!("solver: {e}"));
        }
        if self.sampling.n == 0 {
            errors.push("sampling.n: must be >= 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::ValidationError(errors))
        }
    }

    /// Canonical JSON bytes: sorted keys, shortest round-trip number
    /// formatting; formatting of the source file does not matter. The output
    /// directory is excluded so the hash identifies the experiment, not where
    /// its files land.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        let mut value =
            serde_json::to_value(self).map_err(|e| Error::Serialize(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("output");
        }
        let mut out = String::new();
        write_canonical(&value, &mut out);
        Ok(out.into_bytes())
    }

    /// Hex SHA-256 of the canonical bytes.
    pub fn hash(&self) -> Result<String> {
        let bytes = self.canonical_bytes()?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn write_canonical(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if f.fract() == 0.0 && f.abs() < 1e15 {
                    out.push_str(&format!("{}", f as i64));
                } else {
                    out.push_str(&format!("{f}"));
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"))
        }
        serde_json::Value::Array(a) => {
            out.push('[');
            for (i, v) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
    }
}

/// Parse and validate a config file; parse failures carry the TOML location,
/// validation failures list every offending field.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::ParseError(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{SpectrumKind, TransformShape};

    pub(crate) fn minimal_config() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig { d: 2, l: 64, h: 1.0 },
            ensemble: EnsembleConfig::Gaussian {
                spectrum: SpectrumSpec::power_law(1.0),
                transform: TransformSpec::new(0.2, 0.1, TransformShape::Clamp),
            },
            solver: SolveOptions::default(),
            campaign: CampaignConfig {
                kind: CampaignKind::Ahom,
                radii: vec![],
                eps: vec![],
                directions: 8,
                macro_cells: 8,
                probe: ProbeKind::Leap,
                probe_radius: 4.0,
                gamma: 1.0,
                with_mc: false,
            },
            sampling: SamplingConfig {
                n: 2,
                master_seed: 17,
            },
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let text = r#"
[grid]
d = 2
l = 64

[ensemble]
kind = "gaussian"
[ensemble.spectrum]
kind = "power_law"
beta = 1.0
[ensemble.transform]
lambda = 0.2
contrast = 0.1
shape = "clamp"

[campaign]
kind = "ahom"

[sampling]
n = 4
master_seed = 7
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.grid.h, 1.0);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn bad_beta_is_named_in_the_error() {
        let mut cfg = minimal_config();
        if let EnsembleConfig::Gaussian { spectrum, .. } = &mut cfg.ensemble {
            spectrum.beta = -1.0;
        }
        match cfg.validate() {
            Err(Error::ValidationError(errs)) => {
                assert!(errs.iter().any(|e| e.contains("beta")), "{errs:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn all_errors_are_aggregated() {
        let mut cfg = minimal_config();
        cfg.grid.l = 6;
        cfg.sampling.n = 0;
        cfg.solver.tol = 1.0;
        match cfg.validate() {
            Err(Error::ValidationError(errs)) => {
                assert!(errs.len() >= 3, "expected >= 3 errors, got {errs:?}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_preserves_the_hash() {
        let cfg = minimal_config();
        let toml_text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
        assert_eq!(cfg, back);
    }

    #[test]
    fn hash_ignores_formatting_but_sees_values() {
        let cfg = minimal_config();
        let mut other = cfg.clone();
        other.sampling.master_seed = 18;
        assert_ne!(cfg.hash().unwrap(), other.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 64);
    }

    #[test]
    fn two_scale_eps_must_be_dyadic() {
        let mut cfg = minimal_config();
        cfg.campaign.kind = CampaignKind::TwoScale;
        cfg.campaign.eps = vec![0.3];
        assert!(cfg.validate().is_err());
        cfg.campaign.eps = vec![0.25, 0.125];
        cfg.validate().unwrap();
    }
}
