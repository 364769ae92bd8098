//! The JSON run configuration shared by the CLI and the HTTP service, plus the
//! catalog of named scenario/deployment presets.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "scenario": { "preset": "IOO" },
//!   "deployments": [ { "layout": "standard", "n_trps": 12 }, { "layout": "edge" } ],
//!   "noise": { "sigma_toa_m": 0.2, "nlos_bias_mean_m": 2.0, "seed": 1 },
//!   "bounds": { "cell_size_m": 1.0 },
//!   "campaign": { "n_drops": 10000, "measurement_mode": "all_trps" },
//!   "densify": { "k_max": 3 }
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::bounds::RefPolicy;
use crate::campaign::{CampaignConfig, CampaignSettings, MeasurementMode};
use crate::channel::NoiseModel;
use crate::estimator::SolveOptions;
use crate::scenario::{make_layout, Deployment, LayoutTag, ScenarioFamily, ScenarioSpec, Trp};

pub const SCHEMA_VERSION: u32 = 1;

/// TRP count of the layouts compared throughout (standard, edge and mixed).
pub const DEFAULT_TRP_COUNT: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message} (at `{path}`)")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("`{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            Self::Parse { path, .. } | Self::Invalid { path, .. } => path,
        }
    }
}

fn bare_message(e: &serde_json::Error) -> String {
    let full = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    full.strip_suffix(&suffix).unwrap_or(&full).to_string()
}

/// Parses JSON into `T`, reporting the field path and line/column of the first error.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: bare_message(&inner),
        }
    })?;
    de.end().map_err(|e| ConfigError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: bare_message(&e),
    })?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Preset { preset: ScenarioFamily },
    Full(ScenarioSpec),
}

impl ScenarioSource {
    pub fn resolve(&self) -> ScenarioSpec {
        match self {
            Self::Preset { preset } => ScenarioSpec::preset(*preset),
            Self::Full(spec) => *spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub layout: LayoutTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trps: Option<usize>,
    /// Explicit TRPs; required for `custom`, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trps: Option<Vec<Trp>>,
}

impl DeploymentSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.layout.as_str().to_string())
    }

    pub fn build(&self, scenario: &ScenarioSpec) -> Result<Deployment, String> {
        match (self.layout, &self.trps) {
            (LayoutTag::Custom, Some(trps)) => Deployment::from_trps(*scenario, trps.clone(), LayoutTag::Custom),
            (LayoutTag::Custom, None) => return Err("custom layouts need a `trps` list".into()),
            (layout, _) => make_layout(scenario, layout, self.n_trps.unwrap_or(DEFAULT_TRP_COUNT)),
        }
        .map_err(|e| e.to_string())
    }
}

fn default_cell_size() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default)]
    pub reference: RefPolicy,
}

impl Default for BoundsBlock {
    fn default() -> Self {
        Self {
            cell_size_m: default_cell_size(),
            reference: RefPolicy::Nearest,
        }
    }
}

fn default_n_drops() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignBlock {
    #[serde(default = "default_n_drops")]
    pub n_drops: usize,
    #[serde(default)]
    pub measurement_mode: MeasurementMode,
    /// Campaign seed; falls back to `noise.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// UE height; falls back to the scenario's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_height_m: Option<f64>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub force_all_los: bool,
}

impl Default for CampaignBlock {
    fn default() -> Self {
        Self {
            n_drops: default_n_drops(),
            measurement_mode: MeasurementMode::AllTrps,
            seed: None,
            ue_height_m: None,
            solver: SolveOptions::default(),
            force_all_los: false,
        }
    }
}

fn default_k_max() -> usize {
    3
}

fn default_k_per_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensifyBlock {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_k_per_step")]
    pub k_per_step: usize,
    /// Label of the deployment to densify; the first one by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployment: Option<String>,
}

impl Default for DensifyBlock {
    fn default() -> Self {
        Self {
            k_max: default_k_max(),
            k_per_step: default_k_per_step(),
            deployment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioSource,
    pub deployments: Vec<DeploymentSpec>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub bounds: BoundsBlock,
    #[serde(default)]
    pub campaign: CampaignBlock,
    #[serde(default)]
    pub densify: DensifyBlock,
}

/// A validated deployment with its output label.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedDeployment {
    pub label: String,
    pub deployment: Deployment,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = parse_json(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Semantic checks beyond the JSON shape.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::invalid(
                "schema_version",
                format!(
                    "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.scenario
            .resolve()
            .validate()
            .map_err(|e| ConfigError::invalid("scenario", e))?;
        if self.deployments.is_empty() {
            return Err(ConfigError::invalid(
                "deployments",
                "at least one deployment is required",
            ));
        }
        self.noise.validate().map_err(|e| ConfigError::invalid("noise", e))?;
        if !(self.bounds.cell_size_m.is_finite() && self.bounds.cell_size_m > 0.0) {
            return Err(ConfigError::invalid("bounds.cell_size_m", "must be positive"));
        }
        if self.campaign.n_drops == 0 {
            return Err(ConfigError::invalid("campaign.n_drops", "must be at least 1"));
        }
        if self.densify.k_per_step == 0 {
            return Err(ConfigError::invalid("densify.k_per_step", "must be at least 1"));
        }
        let named = self.deployments()?;
        if let Some(label) = &self.densify.deployment {
            if !named.iter().any(|d| &d.label == label) {
                return Err(ConfigError::invalid(
                    "densify.deployment",
                    format!("no deployment labelled {label:?}"),
                ));
            }
        }
        let ceiling = self.scenario.resolve().ceiling_height;
        if let Some(h) = self.campaign.ue_height_m {
            if !(h > 0.0 && h < ceiling) {
                return Err(ConfigError::invalid(
                    "campaign.ue_height_m",
                    "must lie strictly inside the hall height",
                ));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> ScenarioSpec {
        self.scenario.resolve()
    }

    pub fn deployments(&self) -> Result<Vec<NamedDeployment>, ConfigError> {
        let scenario = self.scenario();
        let mut out: Vec<NamedDeployment> = Vec::with_capacity(self.deployments.len());
        for (i, spec) in self.deployments.iter().enumerate() {
            let label = spec.label();
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(ConfigError::invalid(
                    format!("deployments[{i}].label"),
                    "labels must be non-empty and use only [A-Za-z0-9._-]",
                ));
            }
            if out.iter().any(|d| d.label == label) {
                return Err(ConfigError::invalid(
                    format!("deployments[{i}].label"),
                    format!("duplicate label {label:?}; set distinct labels"),
                ));
            }
            let deployment = spec
                .build(&scenario)
                .map_err(|e| ConfigError::invalid(format!("deployments[{i}]"), e))?;
            out.push(NamedDeployment { label, deployment });
        }
        Ok(out)
    }

    pub fn seed(&self) -> u64 {
        self.campaign.seed.unwrap_or(self.noise.seed)
    }

    pub fn campaign_settings(&self) -> CampaignSettings {
        CampaignSettings {
            noise: self.noise,
            n_drops: self.campaign.n_drops,
            measurement_mode: self.campaign.measurement_mode,
            seed: self.seed(),
            solver: self.campaign.solver,
        }
    }

    pub fn campaign_config(&self, deployment: Deployment) -> CampaignConfig {
        let mut c = self.campaign_settings().config_for(deployment);
        if let Some(h) = self.campaign.ue_height_m {
            c.ue_height = h;
        }
        c.force_all_los = self.campaign.force_all_los;
        c
    }
}

/// A named scenario + deployment combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedPreset {
    pub name: String,
    pub family: ScenarioFamily,
    pub layout: LayoutTag,
    pub deployment: Deployment,
}

fn preset_name(family: ScenarioFamily, layout: LayoutTag) -> String {
    format!(
        "{}-{}-{DEFAULT_TRP_COUNT}",
        family.as_str().to_ascii_lowercase(),
        layout.as_str()
    )
}

/// Every scenario family with the standard, edge and mixed 12-TRP layouts,
/// e.g. `ioo-standard-12`, `inf-dh-mixed-12`.
pub fn preset_catalog() -> Vec<NamedPreset> {
    let mut out = Vec::new();
    for family in ScenarioFamily::ALL {
        let scenario = ScenarioSpec::preset(family);
        for layout in [LayoutTag::Standard, LayoutTag::Edge, LayoutTag::Mixed] {
            let deployment = make_layout(&scenario, layout, DEFAULT_TRP_COUNT).expect("preset layouts are valid");
            out.push(NamedPreset {
                name: preset_name(family, layout),
                family,
                layout,
                deployment,
            });
        }
    }
    out
}

pub fn named_preset(name: &str) -> Option<NamedPreset> {
    preset_catalog().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "scenario": {"preset": "IOO"},
        "deployments": [{"layout": "standard"}, {"layout": "edge", "n_trps": 12}, {"layout": "mixed"}]
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.bounds.cell_size_m, 1.0);
        assert_eq!(c.campaign.n_drops, 10_000);
        assert_eq!(c.noise.sigma_toa_m, 0.2);
        let named = c.deployments().unwrap();
        let labels: Vec<&str> = named.iter().map(|d| d.label.as_str()).collect();
        assert_eq!(labels, ["standard", "edge", "mixed"]);
        assert!(named.iter().all(|d| d.deployment.len() == 12));
    }

    #[test]
    fn parse_errors_carry_line_and_path() {
        let broken = "{\n  \"schema_version\": 1,\n  \"scenario\": {\"preset\": \"IOO\"},\n  \"deployments\": [{\"layout\": 5}]\n}";
        match RunConfig::parse(broken).unwrap_err() {
            ConfigError::Parse { path, line, .. } => {
                assert_eq!(line, 4);
                assert!(path.starts_with("deployments[0]"), "{path}");
            }
            e => panic!("unexpected {e:?}"),
        }
        let truncated = "{\n  \"schema_version\": 1,\n";
        assert!(matches!(
            RunConfig::parse(truncated),
            Err(ConfigError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let few = r#"{"schema_version":1,"scenario":{"preset":"IOO"},"deployments":[{"layout":"edge","n_trps":3}]}"#;
        let e = RunConfig::parse(few).unwrap_err();
        assert_eq!(e.path(), "deployments[0]");
        assert!(e.to_string().contains("at least 4"));
        let dup =
            r#"{"schema_version":1,"scenario":{"preset":"IOO"},"deployments":[{"layout":"edge"},{"layout":"edge"}]}"#;
        assert_eq!(RunConfig::parse(dup).unwrap_err().path(), "deployments[1].label");
        let ver = r#"{"schema_version":2,"scenario":{"preset":"IOO"},"deployments":[{"layout":"edge"}]}"#;
        assert_eq!(RunConfig::parse(ver).unwrap_err().path(), "schema_version");
    }

    #[test]
    fn full_scenario_and_custom_trps() {
        let text = r#"{"schema_version":1,
            "scenario":{"family":"IOO","x_len":40,"y_len":20,"ceiling_height":3,"trp_mount_height":3,
                        "ue_height":1.5,"clutter_density":0,"clutter_size":0,"clutter_height":0},
            "deployments":[{"layout":"custom","label":"box","trps":[
                {"id":0,"x":0,"y":0,"z":3},{"id":1,"x":40,"y":0,"z":3},
                {"id":2,"x":40,"y":20,"z":3},{"id":3,"x":0,"y":20,"z":3}]}]}"#;
        let c = RunConfig::parse(text).unwrap();
        let d = &c.deployments().unwrap()[0];
        assert_eq!(d.label, "box");
        assert_eq!(d.deployment.scenario().x_len, 40.0);
    }

    #[test]
    fn catalog_covers_every_family_and_layout() {
        let cat = preset_catalog();
        assert_eq!(cat.len(), 9);
        assert!(cat.iter().all(|p| p.deployment.len() == 12));
        assert!(named_preset("ioo-standard-12").is_some());
        assert!(named_preset("inf-dh-mixed-12").is_some());
        assert!(named_preset("nope").is_none());
    }
}
