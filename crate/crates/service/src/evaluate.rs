//! Request/response types for `POST /api/evaluate` and the synchronous
//! evaluation behind it.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use trpplan::bounds::{bound_grid, RefPolicy};
use trpplan::campaign::{los_histogram, propose_trps, run_campaign, worst_ue_locations, WORST_FRACTION};
use trpplan::config::{named_preset, parse_json, CampaignBlock, ConfigError, ScenarioSource};
use trpplan::export::grid_json;
use trpplan::scenario::{Deployment, LayoutTag, Trp};
use trpplan::{NoiseModel, Point3};

/// Largest grid evaluated synchronously, per axis.
pub const MAX_GRID_CELLS_PER_AXIS: usize = 200;
pub const MAX_DROPS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Bounds,
    Campaign,
}

fn default_cell_size() -> f64 {
    1.0
}

fn default_suggest_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    /// Catalog name such as `ioo-edge-12`; supplies the scenario and TRPs
    /// unless they are given explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trps: Option<Vec<Trp>>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default)]
    pub reference: RefPolicy,
    pub mode: EvalMode,
    #[serde(default)]
    pub campaign: CampaignBlock,
    /// Number of densification points suggested in campaign mode.
    #[serde(default = "default_suggest_k")]
    pub suggest_k: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Schema(ConfigError),
    #[error("`{path}`: {message}")]
    Semantic { path: String, message: String },
    #[error("`{path}`: {message}")]
    OverBudget { path: String, message: String },
    #[error("evaluation failed: {0}")]
    Internal(String),
}

impl EvalError {
    fn semantic(path: &str, message: impl ToString) -> Self {
        Self::Semantic {
            path: path.into(),
            message: message.to_string(),
        }
    }

    fn over_budget(path: &str, message: impl ToString) -> Self {
        Self::OverBudget {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Schema(_) => "schema",
            Self::Semantic { .. } => "semantic",
            Self::OverBudget { .. } => "over_budget",
            Self::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> Value {
        let mut e = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            Self::Schema(ConfigError::Parse { path, line, column, .. }) => {
                e["path"] = json!(path);
                e["line"] = json!(line);
                e["column"] = json!(column);
            }
            Self::Schema(ConfigError::Invalid { path, .. })
            | Self::Semantic { path, .. }
            | Self::OverBudget { path, .. } => e["path"] = json!(path),
            Self::Internal(_) => {}
        }
        json!({ "error": e })
    }
}

pub fn parse_request(body: &str) -> Result<EvaluateRequest, EvalError> {
    parse_json(body).map_err(EvalError::Schema)
}

fn resolve_deployment(req: &EvaluateRequest) -> Result<Deployment, EvalError> {
    let preset = match &req.preset {
        Some(name) => {
            Some(named_preset(name).ok_or_else(|| EvalError::semantic("preset", format!("unknown preset {name:?}")))?)
        }
        None => None,
    };
    let scenario = match (&req.scenario, &preset) {
        (Some(s), _) => s.resolve(),
        (None, Some(p)) => *p.deployment.scenario(),
        (None, None) => return Err(EvalError::semantic("scenario", "give a preset or a scenario")),
    };
    scenario.validate().map_err(|e| EvalError::semantic("scenario", e))?;
    match (&req.trps, preset) {
        (Some(trps), _) => {
            Deployment::from_trps(scenario, trps.clone(), LayoutTag::Custom).map_err(|e| EvalError::semantic("trps", e))
        }
        (None, Some(p)) if req.scenario.is_none() => Ok(p.deployment),
        (None, Some(p)) => Deployment::from_trps(scenario, p.deployment.trps().to_vec(), p.layout)
            .map_err(|e| EvalError::semantic("trps", e)),
        (None, None) => Err(EvalError::semantic("trps", "give a preset or a TRP list")),
    }
}

fn points(ps: &[Point3]) -> Value {
    Value::Array(ps.iter().map(|p| json!([p.x, p.y, p.z])).collect())
}

/// Evaluates a request. The body depends only on the request.
pub fn evaluate(req: &EvaluateRequest) -> Result<Value, EvalError> {
    let deployment = resolve_deployment(req)?;
    req.noise.validate().map_err(|e| EvalError::semantic("noise", e))?;
    let scenario = *deployment.scenario();
    match req.mode {
        EvalMode::Bounds => {
            let cell = req.cell_size_m;
            if !(cell.is_finite() && cell > 0.0) {
                return Err(EvalError::semantic("cell_size_m", "must be positive"));
            }
            let nx = (scenario.x_len / cell).ceil();
            let ny = (scenario.y_len / cell).ceil();
            let cap = MAX_GRID_CELLS_PER_AXIS as f64;
            if nx > cap || ny > cap {
                return Err(EvalError::over_budget(
                    "cell_size_m",
                    format!("grid of {nx}x{ny} cells exceeds {MAX_GRID_CELLS_PER_AXIS}x{MAX_GRID_CELLS_PER_AXIS}"),
                ));
            }
            if let RefPolicy::Fixed(id) = req.reference {
                if id >= deployment.len() {
                    return Err(EvalError::semantic("reference", format!("no TRP with id {id}")));
                }
            }
            let grid = bound_grid(&scenario, &deployment, req.reference, cell, &req.noise)
                .map_err(|e| EvalError::Internal(e.to_string()))?;
            Ok(json!({
                "mode": "bounds",
                "n_trps": deployment.len(),
                "grid": grid_json(&grid),
            }))
        }
        EvalMode::Campaign => {
            let c = &req.campaign;
            if c.n_drops == 0 {
                return Err(EvalError::semantic("campaign.n_drops", "must be at least 1"));
            }
            if c.n_drops > MAX_DROPS {
                return Err(EvalError::over_budget(
                    "campaign.n_drops",
                    format!("{} drops exceeds the limit of {MAX_DROPS}", c.n_drops),
                ));
            }
            let seed = c.seed.unwrap_or(req.noise.seed);
            let mut config = trpplan::CampaignConfig::new(deployment, req.noise, c.n_drops, seed);
            config.measurement_mode = c.measurement_mode;
            config.solver = c.solver;
            config.force_all_los = c.force_all_los;
            if let Some(h) = c.ue_height_m {
                config.ue_height = h;
            }
            let result = run_campaign(&config).map_err(|e| EvalError::semantic("campaign", e))?;
            let worst = worst_ue_locations(&result, WORST_FRACTION).unwrap_or_default();
            let suggested = if req.suggest_k > 0 && !worst.is_empty() {
                propose_trps(&config, &result, req.suggest_k).map_err(|e| EvalError::Internal(e.to_string()))?
            } else {
                Vec::new()
            };
            let s = &result.summary;
            Ok(json!({
                "mode": "campaign",
                "n_trps": result.n_trps,
                "n_drops": c.n_drops,
                "seed": seed,
                "measurement_mode": c.measurement_mode.as_str(),
                "percentiles": s.percentiles,
                "availability_fraction": s.availability_fraction,
                "converged_fraction": s.converged_fraction,
                "mean_los_links": s.mean_los_links,
                "cdf": s.cdf,
                "los_histogram": los_histogram(&result),
                "worst_ues": points(&worst),
                "suggested_trps": points(&suggested),
            }))
        }
    }
}
