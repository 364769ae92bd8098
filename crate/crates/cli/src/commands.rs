use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use trpplan::bounds::bound_grid;
use trpplan::campaign::{densification_loop, run_campaign};
use trpplan::config::RunConfig;
use trpplan::export::{cdf_csv, drops_csv, grid_csv, grid_json, los_histogram_csv, percentile_table_csv, points_csv};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    sha256: String,
}

/// Written last as `manifest.json`. Only `duration_s` varies between reruns.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_digest: String,
    seed: u64,
    tool_version: &'static str,
    outputs: Vec<OutputFile>,
    duration_s: f64,
}

struct Run {
    command: &'static str,
    digest: String,
    out: PathBuf,
    outputs: Vec<OutputFile>,
    start: Instant,
}

impl Run {
    fn start(command: &'static str, config: &Path, out: &Path) -> Result<(Self, RunConfig), CliError> {
        let start = Instant::now();
        let bytes = fs::read(config).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|e| CliError::Config(format!("{}: not UTF-8: {e}", config.display())))?;
        let cfg = RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
        fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
        let run = Run {
            command,
            digest: format!("sha256:{}", sha256_hex(&bytes)),
            out: out.to_path_buf(),
            outputs: Vec::new(),
            start,
        };
        Ok((run, cfg))
    }

    fn write(&mut self, name: String, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(&name);
        fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        self.outputs.push(OutputFile {
            file: name,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    fn finish(self, seed: u64) -> Result<(), CliError> {
        let n = self.outputs.len();
        let manifest = RunManifest {
            command: self.command,
            config_digest: self.digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs,
            duration_s: (self.start.elapsed().as_secs_f64() * 1e3).round() / 1e3,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n";
        let path = self.out.join("manifest.json");
        fs::write(&path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        println!(
            "{}: wrote {n} files and manifest.json to {}",
            self.command,
            self.out.display()
        );
        Ok(())
    }
}

fn pretty(v: &impl Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v).map_err(runtime)? + "\n")
}

pub fn bounds(config: &Path, out: &Path, cells: Option<f64>) -> Result<(), CliError> {
    let (mut run, mut cfg) = Run::start("bounds", config, out)?;
    if let Some(c) = cells {
        if !(c.is_finite() && c > 0.0) {
            return Err(CliError::Config(format!("--cells must be positive, got {c}")));
        }
        cfg.bounds.cell_size_m = c;
    }
    let scenario = cfg.scenario();
    for named in cfg.deployments().map_err(|e| CliError::Config(e.to_string()))? {
        let grid = bound_grid(
            &scenario,
            &named.deployment,
            cfg.bounds.reference,
            cfg.bounds.cell_size_m,
            &cfg.noise,
        )
        .map_err(|e| CliError::Config(format!("deployments `{}`: {e}", named.label)))?;
        run.write(format!("{}_bounds.csv", named.label), &grid_csv(&grid))?;
        run.write(format!("{}_bounds.json", named.label), &pretty(&grid_json(&grid))?)?;
    }
    let seed = cfg.seed();
    run.finish(seed)
}

pub fn campaign(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let (mut run, mut cfg) = Run::start("campaign", config, out)?;
    if seed.is_some() {
        cfg.campaign.seed = seed;
    }
    let mut rows = Vec::new();
    for named in cfg.deployments().map_err(|e| CliError::Config(e.to_string()))? {
        let result = run_campaign(&cfg.campaign_config(named.deployment)).map_err(runtime)?;
        let label = named.label;
        run.write(format!("{label}_drops.csv"), &drops_csv(&result))?;
        run.write(format!("{label}_cdf.csv"), &cdf_csv(&result))?;
        run.write(format!("{label}_los_histogram.csv"), &los_histogram_csv(&result))?;
        rows.push((label, result.summary.percentiles));
    }
    run.write(
        "percentiles.csv".into(),
        &percentile_table_csv(rows.iter().map(|(l, p)| (l.as_str(), *p))),
    )?;
    let seed = cfg.seed();
    run.finish(seed)
}

pub fn densify(config: &Path, out: &Path, seed: Option<u64>, k_max: Option<usize>) -> Result<(), CliError> {
    let (mut run, mut cfg) = Run::start("densify", config, out)?;
    if seed.is_some() {
        cfg.campaign.seed = seed;
    }
    let k_max = k_max.unwrap_or(cfg.densify.k_max);
    let named = cfg.deployments().map_err(|e| CliError::Config(e.to_string()))?;
    let base = match &cfg.densify.deployment {
        Some(label) => named.into_iter().find(|d| &d.label == label),
        None => named.into_iter().next(),
    }
    .expect("checked at parse time");
    let steps =
        densification_loop(&cfg.campaign_config(base.deployment), k_max, cfg.densify.k_per_step).map_err(runtime)?;
    let labels: Vec<String> = steps.iter().map(|s| format!("step_{}", s.step)).collect();
    for (s, label) in steps.iter().zip(&labels) {
        run.write(
            format!("densify_{label}_deployment.json"),
            &(s.deployment.to_json() + "\n"),
        )?;
        run.write(format!("densify_{label}_worst_ues.csv"), &points_csv(&s.worst_ues))?;
    }
    run.write(
        "densify_percentiles.csv".into(),
        &percentile_table_csv(labels.iter().zip(&steps).map(|(l, s)| (l.as_str(), s.percentiles))),
    )?;
    let seed = cfg.seed();
    run.finish(seed)
}

pub fn serve(bind: SocketAddr, static_dir: Option<PathBuf>, threads: usize) -> Result<(), CliError> {
    let state = trpplan_service::AppState::new(threads).map_err(runtime)?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    eprintln!("serving on http://{bind}");
    rt.block_on(trpplan_service::serve(bind, state, static_dir))
        .map_err(|e| runtime(format!("{bind}: {e}")))
}
