//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line; the
//! target fails if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use trpplan::bounds::{bound_grid, crlb_rmse_2d, fim, gdop_2d, tdoa_jacobian};
use trpplan::campaign::{densification_loop, densification_sweep, run_campaign, CampaignSettings};
use trpplan::channel::{form_tdoa, synthesize_toas, tdoa_covariance};
use trpplan::estimator::{initial_guess, solve_tdoa};
use trpplan::rng::{stream, Purpose};
use trpplan::scenario::make_layout;
use trpplan::{
    CampaignConfig, CampaignResult, Deployment, LayoutTag, MeasurementMode, NoiseModel, Point3, RefPolicy,
    ScenarioFamily, ScenarioSpec, SolveOptions, UeDrop,
};

const LAYOUTS: [LayoutTag; 3] = [LayoutTag::Standard, LayoutTag::Edge, LayoutTag::Mixed];
const N_DROPS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn campaign(family: ScenarioFamily, layout: LayoutTag) -> CampaignResult {
    let d = make_layout(&ScenarioSpec::preset(family), layout, 12).unwrap();
    let noise = NoiseModel::default();
    run_campaign(&CampaignConfig::new(d, noise, N_DROPS, noise.seed)).unwrap()
}

fn p90(r: &CampaignResult) -> f64 {
    r.summary
        .percentiles
        .expect("all-TRP campaigns are always available")
        .p90
}

fn random_probe(rng: &mut ChaCha8Rng) -> (Deployment, Point3) {
    let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
    loop {
        let n = rng.random_range(4..=16);
        let trps: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.0..s.x_len),
                    rng.random_range(0.0..s.y_len),
                    rng.random_range(0.2..s.ceiling_height),
                )
            })
            .collect();
        let ue = Point3::new(
            rng.random_range(0.0..s.x_len),
            rng.random_range(0.0..s.y_len),
            rng.random_range(0.5..2.5),
        );
        if trps.iter().any(|p| (p - ue).norm() < 1.0) {
            continue;
        }
        if let Ok(d) = Deployment::new(s, trps, LayoutTag::Custom) {
            return (d, ue);
        }
    }
}

fn sigma_gdop_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut evaluated) = (0.0f64, 0);
    for _ in 0..1000 {
        let (d, ue) = random_probe(&mut rng);
        let sigma = rng.random_range(0.01..5.0);
        let r = rng.random_range(0..d.len());
        let bound = crlb_rmse_2d(&fim(&ue, &d, r, &tdoa_covariance(d.len() - 1, sigma)).unwrap());
        if let (Some(g), Some(b)) = (gdop_2d(&ue, &d, r).unwrap(), bound) {
            worst = worst.max((sigma * g - b).abs() / b);
            evaluated += 1;
        }
    }
    Outcome {
        pass: worst < 1e-9 && evaluated == 1000,
        detail: format!(
            "max |σ·gdop_2d - crlb_rmse_2d| / crlb_rmse_2d = {worst:.2e} (< 1e-9) over {evaluated}/1000 probes"
        ),
    }
}

fn jacobian_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (d, ue) = random_probe(&mut rng);
        let r = rng.random_range(0..d.len());
        let h = tdoa_jacobian(&ue, &d, r).unwrap();
        let model = |p: &Point3| -> Vec<f64> {
            let base = (p - d.position(r)).norm();
            (0..d.len())
                .filter(|&j| j != r)
                .map(|j| (p - d.position(j)).norm() - base)
                .collect()
        };
        let step = 1e-5;
        for axis in 0..3 {
            let (mut hi, mut lo) = (ue, ue);
            hi[axis] += step;
            lo[axis] -= step;
            let (a, b) = (model(&hi), model(&lo));
            for row in 0..h.nrows() {
                worst = worst.max(((a[row] - b[row]) / (2.0 * step) - h[(row, axis)]).abs());
            }
        }
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("max |finite difference - analytic| = {worst:.2e} (< 1e-6) over 1000 probes"),
    }
}

fn bound_map_contrast() -> Outcome {
    let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
    let noise = NoiseModel {
        sigma_toa_m: 0.2,
        ..NoiseModel::default()
    };
    let ratio = |layout| {
        let d = make_layout(&s, layout, 12).unwrap();
        let g = bound_grid(&s, &d, RefPolicy::Nearest, 1.0, &noise).unwrap();
        let (lo, hi) = g.range_of(|c| c.crlb_rmse_2d).unwrap();
        (lo, hi, hi / lo)
    };
    let (s_lo, s_hi, rs) = ratio(LayoutTag::Standard);
    let (e_lo, e_hi, re) = ratio(LayoutTag::Edge);
    Outcome {
        pass: rs > 2.0 * re,
        detail: format!(
            "standard {s_lo:.3}-{s_hi:.3} m (ratio {rs:.2}) vs edge {e_lo:.3}-{e_hi:.3} m (ratio {re:.2}); need ratio_standard > 2 x ratio_edge"
        ),
    }
}

fn cdf_ordering() -> Outcome {
    let [st, ed, mx] = LAYOUTS.map(|l| p90(&campaign(ScenarioFamily::Ioo, l)));
    Outcome {
        pass: ed < mx * 1.15 && ed < st && st / ed >= 1.5,
        detail: format!(
            "IOO p90 standard {st:.3} / edge {ed:.3} / mixed {mx:.3} m; need edge < 1.15 x mixed, edge < standard, standard/edge = {:.2} >= 1.5",
            st / ed
        ),
    }
}

fn scenario_contrast() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for layout in LAYOUTS {
        let sh = p90(&campaign(ScenarioFamily::InfSh, layout));
        let dh = p90(&campaign(ScenarioFamily::InfDh, layout));
        pass &= dh >= 5.0 * sh;
        parts.push(format!("{} DH {dh:.2} / SH {sh:.2} = {:.2}x", layout.as_str(), dh / sh));
    }
    Outcome {
        pass,
        detail: format!("{}; need >= 5x for every layout", parts.join(", ")),
    }
}

fn los_availability() -> Outcome {
    let frac = |r: &CampaignResult, keep: fn(usize) -> bool| {
        r.drops.iter().filter(|d| keep(d.n_los_links)).count() as f64 / r.drops.len() as f64
    };
    let st = campaign(ScenarioFamily::Ioo, LayoutTag::Standard);
    let ed = campaign(ScenarioFamily::Ioo, LayoutTag::Edge);
    let (f_st, f_ed) = (frac(&st, |n| n >= 4), frac(&ed, |n| n >= 4));
    let (m_st, m_ed) = (st.summary.mean_los_links, ed.summary.mean_los_links);
    let zero: Vec<f64> = LAYOUTS
        .map(|l| frac(&campaign(ScenarioFamily::InfDh, l), |n| n == 0))
        .to_vec();
    let checks = [
        (
            f_st > 0.95 && f_ed > 0.95,
            format!("IOO >=4 LOS: standard {f_st:.3}, edge {f_ed:.3} (> 0.95)"),
        ),
        (
            m_ed > m_st,
            format!("IOO mean LOS links: edge {m_ed:.2} vs standard {m_st:.2} (need edge > standard)"),
        ),
        (
            zero.iter().all(|&z| z > 0.3),
            format!(
                "InF-DH 0-LOS fraction std/edge/mixed {:.3}/{:.3}/{:.3} (> 0.3)",
                zero[0], zero[1], zero[2]
            ),
        ),
    ];
    Outcome {
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|(ok, text)| format!("{}{text}", if *ok { "" } else { "[fails] " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn estimator_efficiency() -> Outcome {
    let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
    let d = make_layout(&s, LayoutTag::Standard, 12).unwrap();
    let noise = NoiseModel {
        sigma_toa_m: 0.2,
        ..NoiseModel::default()
    };
    let truth = s.center();
    let r = d.nearest_trp(&truth);
    let ue = UeDrop {
        position: truth,
        los_flags: vec![true; d.len()],
    };
    let mut sq = 0.0;
    for t in 0..1000u64 {
        let toas = synthesize_toas(&d, &ue, &noise, &mut stream(noise.seed, t, Purpose::Toa));
        let ms = form_tdoa(&toas, r, &noise).unwrap();
        let fix = solve_tdoa(&ms, &d, &initial_guess(&ms, &d).unwrap(), &SolveOptions::default()).unwrap();
        let e = fix.estimate - truth;
        sq += e.x * e.x + e.y * e.y;
    }
    let rmse = (sq / 1000.0).sqrt();
    let bound = crlb_rmse_2d(&fim(&truth, &d, r, &tdoa_covariance(d.len() - 1, 0.2)).unwrap()).unwrap();
    let ratio = rmse / bound;
    Outcome {
        pass: (0.95..=1.3).contains(&ratio),
        detail: format!(
            "IOO standard at ({}, {}): RMSE {rmse:.4} m / CRLB {bound:.4} m = {ratio:.3} (in [0.95, 1.3])",
            truth.x, truth.y
        ),
    }
}

fn settings() -> CampaignSettings {
    let noise = NoiseModel::default();
    CampaignSettings {
        noise,
        n_drops: N_DROPS,
        measurement_mode: MeasurementMode::AllTrps,
        seed: noise.seed,
        solver: SolveOptions::default(),
    }
}

fn densification_monotone() -> Outcome {
    let base = make_layout(&ScenarioSpec::preset(ScenarioFamily::InfDh), LayoutTag::Mixed, 12).unwrap();
    let steps = densification_loop(&settings().config_for(base), 3, 1).unwrap();
    let p: Vec<f64> = steps.iter().map(|s| s.percentiles.unwrap().p90).collect();
    let monotone = p.windows(2).all(|w| w[1] <= w[0] * 1.05);
    let gain = 1.0 - p[3] / p[0];
    Outcome {
        pass: monotone && gain >= 0.05,
        detail: format!(
            "InF-DH mixed p90 {} m; each step <= 1.05 x previous, cumulative gain {:.1}% (>= 5%)",
            p.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" -> "),
            gain * 100.0
        ),
    }
}

fn sweep_saturation() -> Outcome {
    let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
    let rows = densification_sweep(&s, LayoutTag::Standard, &[12, 24, 36, 48], &settings()).unwrap();
    let p: Vec<f64> = rows.iter().map(|r| r.percentiles.unwrap().p90).collect();
    let (early, late) = (p[0] - p[1], p[2] - p[3]);
    Outcome {
        pass: late < early,
        detail: format!(
            "IOO standard p90 12/24/36/48 TRPs = {:.3}/{:.3}/{:.3}/{:.3} m; gain 36->48 {late:.3} < gain 12->24 {early:.3}",
            p[0], p[1], p[2], p[3]
        ),
    }
}

/// Output files of one run, with the manifest's wall-clock field removed.
fn run_outputs(args: &[&str], out: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_trpplan"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(out).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).map_err(|e| e.to_string())?;
        if name == "manifest.json" {
            let mut m: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            m.as_object_mut().unwrap().remove("duration_s");
            bytes = m.to_string().into_bytes();
        }
        files.push((name, bytes));
    }
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let ioo = tmp.path().join("ioo.json");
    let dh = tmp.path().join("dh.json");
    fs::write(
        &ioo,
        r#"{"schema_version": 1, "scenario": {"preset": "IOO"},
            "deployments": [{"layout": "standard"}, {"layout": "edge"}, {"layout": "mixed"}],
            "bounds": {"cell_size_m": 2.0}, "campaign": {"n_drops": 2000, "seed": 5}}"#,
    )
    .unwrap();
    fs::write(
        &dh,
        r#"{"schema_version": 1, "scenario": {"preset": "InF-DH"}, "deployments": [{"layout": "mixed"}],
            "campaign": {"n_drops": 2000, "seed": 5}, "densify": {"k_max": 2}}"#,
    )
    .unwrap();
    let (ioo, dh) = (ioo.to_str().unwrap(), dh.to_str().unwrap());
    let commands: [(&str, Vec<&str>); 3] = [
        ("bounds", vec!["bounds", "--config", ioo]),
        ("campaign", vec!["campaign", "--config", ioo]),
        ("densify", vec!["densify", "--config", dh]),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, args) in commands {
        let mut runs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = tmp.path().join(format!("{name}-{threads}-{}", runs.len()));
            let mut a = args.clone();
            a.extend(["--threads", threads]);
            runs.push(run_outputs(&a, &out));
        }
        match (&runs[0], &runs[1], &runs[2]) {
            (Ok(a), Ok(b), Ok(c)) => {
                let same = a == b && b == c;
                pass &= same;
                parts.push(format!(
                    "{name}: {} files {}",
                    a.len(),
                    if same { "identical" } else { "DIFFER" }
                ));
            }
            _ => {
                pass = false;
                let err = runs.iter().find_map(|r| r.as_ref().err()).unwrap();
                parts.push(format!("{name}: run failed: {}", err.trim()));
            }
        }
    }
    Outcome {
        pass,
        detail: format!("threads 1 vs 4 vs 4: {}", parts.join(", ")),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "sigma-GDOP identity", Duration::from_secs(10), sigma_gdop_identity),
        (2, "Jacobian correctness", Duration::from_secs(10), jacobian_fd),
        (3, "bound-map contrast", Duration::from_secs(30), bound_map_contrast),
        (4, "CDF ordering", Duration::from_secs(120), cdf_ordering),
        (5, "scenario contrast", Duration::from_secs(300), scenario_contrast),
        (6, "LOS availability", Duration::from_secs(60), los_availability),
        (7, "estimator efficiency", Duration::from_secs(30), estimator_efficiency),
        (
            8,
            "densification monotonicity",
            Duration::from_secs(300),
            densification_monotone,
        ),
        (
            9,
            "densification sweep saturation",
            Duration::from_secs(300),
            sweep_saturation,
        ),
        (10, "CLI determinism", Duration::from_secs(600), cli_determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = outcome.pass && in_time;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
