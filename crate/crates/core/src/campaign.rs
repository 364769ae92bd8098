//! Monte Carlo positioning campaigns.
//!
//! Each drop places a UE uniformly in the hall, draws LOS states, synthesizes
//! TOAs, forms DL-TDOA measurements (optionally LOS-only), solves for the
//! position and records the horizontal error. Drops use independent random
//! streams keyed by `(seed, drop index)` and run in parallel; results do not
//! depend on the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    choose_reference, filter_los_only, form_tdoa, sample_los_states, synthesize_toas, ChannelError, NoiseModel, UeDrop,
};
use crate::estimator::{initial_guess_with, solve_tdoa, SolveOptions};
use crate::rng::{stream, Purpose};
use crate::scenario::{densify, make_layout, Deployment, LayoutTag, ScenarioError, ScenarioSpec};
use crate::Point3;

/// Lattice spacing of the grid-search initializer.
pub const INIT_LATTICE_M: f64 = 5.0;
/// Fraction of worst drops targeted by densification.
pub const WORST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CampaignError {
    #[error("n_drops must be at least 1")]
    NoDrops,
    #[error("the error CDF is empty (no available fixes)")]
    EmptyCdf,
    #[error("quantile {0} outside [0, 1]")]
    BadQuantile(f64),
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("densification needs k >= 1")]
    ZeroK,
    #[error("sweep counts must be non-empty and strictly ascending")]
    BadCounts,
    #[error("ue_height {0} must lie strictly inside the hall height")]
    BadUeHeight(f64),
    #[error(transparent)]
    Noise(#[from] ChannelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    #[default]
    AllTrps,
    LosOnly,
}

impl MeasurementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AllTrps => "all_trps",
            Self::LosOnly => "los_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub deployment: Deployment,
    pub noise: NoiseModel,
    pub n_drops: usize,
    pub ue_height: f64,
    pub measurement_mode: MeasurementMode,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolveOptions,
    /// Forces every link to LOS (noise-only test campaigns).
    #[serde(default)]
    pub force_all_los: bool,
}

impl CampaignConfig {
    /// Defaults: scenario UE height, all-TRP measurements, default solver.
    pub fn new(deployment: Deployment, noise: NoiseModel, n_drops: usize, seed: u64) -> Self {
        let ue_height = deployment.scenario().ue_height;
        Self {
            deployment,
            noise,
            n_drops,
            ue_height,
            measurement_mode: MeasurementMode::AllTrps,
            seed,
            solver: SolveOptions::default(),
            force_all_los: false,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.n_drops == 0 {
            return Err(CampaignError::NoDrops);
        }
        self.noise.validate()?;
        let ceiling = self.deployment.scenario().ceiling_height;
        if !(self.ue_height > 0.0 && self.ue_height < ceiling) {
            return Err(CampaignError::BadUeHeight(self.ue_height));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub index: usize,
    pub true_position: Point3,
    pub estimate: Option<Point3>,
    pub horizontal_error: Option<f64>,
    pub n_los_links: usize,
    pub available: bool,
    pub converged: bool,
}

/// Interpolated 80/90/95 % quantiles of the horizontal error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub p80: f64,
    pub p90: f64,
    pub p95: f64,
}

impl PercentileRow {
    pub fn from_sorted(sorted: &[f64]) -> Result<Self, CampaignError> {
        Ok(Self {
            p80: percentile_sorted(sorted, 0.80)?,
            p90: percentile_sorted(sorted, 0.90)?,
            p95: percentile_sorted(sorted, 0.95)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    /// Horizontal errors of available drops, ascending.
    pub cdf: Vec<f64>,
    pub percentiles: Option<PercentileRow>,
    pub availability_fraction: f64,
    pub converged_fraction: f64,
    pub mean_los_links: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub n_trps: usize,
    pub drops: Vec<DropRecord>,
    pub summary: CampaignSummary,
}

fn run_drop(config: &CampaignConfig, index: usize) -> DropRecord {
    let deployment = &config.deployment;
    let scenario = deployment.scenario();
    let i = index as u64;

    let mut pos_rng = stream(config.seed, i, Purpose::UePosition);
    let position = Point3::new(
        pos_rng.random_range(0.0..scenario.x_len),
        pos_rng.random_range(0.0..scenario.y_len),
        config.ue_height,
    );
    let los_flags = if config.force_all_los {
        vec![true; deployment.len()]
    } else {
        sample_los_states(deployment, &position, &mut stream(config.seed, i, Purpose::LosState))
    };
    let ue = UeDrop { position, los_flags };
    let n_los_links = ue.n_los();
    let unavailable = DropRecord {
        index,
        true_position: position,
        estimate: None,
        horizontal_error: None,
        n_los_links,
        available: false,
        converged: false,
    };

    let toas = synthesize_toas(
        deployment,
        &ue,
        &config.noise,
        &mut stream(config.seed, i, Purpose::Toa),
    );
    let Ok(all) = form_tdoa(&toas, choose_reference(deployment, &ue), &config.noise) else {
        return unavailable;
    };
    let measurements = match config.measurement_mode {
        MeasurementMode::AllTrps => all,
        MeasurementMode::LosOnly => match filter_los_only(&all, &ue, deployment) {
            Ok(m) => m,
            Err(_) => return unavailable,
        },
    };
    let fix = initial_guess_with(&measurements, deployment, INIT_LATTICE_M, config.ue_height)
        .and_then(|init| solve_tdoa(&measurements, deployment, &init, &config.solver));
    match fix {
        Ok(fix) => {
            let e = fix.estimate;
            DropRecord {
                estimate: Some(e),
                horizontal_error: Some((e.x - position.x).hypot(e.y - position.y)),
                available: true,
                converged: fix.converged,
                ..unavailable
            }
        }
        Err(_) => unavailable,
    }
}

fn summarize(drops: &[DropRecord]) -> CampaignSummary {
    let mut cdf: Vec<f64> = drops.iter().filter_map(|d| d.horizontal_error).collect();
    cdf.sort_by(f64::total_cmp);
    let n = drops.len().max(1) as f64;
    let available = drops.iter().filter(|d| d.available).count();
    let converged = drops.iter().filter(|d| d.converged).count();
    let los: usize = drops.iter().map(|d| d.n_los_links).sum();
    CampaignSummary {
        percentiles: PercentileRow::from_sorted(&cdf).ok(),
        cdf,
        availability_fraction: available as f64 / n,
        converged_fraction: converged as f64 / n,
        mean_los_links: los as f64 / n,
    }
}

pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    config.validate()?;
    let drops: Vec<DropRecord> = (0..config.n_drops)
        .into_par_iter()
        .map(|i| run_drop(config, i))
        .collect();
    Ok(CampaignResult {
        n_trps: config.deployment.len(),
        summary: summarize(&drops),
        drops,
    })
}

/// Empirical quantile of an ascending list, interpolating linearly between
/// order statistics at 1-based rank `q (n - 1) + 1`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64, CampaignError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CampaignError::BadQuantile(q));
    }
    let n = sorted.len();
    if n == 0 {
        return Err(CampaignError::EmptyCdf);
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn percentile(result: &CampaignResult, q: f64) -> Result<f64, CampaignError> {
    percentile_sorted(&result.summary.cdf, q)
}

/// Number of drops per LOS-link count; index `k` holds the drops with `k`
/// LOS links, for `k` in `0..=N`.
pub fn los_histogram(result: &CampaignResult) -> Vec<usize> {
    let mut bins = vec![0; result.n_trps + 1];
    for d in &result.drops {
        bins[d.n_los_links.min(result.n_trps)] += 1;
    }
    bins
}

/// True positions of the worst `ceil(fraction * n)` available drops by
/// horizontal error, worst first (ties: lower drop index first).
pub fn worst_ue_locations(result: &CampaignResult, fraction: f64) -> Result<Vec<Point3>, CampaignError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CampaignError::BadFraction(fraction));
    }
    let mut ranked: Vec<(f64, usize, Point3)> = result
        .drops
        .iter()
        .filter_map(|d| d.horizontal_error.map(|e| (e, d.index, d.true_position)))
        .collect();
    if ranked.is_empty() {
        return Err(CampaignError::EmptyCdf);
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let take = ((fraction * ranked.len() as f64).ceil() as usize).min(ranked.len());
    Ok(ranked.into_iter().take(take).map(|(_, _, p)| p).collect())
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// k-medoids on 2D points: k-medoids++ seeding from `rng`, then alternating
/// nearest-medoid assignment and per-cluster medoid update until stable.
/// Returns medoid indices into `points`. `k` is capped at the number of
/// distinct points.
pub fn k_medoids<R: Rng + ?Sized>(points: &[[f64; 2]], k: usize, rng: &mut R) -> Vec<usize> {
    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !distinct.iter().any(|&j| points[j] == *p) {
            distinct.push(i);
        }
    }
    let k = k.min(distinct.len());
    if k == 0 {
        return Vec::new();
    }

    let mut medoids = vec![distinct[rng.random_range(0..distinct.len())]];
    while medoids.len() < k {
        let weights: Vec<f64> = distinct
            .iter()
            .map(|&i| {
                medoids
                    .iter()
                    .map(|&m| dist2(&points[i], &points[m]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = *distinct.last().expect("non-empty");
        for (&i, &w) in distinct.iter().zip(&weights) {
            if w > 0.0 && target < w {
                chosen = i;
                break;
            }
            target -= w;
        }
        if medoids.contains(&chosen) {
            // Numerical corner case: pick the farthest remaining point.
            chosen = distinct
                .iter()
                .zip(&weights)
                .filter(|(i, _)| !medoids.contains(i))
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(&i, _)| i)
                .expect("k <= distinct points");
        }
        medoids.push(chosen);
    }

    for _ in 0..100 {
        let assign: Vec<usize> = points
            .iter()
            .map(|p| {
                (0..k)
                    .min_by(|&a, &b| dist2(p, &points[medoids[a]]).total_cmp(&dist2(p, &points[medoids[b]])))
                    .expect("k >= 1")
            })
            .collect();
        let mut next = medoids.clone();
        for (c, slot) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&i| assign[i] == c).collect();
            let cost = |m: usize| -> f64 { members.iter().map(|&i| dist2(&points[i], &points[m]).sqrt()).sum() };
            if let Some(best) = members
                .iter()
                .copied()
                .min_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b)))
            {
                *slot = best;
            }
        }
        if next == medoids {
            break;
        }
        medoids = next;
    }
    medoids
}

/// Proposes `k` TRPs at the medoids of the worst-10 % UE positions (mounted at
/// the scenario TRP height) and returns the densified deployment.
pub fn densification_step(
    config: &CampaignConfig,
    result: &CampaignResult,
    k: usize,
) -> Result<Deployment, CampaignError> {
    let proposals = propose_trps(config, result, k)?;
    Ok(densify(&config.deployment, &proposals)?)
}

/// The new TRP positions [`densification_step`] would add.
pub fn propose_trps(config: &CampaignConfig, result: &CampaignResult, k: usize) -> Result<Vec<Point3>, CampaignError> {
    if k == 0 {
        return Err(CampaignError::ZeroK);
    }
    let worst = worst_ue_locations(result, WORST_FRACTION)?;
    // A UE directly below an existing TRP cannot host a new one.
    let occupied = |p: &Point3| {
        config
            .deployment
            .positions()
            .any(|q| (q.x - p.x).abs() < 1e-9 && (q.y - p.y).abs() < 1e-9)
    };
    let points: Vec<[f64; 2]> = worst.iter().filter(|p| !occupied(p)).map(|p| [p.x, p.y]).collect();
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = stream(config.seed, config.deployment.len() as u64, Purpose::Clustering);
    let medoids = k_medoids(&points, k, &mut rng);
    let z = config.deployment.scenario().trp_mount_height;
    let mut out: Vec<Point3> = Vec::new();
    for m in medoids {
        let p = Point3::new(points[m][0], points[m][1], z);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Campaign settings reused across a sweep or densification loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    pub noise: NoiseModel,
    pub n_drops: usize,
    pub measurement_mode: MeasurementMode,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolveOptions,
}

impl CampaignSettings {
    pub fn config_for(&self, deployment: Deployment) -> CampaignConfig {
        CampaignConfig {
            measurement_mode: self.measurement_mode,
            solver: self.solver,
            ..CampaignConfig::new(deployment, self.noise, self.n_drops, self.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_trps: usize,
    pub percentiles: Option<PercentileRow>,
    pub availability_fraction: f64,
}

/// One campaign per TRP count for the given layout family.
pub fn densification_sweep(
    scenario: &ScenarioSpec,
    layout: LayoutTag,
    counts: &[usize],
    settings: &CampaignSettings,
) -> Result<Vec<SweepRow>, CampaignError> {
    if counts.is_empty() || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CampaignError::BadCounts);
    }
    counts
        .iter()
        .map(|&n| {
            let deployment = make_layout(scenario, layout, n)?;
            let result = run_campaign(&settings.config_for(deployment))?;
            Ok(SweepRow {
                n_trps: n,
                percentiles: result.summary.percentiles,
                availability_fraction: result.summary.availability_fraction,
            })
        })
        .collect()
}

/// One row of a densification run; step 0 is the base deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensifyStep {
    pub step: usize,
    pub deployment: Deployment,
    /// TRPs added on top of the base deployment.
    pub added: Vec<Point3>,
    pub percentiles: Option<PercentileRow>,
    pub worst_ues: Vec<Point3>,
}

/// Runs the base campaign, then for `k = 1..=k_max` adds `k * k_per_step`
/// TRPs at the medoids of the base campaign's worst UEs and re-runs the
/// campaign on each densified deployment.
pub fn densification_loop(
    base_config: &CampaignConfig,
    k_max: usize,
    k_per_step: usize,
) -> Result<Vec<DensifyStep>, CampaignError> {
    if k_per_step == 0 {
        return Err(CampaignError::ZeroK);
    }
    let base = &base_config.deployment;
    let base_result = run_campaign(base_config)?;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(DensifyStep {
        step: 0,
        deployment: base.clone(),
        added: Vec::new(),
        percentiles: base_result.summary.percentiles,
        worst_ues: worst_ue_locations(&base_result, WORST_FRACTION).unwrap_or_default(),
    });
    for step in 1..=k_max {
        let added = propose_trps(base_config, &base_result, step * k_per_step)?;
        let deployment = densify(base, &added)?;
        let result = run_campaign(&CampaignConfig {
            deployment: deployment.clone(),
            ..base_config.clone()
        })?;
        out.push(DensifyStep {
            step,
            deployment,
            added,
            percentiles: result.summary.percentiles,
            worst_ues: worst_ue_locations(&result, WORST_FRACTION).unwrap_or_default(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_edge_deployment, make_mixed_deployment, make_standard_deployment, ScenarioFamily};

    fn fake_result(errors: &[f64]) -> CampaignResult {
        let drops: Vec<DropRecord> = errors
            .iter()
            .enumerate()
            .map(|(i, &e)| DropRecord {
                index: i,
                true_position: Point3::new(i as f64, 0.0, 1.5),
                estimate: Some(Point3::new(i as f64 + e, 0.0, 1.5)),
                horizontal_error: Some(e),
                n_los_links: i % 5,
                available: true,
                converged: true,
            })
            .collect();
        CampaignResult {
            n_trps: 4,
            summary: summarize(&drops),
            drops,
        }
    }

    #[test]
    fn percentile_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile_sorted(&v, 0.9).unwrap() - 90.1).abs() < 1e-12);
        assert_eq!(percentile_sorted(&v, 1.0).unwrap(), 100.0);
        assert_eq!(percentile_sorted(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile_sorted(&[], 0.5), Err(CampaignError::EmptyCdf));
        assert!(percentile_sorted(&v, 1.5).is_err());
    }

    #[test]
    fn histogram_partitions_drops() {
        let r = fake_result(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let h = los_histogram(&r);
        assert_eq!(h.len(), 5);
        assert_eq!(h.iter().sum::<usize>(), 7);
        assert_eq!(h, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn worst_locations_count_and_order() {
        let errors: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let r = fake_result(&errors);
        let w = worst_ue_locations(&r, 0.1).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(worst_ue_locations(&r, 1.0).unwrap().len(), 100);
        let err_at = |p: &Point3| errors[p.x as usize];
        assert!(w.windows(2).all(|p| err_at(&p[0]) >= err_at(&p[1])));
        assert_eq!(err_at(&w[0]), 99.0);
        assert!(worst_ue_locations(&r, 0.0).is_err());
    }

    #[test]
    fn k_medoids_separates_clusters() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push([5.0 + i as f64 * 0.1, 5.0]);
            pts.push([100.0 + i as f64 * 0.1, 40.0]);
        }
        let m = k_medoids(&pts, 2, &mut stream(1, 0, Purpose::Clustering));
        let mut xs: Vec<f64> = m.iter().map(|&i| pts[i][0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[0] < 10.0 && xs[1] > 90.0);
    }

    #[test]
    fn k_medoids_degenerate_cloud() {
        let pts = vec![[3.0, 4.0]; 12];
        let m = k_medoids(&pts, 3, &mut stream(1, 0, Purpose::Clustering));
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn noiseless_all_los_campaign_is_exact() {
        let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
        for d in [
            make_standard_deployment(&s, 12).unwrap(),
            make_edge_deployment(&s, 12).unwrap(),
            make_mixed_deployment(&s).unwrap(),
        ] {
            let mut c = CampaignConfig::new(
                d,
                NoiseModel {
                    sigma_toa_m: 1e-9,
                    ..NoiseModel::default()
                },
                300,
                42,
            );
            c.force_all_los = true;
            let r = run_campaign(&c).unwrap();
            assert_eq!(r.summary.availability_fraction, 1.0);
            assert!(percentile(&r, 0.95).unwrap() < 1e-3);
            assert_eq!(los_histogram(&r)[12], 300);
        }
    }

    #[test]
    fn campaign_is_deterministic_across_thread_counts() {
        let s = ScenarioSpec::preset(ScenarioFamily::InfDh);
        let c = CampaignConfig::new(make_mixed_deployment(&s).unwrap(), NoiseModel::default(), 200, 9);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_campaign(&c)).unwrap();
        let b = four.install(|| run_campaign(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_drop_campaign() {
        let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
        let c = CampaignConfig::new(make_edge_deployment(&s, 12).unwrap(), NoiseModel::default(), 1, 3);
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.drops.len(), 1);
        assert_eq!(r.summary.cdf.len(), 1);
        let c0 = CampaignConfig { n_drops: 0, ..c };
        assert_eq!(run_campaign(&c0), Err(CampaignError::NoDrops));
    }

    #[test]
    fn densification_step_adds_k_trps_in_the_bad_corner() {
        let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
        let d = make_edge_deployment(&s, 12).unwrap();
        let c = CampaignConfig::new(d, NoiseModel::default(), 100, 1);
        // Worst errors concentrated in the lower-left corner.
        let drops: Vec<DropRecord> = (0..100)
            .map(|i| {
                let corner = i < 10;
                let p = if corner {
                    Point3::new(1.0 + (i % 3) as f64, 1.0 + (i / 3) as f64, 1.5)
                } else {
                    Point3::new(30.0 + (i % 50) as f64, 20.0, 1.5)
                };
                DropRecord {
                    index: i,
                    true_position: p,
                    estimate: Some(p),
                    horizontal_error: Some(if corner { 10.0 + i as f64 } else { 0.1 }),
                    n_los_links: 8,
                    available: true,
                    converged: true,
                }
            })
            .collect();
        let r = CampaignResult {
            n_trps: 12,
            summary: summarize(&drops),
            drops,
        };
        let one = densification_step(&c, &r, 1).unwrap();
        assert_eq!(one.len(), 13);
        let added = one.position(12);
        assert!(added.x >= 1.0 && added.x <= 3.0 && added.y >= 1.0 && added.y <= 4.0);
        assert_eq!(added.z, s.trp_mount_height);
        assert_eq!(densification_step(&c, &r, 3).unwrap().len(), 15);
        assert_eq!(densification_step(&c, &r, 0), Err(CampaignError::ZeroK));
    }

    #[test]
    fn sweep_rejects_unsorted_counts() {
        let s = ScenarioSpec::preset(ScenarioFamily::Ioo);
        let settings = CampaignSettings {
            noise: NoiseModel::default(),
            n_drops: 10,
            measurement_mode: MeasurementMode::AllTrps,
            seed: 1,
            solver: SolveOptions::default(),
        };
        assert_eq!(
            densification_sweep(&s, LayoutTag::Standard, &[24, 12], &settings),
            Err(CampaignError::BadCounts)
        );
        let one = densification_sweep(&s, LayoutTag::Standard, &[12], &settings).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn densify_loop_grows_from_the_base() {
        let s = ScenarioSpec::preset(ScenarioFamily::InfDh);
        let base = make_mixed_deployment(&s).unwrap();
        let settings = CampaignSettings {
            noise: NoiseModel::default(),
            n_drops: 200,
            measurement_mode: MeasurementMode::AllTrps,
            seed: 9,
            solver: SolveOptions::default(),
        };
        let steps = densification_loop(&settings.config_for(base.clone()), 3, 1).unwrap();
        let sizes: Vec<usize> = steps.iter().map(|s| s.deployment.len()).collect();
        assert_eq!(sizes, [12, 13, 14, 15]);
        for (k, st) in steps.iter().enumerate() {
            assert_eq!(st.step, k);
            assert_eq!(st.added.len(), k);
            assert_eq!(st.worst_ues.len(), 20);
            for (j, p) in st.added.iter().enumerate() {
                assert_eq!(st.deployment.position(12 + j), *p);
            }
        }
        let only_base = densification_loop(&settings.config_for(base.clone()), 0, 1).unwrap();
        assert_eq!(only_base.len(), 1);
        assert_eq!(only_base[0].percentiles, steps[0].percentiles);
    }
}
