//! Statistical LOS/NLOS channel and DL-TDOA measurement synthesis.
//!
//! A TOA observation is the TRP-UE distance plus a common clock bias, white
//! Gaussian ranging noise and, for NLOS links, a positive exponentially
//! distributed excess-path bias. TDOA observations are differences against a
//! reference TRP; the common bias cancels and the noise becomes correlated
//! with covariance `sigma^2 (I + 1 1^T)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scenario::{Deployment, ScenarioFamily, ScenarioSpec, Trp, MIN_TRPS_FOR_FIX};
use crate::Point3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("a DL-TDOA measurement set needs at least {MIN_TRPS_FOR_FIX} TOAs, got {0}")]
    TooFewToas(usize),
    #[error("reference TRP {ref_trp} out of range for {n_trps} TRPs")]
    RefOutOfRange { ref_trp: usize, n_trps: usize },
    #[error("unavailable fix: {los_links} LOS links, at least {MIN_TRPS_FOR_FIX} required")]
    UnavailableFix { los_links: usize },
    #[error("LOS flags cover {flags} TRPs but the deployment has {n_trps}")]
    FlagCountMismatch { flags: usize, n_trps: usize },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
}

fn default_nlos_bias_mean() -> f64 {
    2.0
}

/// Ranging error model. All quantities are distances (TOA times speed of light).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the white Gaussian ranging error.
    pub sigma_toa_m: f64,
    /// Mean of the exponential NLOS excess-path bias.
    #[serde(default = "default_nlos_bias_mean")]
    pub nlos_bias_mean_m: f64,
    /// Clock bias shared by all TRPs (synchronized network).
    #[serde(default)]
    pub clock_bias_m: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_toa_m: 0.2,
            nlos_bias_mean_m: default_nlos_bias_mean(),
            clock_bias_m: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.sigma_toa_m.is_finite() && self.sigma_toa_m > 0.0) {
            return Err(ChannelError::InvalidNoise(format!(
                "sigma_toa_m must be positive, got {}",
                self.sigma_toa_m
            )));
        }
        if !(self.nlos_bias_mean_m.is_finite() && self.nlos_bias_mean_m >= 0.0) {
            return Err(ChannelError::InvalidNoise(format!(
                "nlos_bias_mean_m must be non-negative, got {}",
                self.nlos_bias_mean_m
            )));
        }
        if !self.clock_bias_m.is_finite() {
            return Err(ChannelError::InvalidNoise("clock_bias_m must be finite".into()));
        }
        Ok(())
    }
}

/// One UE realization: true position and per-TRP LOS state (indexed by TRP id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeDrop {
    pub position: Point3,
    pub los_flags: Vec<bool>,
}

impl UeDrop {
    pub fn n_los(&self) -> usize {
        self.los_flags.iter().filter(|&&f| f).count()
    }
}

/// DL-TDOA observations of one UE against a reference TRP.
///
/// `values[k]` is `toa[others[k]] - toa[ref_trp]`; `others` is ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub ref_trp: usize,
    pub others: Vec<usize>,
    pub values: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub sigma_toa_m: f64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reference first, then the non-reference TRPs in row order.
    pub fn used_trps(&self) -> Vec<usize> {
        std::iter::once(self.ref_trp)
            .chain(self.others.iter().copied())
            .collect()
    }
}

/// `sigma^2 (I + 1 1^T)` of size `rows`: covariance of TOA differences taken
/// against one common reference.
pub fn tdoa_covariance(rows: usize, sigma: f64) -> DMatrix<f64> {
    let s2 = sigma * sigma;
    DMatrix::from_fn(rows, rows, |i, j| if i == j { 2.0 * s2 } else { s2 })
}

fn horizontal_distance(a: &Point3, b: &Point3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// LOS probability between `trp` and a UE at `ue`.
///
/// IOO uses the indoor-office piecewise model in the 2D distance. The factory
/// scenarios use `exp(-d_2D / k)` with `k = -d_clutter / ln(1 - r)`; InF-SH
/// scales `k` by `(h_trp - h_ue) / (h_c - h_ue)` for TRPs mounted above the
/// clutter.
pub fn los_probability(scenario: &ScenarioSpec, trp: &Trp, ue: &Point3) -> f64 {
    let d = horizontal_distance(&trp.position, ue);
    if d <= 0.0 {
        return 1.0;
    }
    match scenario.family {
        ScenarioFamily::Ioo => {
            if d <= 5.0 {
                1.0
            } else if d <= 49.0 {
                (-(d - 5.0) / 70.8).exp()
            } else {
                0.54 * (-(d - 49.0) / 211.7).exp()
            }
        }
        ScenarioFamily::InfSh | ScenarioFamily::InfDh => {
            let r = scenario.clutter_density;
            if r <= 0.0 {
                return 1.0;
            }
            let mut k = -scenario.clutter_size / (1.0 - r).ln();
            if scenario.family == ScenarioFamily::InfSh {
                let above_clutter = scenario.clutter_height - ue.z;
                if above_clutter <= 0.0 {
                    return 1.0;
                }
                k *= (trp.position.z - ue.z).max(0.0) / above_clutter;
            }
            if k <= 0.0 {
                0.0
            } else {
                (-d / k).exp().clamp(0.0, 1.0)
            }
        }
    }
}

/// Independent Bernoulli LOS draws, one per TRP in id order.
pub fn sample_los_states<R: Rng + ?Sized>(deployment: &Deployment, ue_position: &Point3, rng: &mut R) -> Vec<bool> {
    deployment
        .trps()
        .iter()
        .map(|trp| {
            let p = los_probability(deployment.scenario(), trp, ue_position);
            rng.random::<f64>() < p
        })
        .collect()
}

/// One TOA observation in meters. Always consumes one Gaussian draw, plus one
/// exponential draw when the link is NLOS.
pub fn synthesize_toa<R: Rng + ?Sized>(trp: &Trp, ue: &UeDrop, noise: &NoiseModel, rng: &mut R) -> f64 {
    let distance = (ue.position - trp.position).norm();
    let gaussian: f64 = rng.sample(StandardNormal);
    let mut toa = distance + noise.clock_bias_m + noise.sigma_toa_m * gaussian;
    let los = ue.los_flags.get(trp.id).copied().unwrap_or(true);
    if !los && noise.nlos_bias_mean_m > 0.0 {
        let exp = Exp::new(1.0 / noise.nlos_bias_mean_m).expect("positive rate");
        toa += exp.sample(rng);
    }
    toa
}

/// TOAs for every TRP of `deployment`, in id order.
pub fn synthesize_toas<R: Rng + ?Sized>(
    deployment: &Deployment,
    ue: &UeDrop,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<f64> {
    deployment
        .trps()
        .iter()
        .map(|trp| synthesize_toa(trp, ue, noise, rng))
        .collect()
}

/// Differences every TOA against `toas[ref_trp]`.
pub fn form_tdoa(toas: &[f64], ref_trp: usize, noise: &NoiseModel) -> Result<MeasurementSet, ChannelError> {
    if toas.len() < MIN_TRPS_FOR_FIX {
        return Err(ChannelError::TooFewToas(toas.len()));
    }
    if ref_trp >= toas.len() {
        return Err(ChannelError::RefOutOfRange {
            ref_trp,
            n_trps: toas.len(),
        });
    }
    let others: Vec<usize> = (0..toas.len()).filter(|&j| j != ref_trp).collect();
    let values = others.iter().map(|&j| toas[j] - toas[ref_trp]).collect();
    Ok(MeasurementSet {
        ref_trp,
        covariance: tdoa_covariance(others.len(), noise.sigma_toa_m),
        others,
        values,
        sigma_toa_m: noise.sigma_toa_m,
    })
}

/// Reference TRP for a drop: nearest LOS TRP, or nearest TRP when none is LOS.
pub fn choose_reference(deployment: &Deployment, ue: &UeDrop) -> usize {
    deployment
        .nearest_among(&ue.position, |id| ue.los_flags.get(id).copied().unwrap_or(false))
        .unwrap_or_else(|| deployment.nearest_trp(&ue.position))
}

/// Keeps only rows whose TRP is LOS. If the reference is NLOS the set is
/// re-referenced to the nearest LOS TRP among those measured.
pub fn filter_los_only(
    measurements: &MeasurementSet,
    ue: &UeDrop,
    deployment: &Deployment,
) -> Result<MeasurementSet, ChannelError> {
    if ue.los_flags.len() != deployment.len() {
        return Err(ChannelError::FlagCountMismatch {
            flags: ue.los_flags.len(),
            n_trps: deployment.len(),
        });
    }
    let is_los = |id: usize| ue.los_flags[id];
    let used = measurements.used_trps();
    let los_links = used.iter().filter(|&&id| is_los(id)).count();
    if los_links < MIN_TRPS_FOR_FIX {
        return Err(ChannelError::UnavailableFix { los_links });
    }

    let old_ref = measurements.ref_trp;
    let relative = |id: usize| -> f64 {
        if id == old_ref {
            0.0
        } else {
            let k = measurements
                .others
                .iter()
                .position(|&o| o == id)
                .expect("id comes from used_trps");
            measurements.values[k]
        }
    };
    let new_ref = if is_los(old_ref) {
        old_ref
    } else {
        deployment
            .nearest_among(&ue.position, |id| is_los(id) && used.contains(&id))
            .expect("at least four LOS TRPs are measured")
    };
    let shift = relative(new_ref);

    let mut others: Vec<usize> = used.iter().copied().filter(|&id| id != new_ref && is_los(id)).collect();
    others.sort_unstable();
    let values = others.iter().map(|&id| relative(id) - shift).collect();
    Ok(MeasurementSet {
        ref_trp: new_ref,
        covariance: tdoa_covariance(others.len(), measurements.sigma_toa_m),
        others,
        values,
        sigma_toa_m: measurements.sigma_toa_m,
    })
}
