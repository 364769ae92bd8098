//! DL-TDOA multilateration by weighted nonlinear least squares.
//!
//! Minimizes `(y - h(theta))^T R^-1 (y - h(theta))` with a damped
//! Gauss-Newton (Levenberg-Marquardt) iteration, started from a coarse grid
//! search. By default only the horizontal position is estimated and z stays
//! at the known UE height; `solve_3d` frees z (clamped to the hall).

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::bounds::{tdoa_jacobian_rows, BoundsError};
use crate::channel::MeasurementSet;
use crate::scenario::Deployment;
use crate::Point3;

const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("need at least 3 TDOA rows, got {0}")]
    TooFewRows(usize),
    #[error("TRP {id} is not part of the deployment ({n_trps} TRPs)")]
    UnknownTrp { id: usize, n_trps: usize },
    #[error("covariance shape {rows}x{cols} does not match {m} TDOA rows")]
    CovarianceShape { rows: usize, cols: usize, m: usize },
    #[error("measurement covariance is not positive definite")]
    CovarianceNotPd,
    #[error("measurements or initial point are not finite")]
    NonFinite,
}

fn default_max_iterations() -> usize {
    50
}

fn default_step_tolerance() -> f64 {
    1e-6
}

fn default_initial_lambda() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_step_tolerance")]
    pub step_tolerance_m: f64,
    #[serde(default)]
    pub solve_3d: bool,
    #[serde(default = "default_initial_lambda")]
    pub initial_lambda: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            step_tolerance_m: default_step_tolerance(),
            solve_3d: false,
            initial_lambda: default_initial_lambda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixResult {
    pub estimate: Point3,
    pub converged: bool,
    pub iterations: usize,
    /// Unweighted Euclidean norm of the final residual.
    pub residual_norm: f64,
    /// Final weighted cost `r^T R^-1 r`.
    pub weighted_cost: f64,
    /// Norm of the weighted gradient `J^T R^-1 r` over the free coordinates.
    pub gradient_norm: f64,
    /// `(H^T R^-1 H)^-1` at the estimate, when invertible.
    pub covariance_estimate: Option<Matrix3<f64>>,
}

/// `y_j - (|theta - p_j| - |theta - p_ref|)` for each TDOA row.
pub fn residual(theta: &Point3, measurements: &MeasurementSet, deployment: &Deployment) -> DVector<f64> {
    let d_ref = (theta - deployment.position(measurements.ref_trp)).norm();
    DVector::from_iterator(
        measurements.len(),
        measurements
            .others
            .iter()
            .zip(&measurements.values)
            .map(|(&id, &y)| y - ((theta - deployment.position(id)).norm() - d_ref)),
    )
}

struct Problem<'a> {
    measurements: &'a MeasurementSet,
    deployment: &'a Deployment,
    weight: DMatrix<f64>,
}

impl<'a> Problem<'a> {
    fn new(measurements: &'a MeasurementSet, deployment: &'a Deployment) -> Result<Self, EstimatorError> {
        let m = measurements.len();
        if m < 3 {
            return Err(EstimatorError::TooFewRows(m));
        }
        let n = deployment.len();
        if let Some(&id) = measurements.used_trps().iter().find(|&&id| id >= n) {
            return Err(EstimatorError::UnknownTrp { id, n_trps: n });
        }
        let r = &measurements.covariance;
        if r.nrows() != m || r.ncols() != m {
            return Err(EstimatorError::CovarianceShape {
                rows: r.nrows(),
                cols: r.ncols(),
                m,
            });
        }
        if measurements.values.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        let weight = r.clone().cholesky().ok_or(EstimatorError::CovarianceNotPd)?.inverse();
        Ok(Self {
            measurements,
            deployment,
            weight,
        })
    }

    fn cost_of(&self, r: &DVector<f64>) -> f64 {
        r.dot(&(&self.weight * r))
    }

    fn residual(&self, theta: &Point3) -> DVector<f64> {
        residual(theta, self.measurements, self.deployment)
    }

    fn jacobian(&self, theta: &Point3) -> Result<DMatrix<f64>, BoundsError> {
        tdoa_jacobian_rows(
            theta,
            self.deployment,
            self.measurements.ref_trp,
            &self.measurements.others,
        )
    }
}

/// Grid search over a lattice of `spacing` meters at `height`, returning the
/// lattice point with the smallest weighted residual. Ties go to the lowest
/// x, then the lowest y.
pub fn initial_guess_with(
    measurements: &MeasurementSet,
    deployment: &Deployment,
    spacing: f64,
    height: f64,
) -> Result<Point3, EstimatorError> {
    let problem = Problem::new(measurements, deployment)?;
    let s = deployment.scenario();
    let axis = |len: f64| -> Vec<f64> {
        let n = (len / spacing).floor() as usize;
        (0..=n).map(|i| i as f64 * spacing).collect()
    };
    let (xs, ys) = (axis(s.x_len), axis(s.y_len));
    Ok(lattice_argmin(&xs, &ys, height, |p| {
        problem.cost_of(&problem.residual(p))
    }))
}

/// Lattice point minimizing `cost`; x-major scan with strict improvement, so
/// ties resolve to the lowest x and then the lowest y.
fn lattice_argmin(xs: &[f64], ys: &[f64], height: f64, cost: impl Fn(&Point3) -> f64) -> Point3 {
    let mut best = (f64::INFINITY, Point3::new(xs[0], ys[0], height));
    for &x in xs {
        for &y in ys {
            let p = Point3::new(x, y, height);
            let c = cost(&p);
            if c < best.0 {
                best = (c, p);
            }
        }
    }
    best.1
}

/// Default initializer: 5 m lattice at the scenario UE height.
pub fn initial_guess(measurements: &MeasurementSet, deployment: &Deployment) -> Result<Point3, EstimatorError> {
    initial_guess_with(measurements, deployment, 5.0, deployment.scenario().ue_height)
}

pub fn solve_tdoa(
    measurements: &MeasurementSet,
    deployment: &Deployment,
    init: &Point3,
    options: &SolveOptions,
) -> Result<FixResult, EstimatorError> {
    let problem = Problem::new(measurements, deployment)?;
    if init.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite);
    }
    let ceiling = deployment.scenario().ceiling_height;
    let free = if options.solve_3d { 3 } else { 2 };
    let project = |mut p: Point3| {
        if options.solve_3d {
            p.z = p.z.clamp(0.0, ceiling);
        } else {
            p.z = init.z;
        }
        p
    };

    let mut theta = project(*init);
    let mut r = problem.residual(&theta);
    let mut cost = problem.cost_of(&r);
    let mut lambda = options.initial_lambda.max(LAMBDA_MIN);
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;

    while iterations < options.max_iterations {
        iterations += 1;
        let h = match problem.jacobian(&theta) {
            Ok(h) => h,
            Err(_) => break,
        };
        // d r / d theta = -H, so the descent direction solves A delta = H^T W r.
        let j = h.columns(0, free).into_owned();
        let wj = &problem.weight * &j;
        let a = j.transpose() * &wj;
        let g = wj.transpose() * &r;
        gradient_norm = g.norm();
        let diag_floor = a.trace().abs().max(f64::MIN_POSITIVE) * 1e-12;

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = a.clone();
            for k in 0..free {
                damped[(k, k)] += lambda * a[(k, k)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&g);
            let mut candidate = theta;
            for k in 0..free {
                candidate[k] += delta[k];
            }
            let candidate = project(candidate);
            let step = (candidate - theta).norm();
            let r_c = problem.residual(&candidate);
            let cost_c = problem.cost_of(&r_c);
            if cost_c <= cost || step < options.step_tolerance_m {
                if cost_c <= cost {
                    theta = candidate;
                    r = r_c;
                    cost = cost_c;
                }
                lambda = (lambda / 10.0).max(LAMBDA_MIN);
                accepted = true;
                if step < options.step_tolerance_m {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No damped step decreases the cost: stationary if the plain
            // Gauss-Newton step is already negligible.
            if let Some(chol) = a.clone().cholesky() {
                converged = chol.solve(&g).norm() < 10.0 * options.step_tolerance_m;
            }
            break;
        }
        if converged {
            break;
        }
    }

    let covariance_estimate = problem
        .jacobian(&theta)
        .ok()
        .and_then(|h| {
            let info = h.transpose() * (&problem.weight * &h);
            Matrix3::from_fn(|i, j| info[(i, j)]).cholesky()
        })
        .map(|c| c.inverse());

    Ok(FixResult {
        estimate: theta,
        converged,
        iterations,
        residual_norm: r.norm(),
        weighted_cost: cost,
        gradient_norm,
        covariance_estimate,
    })
}
