//! Fisher information, CRLB RMSE bounds and GDOP for DL-TDOA.
//!
//! Row `j` of the TDOA Jacobian is `u_j - u_ref`, with `u_i` the unit vector
//! from TRP `i` to the UE. The FIM is `H^T R^-1 H`; the 3D RMSE bound is
//! `sqrt(tr I^-1)` and the horizontal one keeps only the x and y diagonal
//! entries of the full 3x3 inverse. GDOP is the horizontal bound under
//! unit-variance TOA noise, so `crlb_rmse_2d = sigma * gdop_2d`.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{tdoa_covariance, NoiseModel};
use crate::scenario::{Deployment, ScenarioSpec};
use crate::Point3;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;
/// Squared null-space component above which a coordinate is not estimable.
const ESTIMABLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("position coincides with TRP {0}")]
    CoincidentWithTrp(usize),
    #[error("reference TRP {ref_trp} out of range for {n_trps} TRPs")]
    RefOutOfRange { ref_trp: usize, n_trps: usize },
    #[error("covariance is {got}x{got} but the Jacobian has {expected} rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("measurement covariance is not positive definite")]
    SingularCovariance,
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimResult {
    pub matrix: Matrix3<f64>,
    pub jacobian: DMatrix<f64>,
}

/// Unit vector from TRP `id` to `theta`.
fn unit_from(deployment: &Deployment, id: usize, theta: &Point3) -> Result<Vector3<f64>, BoundsError> {
    let diff = theta - deployment.position(id);
    let norm = diff.norm();
    if norm == 0.0 {
        return Err(BoundsError::CoincidentWithTrp(id));
    }
    Ok(diff / norm)
}

/// Jacobian of the TDOA model for the rows `others` against `ref_trp`.
pub fn tdoa_jacobian_rows(
    theta: &Point3,
    deployment: &Deployment,
    ref_trp: usize,
    others: &[usize],
) -> Result<DMatrix<f64>, BoundsError> {
    let n = deployment.len();
    if let Some(&bad) = std::iter::once(&ref_trp).chain(others).find(|&&id| id >= n) {
        return Err(BoundsError::RefOutOfRange {
            ref_trp: bad,
            n_trps: n,
        });
    }
    let u_ref = unit_from(deployment, ref_trp, theta)?;
    let mut h = DMatrix::zeros(others.len(), 3);
    for (row, &id) in others.iter().enumerate() {
        let u = unit_from(deployment, id, theta)? - u_ref;
        h.row_mut(row).copy_from(&u.transpose());
    }
    Ok(h)
}

/// Full TDOA Jacobian: one row per non-reference TRP, ascending id.
pub fn tdoa_jacobian(theta: &Point3, deployment: &Deployment, ref_trp: usize) -> Result<DMatrix<f64>, BoundsError> {
    let others: Vec<usize> = (0..deployment.len()).filter(|&j| j != ref_trp).collect();
    tdoa_jacobian_rows(theta, deployment, ref_trp, &others)
}

/// `H^T R^-1 H` for an arbitrary Jacobian and covariance.
pub fn information_matrix(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Matrix3<f64>, BoundsError> {
    if r.nrows() != h.nrows() || r.ncols() != h.nrows() {
        return Err(BoundsError::DimensionMismatch {
            expected: h.nrows(),
            got: r.nrows(),
        });
    }
    let chol = r.clone().cholesky().ok_or(BoundsError::SingularCovariance)?;
    let weighted = chol.solve(h);
    let full = h.transpose() * weighted;
    let mut m = Matrix3::from_fn(|i, j| full[(i, j)]);
    m = (m + m.transpose()) * 0.5;
    Ok(m)
}

pub fn fim(
    theta: &Point3,
    deployment: &Deployment,
    ref_trp: usize,
    r: &DMatrix<f64>,
) -> Result<FimResult, BoundsError> {
    let jacobian = tdoa_jacobian(theta, deployment, ref_trp)?;
    let matrix = information_matrix(&jacobian, r)?;
    Ok(FimResult { matrix, jacobian })
}

/// Diagonal of the FIM (pseudo-)inverse restricted to `axes`, or `None` when
/// one of those coordinates is not estimable.
fn inverse_diagonal_sum(info: &Matrix3<f64>, axes: &[usize]) -> Option<f64> {
    if info.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let eig = SymmetricEigen::new(*info);
    let max = eig.eigenvalues.max();
    if max <= 0.0 {
        return None;
    }
    let tol = max * RANK_TOL;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > tol).count();
    if rank == 3 {
        // Full rank: Cholesky inverse is more accurate than the eigenbasis.
        if let Some(chol) = info.cholesky() {
            let inv = chol.inverse();
            return Some(axes.iter().map(|&a| inv[(a, a)]).sum());
        }
    }
    let mut sum = 0.0;
    for &axis in axes {
        let mut null_part = 0.0;
        let mut value = 0.0;
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let c = eig.eigenvectors[(axis, k)];
            if lambda > tol {
                value += c * c / lambda;
            } else {
                null_part += c * c;
            }
        }
        if null_part > ESTIMABLE_TOL {
            return None;
        }
        sum += value;
    }
    Some(sum)
}

/// `sqrt(tr I^-1)`; `None` marks an unbounded (singular) geometry.
pub fn crlb_rmse_3d(fim: &FimResult) -> Option<f64> {
    inverse_diagonal_sum(&fim.matrix, &[0, 1, 2]).map(f64::sqrt)
}

/// `sqrt([I^-1]_xx + [I^-1]_yy)` from the full 3x3 information.
///
/// When the FIM is rank deficient but x and y are still estimable (for
/// example all TRPs level with the UE, leaving z unobservable) the
/// pseudo-inverse gives the bound; otherwise `None`.
pub fn crlb_rmse_2d(fim: &FimResult) -> Option<f64> {
    inverse_diagonal_sum(&fim.matrix, &[0, 1]).map(f64::sqrt)
}

/// Horizontal GDOP: the 2D bound under unit-variance TOA noise.
pub fn gdop_2d(theta: &Point3, deployment: &Deployment, ref_trp: usize) -> Result<Option<f64>, BoundsError> {
    let unit = unit_fim(theta, deployment, ref_trp)?;
    Ok(crlb_rmse_2d(&unit))
}

/// 3D counterpart of [`gdop_2d`].
pub fn gdop_3d(theta: &Point3, deployment: &Deployment, ref_trp: usize) -> Result<Option<f64>, BoundsError> {
    let unit = unit_fim(theta, deployment, ref_trp)?;
    Ok(crlb_rmse_3d(&unit))
}

fn unit_fim(theta: &Point3, deployment: &Deployment, ref_trp: usize) -> Result<FimResult, BoundsError> {
    if ref_trp >= deployment.len() {
        return Err(BoundsError::RefOutOfRange {
            ref_trp,
            n_trps: deployment.len(),
        });
    }
    fim(theta, deployment, ref_trp, &tdoa_covariance(deployment.len() - 1, 1.0))
}

/// How the reference TRP is chosen for each evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefPolicy {
    /// Closest TRP in 3D, lowest id on ties.
    #[default]
    Nearest,
    Fixed(usize),
}

impl RefPolicy {
    pub fn pick(&self, deployment: &Deployment, theta: &Point3) -> usize {
        match *self {
            RefPolicy::Nearest => deployment.nearest_trp(theta),
            RefPolicy::Fixed(id) => id,
        }
    }
}

/// Bound values at one point. `None` marks a singular (unbounded) value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub x: f64,
    pub y: f64,
    pub gdop_2d: Option<f64>,
    pub crlb_rmse_2d: Option<f64>,
    pub crlb_rmse_3d: Option<f64>,
}

impl BoundCell {
    pub fn singular(&self) -> bool {
        self.gdop_2d.is_none() || self.crlb_rmse_2d.is_none() || self.crlb_rmse_3d.is_none()
    }
}

/// Evaluates GDOP and both CRLB values at `theta`.
///
/// Both bounds are `sigma` times their unit-noise value, which keeps them
/// exactly linear in `sigma`.
pub fn evaluate_point(
    theta: &Point3,
    deployment: &Deployment,
    ref_trp: usize,
    sigma: f64,
) -> Result<BoundCell, BoundsError> {
    let blank = BoundCell {
        x: theta.x,
        y: theta.y,
        gdop_2d: None,
        crlb_rmse_2d: None,
        crlb_rmse_3d: None,
    };
    let unit = match unit_fim(theta, deployment, ref_trp) {
        Ok(f) => f,
        Err(BoundsError::CoincidentWithTrp(_)) => return Ok(blank),
        Err(e) => return Err(e),
    };
    let g2 = crlb_rmse_2d(&unit);
    let g3 = crlb_rmse_3d(&unit);
    Ok(BoundCell {
        gdop_2d: g2,
        crlb_rmse_2d: g2.map(|g| sigma * g),
        crlb_rmse_3d: g3.map(|g| sigma * g),
        ..blank
    })
}

/// Bound values over a regular floor-plan grid at UE height.
///
/// Cells are `cell_size` squares tiling the hall from the corner `(0, 0)`;
/// the last column/row is clipped at the wall and evaluated at the center of
/// the clipped cell. `cells` is row-major: index `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGrid {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub height: f64,
    pub sigma_toa_m: f64,
    pub cells: Vec<BoundCell>,
}

fn cell_centers(len: f64, cell: f64) -> Vec<f64> {
    let n = (len / cell).ceil().max(1.0) as usize;
    (0..n)
        .map(|i| {
            let lo = i as f64 * cell;
            let hi = ((i + 1) as f64 * cell).min(len);
            (lo + hi) / 2.0
        })
        .collect()
}

pub fn bound_grid(
    scenario: &ScenarioSpec,
    deployment: &Deployment,
    ref_policy: RefPolicy,
    cell_size: f64,
    noise: &NoiseModel,
) -> Result<BoundGrid, BoundsError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(BoundsError::InvalidCellSize(cell_size));
    }
    if let RefPolicy::Fixed(id) = ref_policy {
        if id >= deployment.len() {
            return Err(BoundsError::RefOutOfRange {
                ref_trp: id,
                n_trps: deployment.len(),
            });
        }
    }
    let xs = cell_centers(scenario.x_len, cell_size);
    let ys = cell_centers(scenario.y_len, cell_size);
    let z = scenario.ue_height;
    let rows: Vec<Vec<BoundCell>> = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    let theta = Point3::new(x, y, z);
                    let ref_trp = ref_policy.pick(deployment, &theta);
                    evaluate_point(&theta, deployment, ref_trp, noise.sigma_toa_m)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(BoundGrid {
        origin: [0.0, 0.0],
        cell_size,
        nx: xs.len(),
        ny: ys.len(),
        height: z,
        sigma_toa_m: noise.sigma_toa_m,
        cells: rows.into_iter().flatten().collect(),
    })
}

impl BoundGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &BoundCell {
        &self.cells[iy * self.nx + ix]
    }

    /// (min, max) over non-singular cells of the selected field.
    pub fn range_of(&self, field: impl Fn(&BoundCell) -> Option<f64>) -> Option<(f64, f64)> {
        self.cells.iter().filter_map(field).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn singular_count(&self) -> usize {
        self.cells.iter().filter(|c| c.singular()).count()
    }
}
