//! Nuisance regression: fit the conditional means E[y|s] and E[z|s] with a
//! penalized linear-in-basis predictor and return the empirical residuals.
//!
//! Both fits solve the weighted square-root LASSO over the design
//! psi(s) = col{1, phi(s)}: the intercept is unpenalized and every basis
//! coordinate k carries the data-adaptive weight
//! `gamma_k = sqrt( (1/n) * E_n[ psi_k(s)^2 ] )`, which makes the penalty
//! scale with the column's own second moment and leaves nothing to tune.

use crate::basis::{basis_matrix, eval_basis, BasisMatrix, BasisSpec, LocationRef, Locations};
use crate::error::{Error, Result};
use crate::sqrtlasso::{self, Problem, SolveOptions};

/// Observed sample: outcome, exposure, and a location per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub locations: Locations,
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: Vec<f64>, locations: Locations) -> Result<Self> {
        let n = locations.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 observations, got {n}")));
        }
        if y.len() != n || z.len() != n {
            return Err(Error::Data(format!(
                "length mismatch: {} outcomes, {} exposures, {n} locations",
                y.len(),
                z.len()
            )));
        }
        if y.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite outcome or exposure value".into()));
        }
        Ok(Self { y, z, locations })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Resampled copy: row i of the result is row indices[i] of self.
    pub fn gather(&self, indices: &[usize]) -> Self {
        Self {
            y: indices.iter().map(|&i| self.y[i]).collect(),
            z: indices.iter().map(|&i| self.z[i]).collect(),
            locations: self.locations.gather(indices),
        }
    }
}

/// Which conditional mean a prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Outcome,
    Exposure,
}

/// Fitted nuisance coefficients and the residuals they imply.
#[derive(Debug, Clone)]
pub struct ResidualFit {
    /// Outcome coefficients over psi(s): intercept first, then d_theta
    /// basis coordinates.
    pub lambda_w: Vec<f64>,
    /// Exposure coefficients, same layout.
    pub lambda_v: Vec<f64>,
    /// Outcome residuals w_hat_i = y_i - psi(s_i)' lambda_w.
    pub w_hat: Vec<f64>,
    /// Exposure residuals v_hat_i = z_i - psi(s_i)' lambda_v.
    pub v_hat: Vec<f64>,
    /// Penalty weights used for both programs (index 0 is the intercept, 0).
    pub penalty_weights: Vec<f64>,
    /// Whether both solver runs reached their optimality certificate.
    pub converged: bool,
}

/// Optional deviations from the default fitting scheme.
#[derive(Debug, Clone, Default)]
pub struct ResidualizeOptions {
    /// Basis for the nuisance fits when it should differ from the effect
    /// basis. Default: reuse the effect basis.
    pub nuisance_spec: Option<BasisSpec>,
    /// Number of cross-fitting folds (>= 2). Default: none — residuals are
    /// fitted and evaluated on the same sample. With folds, row i's
    /// residual uses coefficients fitted with fold(i) = i mod folds held
    /// out; the stored lambdas remain the full-sample fit.
    pub cross_fit_folds: Option<usize>,
}

/// Intercept-plus-basis design columns and their penalty weights.
fn psi_columns(basis: &BasisMatrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = basis.n;
    let mut columns = Vec::with_capacity(basis.d + 1);
    columns.push(vec![1.0; n]);
    columns.extend(basis.columns());
    let weights = penalty_weights(&columns, true);
    (columns, weights)
}

/// Data-adaptive weights gamma_k = sqrt(mean(col_k^2) / n); with
/// `free_first`, the leading column (the intercept) gets weight 0.
pub(crate) fn penalty_weights(columns: &[Vec<f64>], free_first: bool) -> Vec<f64> {
    columns
        .iter()
        .enumerate()
        .map(|(k, col)| {
            if free_first && k == 0 {
                0.0
            } else {
                let n = col.len() as f64;
                (col.iter().map(|v| v * v).sum::<f64>() / n / n).sqrt()
            }
        })
        .collect()
}

fn fit_one(columns: &[Vec<f64>], weights: &[f64], response: &[f64]) -> Result<(Vec<f64>, bool)> {
    let problem = Problem::new(columns, response, weights)?;
    let solution = sqrtlasso::solve(&problem, &SolveOptions::default())?;
    Ok((solution.theta, solution.converged))
}

fn residuals_from(columns: &[Vec<f64>], lambda: &[f64], response: &[f64]) -> Vec<f64> {
    let n = response.len();
    (0..n)
        .map(|i| {
            let mut fit = 0.0;
            for (col, &l) in columns.iter().zip(lambda) {
                fit += col[i] * l;
            }
            response[i] - fit
        })
        .collect()
}

/// Fit both nuisance programs with default options.
pub fn fit_residuals(data: &Dataset, spec: &BasisSpec) -> Result<ResidualFit> {
    fit_residuals_with(data, spec, &ResidualizeOptions::default())
}

/// Fit both nuisance programs, honoring option overrides.
pub fn fit_residuals_with(
    data: &Dataset,
    spec: &BasisSpec,
    options: &ResidualizeOptions,
) -> Result<ResidualFit> {
    let nuisance_spec = options.nuisance_spec.as_ref().unwrap_or(spec);
    let basis = basis_matrix(nuisance_spec, &data.locations)?;
    let (columns, weights) = psi_columns(&basis);

    let (lambda_w, conv_w) = fit_one(&columns, &weights, &data.y)?;
    let (lambda_v, conv_v) = fit_one(&columns, &weights, &data.z)?;

    let (w_hat, v_hat) = match options.cross_fit_folds {
        None => (
            residuals_from(&columns, &lambda_w, &data.y),
            residuals_from(&columns, &lambda_v, &data.z),
        ),
        Some(folds) => cross_fit_residuals(data, &columns, folds)?,
    };

    Ok(ResidualFit {
        lambda_w,
        lambda_v,
        w_hat,
        v_hat,
        penalty_weights: weights,
        converged: conv_w && conv_v,
    })
}

/// Residuals where each row is predicted by coefficients fitted with that
/// row's fold held out. Folds are assigned round-robin by row index.
fn cross_fit_residuals(
    data: &Dataset,
    columns: &[Vec<f64>],
    folds: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.n();
    if folds < 2 || folds > n / 2 {
        return Err(Error::Config(format!(
            "cross-fitting needs 2 <= folds <= n/2, got {folds} with n = {n}"
        )));
    }
    let mut w_hat = vec![0.0; n];
    let mut v_hat = vec![0.0; n];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let held: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
        let train_cols: Vec<Vec<f64>> = columns
            .iter()
            .map(|col| train.iter().map(|&i| col[i]).collect())
            .collect();
        let weights = penalty_weights(&train_cols, true);
        let y_train: Vec<f64> = train.iter().map(|&i| data.y[i]).collect();
        let z_train: Vec<f64> = train.iter().map(|&i| data.z[i]).collect();
        let (lw, _) = fit_one(&train_cols, &weights, &y_train)?;
        let (lv, _) = fit_one(&train_cols, &weights, &z_train)?;
        for &i in &held {
            let mut fit_w = 0.0;
            let mut fit_v = 0.0;
            for (k, col) in columns.iter().enumerate() {
                fit_w += col[i] * lw[k];
                fit_v += col[i] * lv[k];
            }
            w_hat[i] = data.y[i] - fit_w;
            v_hat[i] = data.z[i] - fit_v;
        }
    }
    Ok((w_hat, v_hat))
}

/// Evaluate the fitted conditional mean psi(s)' lambda at a new location.
pub fn predict_conditional_mean(
    fit: &ResidualFit,
    spec: &BasisSpec,
    loc: LocationRef<'_>,
    target: Target,
) -> Result<f64> {
    let phi = eval_basis(spec, loc)?;
    let lambda = match target {
        Target::Outcome => &fit.lambda_w,
        Target::Exposure => &fit.lambda_v,
    };
    if lambda.len() != phi.values.len() + 1 {
        return Err(Error::Config(format!(
            "fit has {} coefficients but the basis produces {} + intercept",
            lambda.len(),
            phi.values.len()
        )));
    }
    Ok(lambda[0] + phi.values.iter().zip(&lambda[1..]).map(|(&p, &l)| p * l).sum::<f64>())
}
