//! Effect estimators: the robust orthogonalized estimator (the method this
//! crate is named for) and the comparison baselines — joint least squares,
//! per-region least squares, and a GLS estimator with a spatial-random-effect
//! working covariance.
//!
//! The robust estimator regresses outcome residuals on exposure-scaled basis
//! columns under a weighted square-root LASSO. The weights are exactly the
//! per-coordinate second-moment bounds of the design-error uncertainty set,
//! so the penalized program is the closed-form solution of the minimax
//! problem over that set: the fit is worst-case robust to errors in the
//! estimated residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{basis_matrix, eval_basis, BasisSpec, LocationRef, Locations, SpaceDomain};
use crate::error::{Error, Result};
use crate::kernel::{cholesky_with_jitter, MaternKernel};
use crate::residualize::{penalty_weights, Dataset, ResidualFit};
use crate::sqrtlasso::{self, Problem, SolveOptions};

/// Which estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rosce,
    DirectLs,
    NaiveRegionLs,
    GlsSre,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rosce => "rosce",
            Self::DirectLs => "direct_ls",
            Self::NaiveRegionLs => "naive_region_ls",
            Self::GlsSre => "gls_sre",
        }
    }
}

/// How a model maps locations to effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum EffectBasis {
    /// tau(s) = phi(s)' theta over the given basis.
    Spatial { spec: BasisSpec },
    /// A single location-independent coefficient (theta has length 1).
    Constant { domain: SpaceDomain },
}

/// A fitted effect model tau_hat(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectModel {
    pub method: Method,
    pub basis: EffectBasis,
    pub theta: Vec<f64>,
    /// Per-coordinate second-moment bounds of the residual-error uncertainty
    /// set (equal to the penalty weights); empty for non-robust fits.
    pub delta_bounds: Vec<f64>,
    /// True when rank deficiency forced the least-squares fit onto a ridge.
    pub ridge_fallback: bool,
    /// Coordinates whose design column had zero mass; their coefficients
    /// are pinned at 0 and carry no information.
    pub dead_coordinates: Vec<usize>,
}

impl EffectModel {
    /// Evaluate tau_hat at one location.
    pub fn effect_at(&self, loc: LocationRef<'_>) -> Result<f64> {
        match &self.basis {
            EffectBasis::Spatial { spec } => {
                let phi = eval_basis(spec, loc)?;
                Ok(phi.values.iter().zip(&self.theta).map(|(&p, &t)| p * t).sum())
            }
            EffectBasis::Constant { domain } => {
                if !domain.contains(loc) {
                    return Err(Error::OutOfDomain(format!("{loc:?} is outside the domain")));
                }
                Ok(self.theta[0])
            }
        }
    }

    /// Evaluate tau_hat on a whole set of locations.
    pub fn effect_curve(&self, grid: &Locations) -> Result<Vec<f64>> {
        grid.iter().map(|loc| self.effect_at(loc)).collect()
    }
}

/// Exposure-scaled basis columns: column k holds v_hat_i * phi_k(s_i).
fn residual_design(
    fit: &ResidualFit,
    locations: &Locations,
    spec: &BasisSpec,
) -> Result<Vec<Vec<f64>>> {
    let n = locations.len();
    if fit.v_hat.len() != n || fit.w_hat.len() != n {
        return Err(Error::Data(format!(
            "residuals have length {} but there are {n} locations",
            fit.v_hat.len()
        )));
    }
    let basis = basis_matrix(spec, locations)?;
    let mut columns = vec![vec![0.0; n]; basis.d];
    for i in 0..n {
        let v = fit.v_hat[i];
        let row = basis.row(i);
        for (k, col) in columns.iter_mut().enumerate() {
            col[i] = v * row[k];
        }
    }
    Ok(columns)
}

/// Robust orthogonalized fit: weighted square-root LASSO of w_hat on the
/// exposure-scaled basis, with weights equal to the per-coordinate bounds
/// of the design-error uncertainty set.
pub fn fit_rosce(
    fit: &ResidualFit,
    locations: &Locations,
    spec: &BasisSpec,
) -> Result<EffectModel> {
    let rms_v = {
        let n = fit.v_hat.len() as f64;
        (fit.v_hat.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    };
    if rms_v == 0.0 {
        return Err(Error::DegenerateExposure(
            "exposure residuals are identically zero; no variation left to identify an effect"
                .into(),
        ));
    }
    let columns = residual_design(fit, locations, spec)?;
    let weights = penalty_weights(&columns, false);
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateExposure(
            "every design column has zero mass; exposure residuals vanish on the basis support"
                .into(),
        ));
    }
    let dead_coordinates: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w == 0.0)
        .map(|(k, _)| k)
        .collect();

    let problem = Problem::new(&columns, &fit.w_hat, &weights)?;
    let solution = sqrtlasso::solve(&problem, &SolveOptions::default())?;
    Ok(EffectModel {
        method: Method::Rosce,
        basis: EffectBasis::Spatial { spec: spec.clone() },
        theta: solution.theta,
        delta_bounds: weights,
        ridge_fallback: false,
        dead_coordinates,
    })
}

/// Unpenalized least squares on the same exposure-scaled design the robust
/// fit uses; the least-squares comparator for residual-level data.
pub fn fit_ls_on_residuals(
    fit: &ResidualFit,
    locations: &Locations,
    spec: &BasisSpec,
) -> Result<EffectModel> {
    let columns = residual_design(fit, locations, spec)?;
    let (theta, ridge_fallback) = ls_solve(&columns, &fit.w_hat)?;
    Ok(EffectModel {
        method: Method::DirectLs,
        basis: EffectBasis::Spatial { spec: spec.clone() },
        theta,
        delta_bounds: Vec::new(),
        ridge_fallback,
        dead_coordinates: Vec::new(),
    })
}

/// Joint least squares of the outcome on exposure-scaled and plain basis
/// columns — estimating the effect and the spatial nuisance together in one
/// unpenalized regression.
pub fn fit_direct_ls(data: &Dataset, spec: &BasisSpec) -> Result<EffectModel> {
    let basis = basis_matrix(spec, &data.locations)?;
    let n = basis.n;
    let d = basis.d;
    let mut columns = vec![vec![0.0; n]; 2 * d];
    for i in 0..n {
        let row = basis.row(i);
        let z = data.z[i];
        for k in 0..d {
            columns[k][i] = z * row[k];
            columns[d + k][i] = row[k];
        }
    }
    let (coefs, ridge_fallback) = ls_solve(&columns, &data.y)?;
    Ok(EffectModel {
        method: Method::DirectLs,
        basis: EffectBasis::Spatial { spec: spec.clone() },
        theta: coefs[..d].to_vec(),
        delta_bounds: Vec::new(),
        ridge_fallback,
        dead_coordinates: Vec::new(),
    })
}

/// Least squares via thin QR; falls back to a ridge solve (scale 1e-10)
/// when the triangular factor is numerically rank deficient or the system
/// is underdetermined. Returns the coefficients and whether the ridge was
/// engaged.
fn ls_solve(columns: &[Vec<f64>], response: &[f64]) -> Result<(Vec<f64>, bool)> {
    let n = response.len();
    let p = columns.len();
    let x = DMatrix::from_fn(n, p, |i, k| columns[k][i]);
    let y = DVector::from_column_slice(response);
    if n >= p {
        let qr = x.clone().qr();
        let r = qr.r();
        let mut max_diag = 0.0f64;
        let mut min_diag = f64::INFINITY;
        for k in 0..p {
            let v = r[(k, k)].abs();
            max_diag = max_diag.max(v);
            min_diag = min_diag.min(v);
        }
        if max_diag > 0.0 && min_diag > 1e-10 * max_diag {
            let qty = qr.q().transpose() * &y;
            if let Some(sol) = r.solve_upper_triangular(&qty) {
                return Ok((sol.iter().copied().collect(), false));
            }
        }
    }
    // Rank-deficient or underdetermined: ridge-regularized normal equations.
    let mut gram = x.transpose() * &x;
    let scale = gram.diagonal().max();
    let ridge = 1e-10 * scale.max(1.0);
    for k in 0..p {
        gram[(k, k)] += ridge;
    }
    let rhs = x.transpose() * &y;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge-regularized normal equations not solvable".into()))?;
    let sol = chol.solve(&rhs);
    Ok((sol.iter().copied().collect(), true))
}

/// Per-region least-squares fit with per-region standard errors.
#[derive(Debug, Clone)]
pub struct NaiveRegionFit {
    pub model: EffectModel,
    /// Standard error of each region's slope.
    pub std_errs: Vec<f64>,
}

/// Region-by-region no-intercept least squares of y on z: the regression a
/// practitioner might run per region, blind to spatial confounding.
pub fn fit_naive_region_ls(data: &Dataset) -> Result<NaiveRegionFit> {
    let (d, regions) = match &data.locations {
        Locations::Discrete { d, regions } => (*d, regions),
        Locations::Continuous { .. } => {
            return Err(Error::Config(
                "per-region least squares requires a discrete domain".into(),
            ))
        }
    };
    let mut counts = vec![0usize; d];
    let mut sum_zz = vec![0.0; d];
    let mut sum_yz = vec![0.0; d];
    for (i, &r) in regions.iter().enumerate() {
        let k = r - 1;
        counts[k] += 1;
        sum_zz[k] += data.z[i] * data.z[i];
        sum_yz[k] += data.y[i] * data.z[i];
    }
    let empty: Vec<usize> = (0..d).filter(|&k| counts[k] == 0).map(|k| k + 1).collect();
    if !empty.is_empty() {
        return Err(Error::MissingRegions(empty));
    }
    let mut theta = vec![0.0; d];
    for k in 0..d {
        if sum_zz[k] == 0.0 {
            return Err(Error::DegenerateExposure(format!(
                "exposure is identically zero in region {}",
                k + 1
            )));
        }
        theta[k] = sum_yz[k] / sum_zz[k];
    }
    // Residual variance per region, one fitted parameter.
    let mut rss = vec![0.0; d];
    for (i, &r) in regions.iter().enumerate() {
        let k = r - 1;
        let e = data.y[i] - theta[k] * data.z[i];
        rss[k] += e * e;
    }
    let std_errs = (0..d)
        .map(|k| {
            let dof = counts[k].saturating_sub(1).max(1) as f64;
            (rss[k] / dof / sum_zz[k]).sqrt()
        })
        .collect();
    Ok(NaiveRegionFit {
        model: EffectModel {
            method: Method::NaiveRegionLs,
            basis: EffectBasis::Spatial { spec: BasisSpec::discrete(d)? },
            theta,
            delta_bounds: Vec::new(),
            ridge_fallback: false,
            dead_coordinates: Vec::new(),
        },
        std_errs,
    })
}

/// GLS fit of a single constant effect with a standard error.
#[derive(Debug, Clone)]
pub struct GlsFit {
    pub model: EffectModel,
    pub std_err: f64,
}

/// Constant-effect GLS with a spatial-random-effect working covariance:
/// the outcome is modeled as theta * z plus correlated noise with the given
/// kernel's covariance, and theta is the generalized-least-squares slope
///
/// ```text
///   theta_hat = (z' K^-1 z)^-1 z' K^-1 y .
/// ```
///
/// The standard error scales the working covariance by the GLS residual
/// variance, mirroring common practice.
///
/// The fitted constant is attached to `domain` when one is given (so it can
/// be evaluated anywhere the caller considers in scope); otherwise to the
/// bounding box of the data.
pub fn fit_gls_sre(
    data: &Dataset,
    kernel: &MaternKernel,
    domain: Option<SpaceDomain>,
) -> Result<GlsFit> {
    let domain = match (&data.locations, domain) {
        (Locations::Continuous { .. }, Some(domain @ SpaceDomain::Continuous { .. })) => {
            if !data.locations.matches_domain(&domain)
                || !data.locations.iter().all(|loc| domain.contains(loc))
            {
                return Err(Error::Config(
                    "the supplied domain does not contain the data locations".into(),
                ));
            }
            domain
        }
        (Locations::Continuous { dim, coords }, None) => {
            let mut bounds = Vec::with_capacity(*dim);
            for ax in 0..*dim {
                let axis: Vec<f64> =
                    coords.iter().skip(ax).step_by(*dim).copied().collect();
                let lo = axis.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = axis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                bounds.push(crate::basis::AxisBounds::new(lo, hi.max(lo + f64::EPSILON))?);
            }
            SpaceDomain::continuous(bounds)?
        }
        (Locations::Continuous { .. }, Some(SpaceDomain::Discrete { .. })) => {
            return Err(Error::Config(
                "continuous locations need a continuous domain".into(),
            ))
        }
        (Locations::Discrete { .. }, _) => {
            return Err(Error::Config(
                "the GLS baseline is defined over continuous locations".into(),
            ))
        }
    };
    let n = data.n();
    let gram = kernel.gram(&data.locations)?;
    let l = cholesky_with_jitter(&gram)?;
    // Whitened variables: solve L u = x so u' u = x' K^-1 x.
    let solve_lower = |x: &[f64]| -> DVector<f64> {
        let v = DVector::from_column_slice(x);
        l.solve_lower_triangular(&v)
            .expect("triangular factor from a successful Cholesky is invertible")
    };
    let zw = solve_lower(&data.z);
    let yw = solve_lower(&data.y);
    let ztz = zw.dot(&zw);
    if ztz <= 0.0 {
        return Err(Error::DegenerateExposure(
            "exposure is identically zero; the GLS slope is undefined".into(),
        ));
    }
    let theta = zw.dot(&yw) / ztz;
    let resid = &yw - &zw * theta;
    let dof = (n.saturating_sub(1)).max(1) as f64;
    let sigma2 = resid.dot(&resid) / dof;
    let std_err = (sigma2 / ztz).sqrt();
    Ok(GlsFit {
        model: EffectModel {
            method: Method::GlsSre,
            basis: EffectBasis::Constant { domain },
            theta: vec![theta],
            delta_bounds: Vec::new(),
            ridge_fallback: false,
            dead_coordinates: Vec::new(),
        },
        std_err,
    })
}
