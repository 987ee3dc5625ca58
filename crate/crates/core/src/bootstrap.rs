//! Pivotal bootstrap confidence bands for the fitted effect curve, and
//! Monte Carlo dispersion summaries over repeated draws from a synthetic
//! data-generating process.
//!
//! Replicates are embarrassingly parallel. Each replicate r derives its own
//! child seed as `mix64(seed XOR (r+1) * 0x9e3779b97f4a7c15)` (the splitmix64
//! finalizer), drives a private ChaCha8 stream with it, and results are
//! reduced in replicate order — so output is bitwise identical across runs
//! and thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{basis_matrix, BasisMatrix, BasisSpec, Locations};
use crate::error::{Error, Result};
use crate::estimator::{fit_direct_ls, fit_ls_on_residuals, fit_rosce, EffectModel};
use crate::residualize::{fit_residuals, Dataset, ResidualFit};
use crate::synth::{generate, SynthConfig};

/// Base seed plus the documented replicate-to-stream splitting rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleSeed {
    pub seed: u64,
}

impl ResampleSeed {
    /// Child seed for replicate `index`: the splitmix64 finalizer applied to
    /// `seed XOR (index+1) * phi64`. Indexing from 1 keeps replicate 0 from
    /// echoing the base seed.
    pub fn child(&self, index: u64) -> u64 {
        mix64(self.seed ^ (index.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Estimation pipelines that can be refitted per resample or simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Residualize, then the robust penalized fit.
    Rosce,
    /// The least-squares analogue for the data form: joint least squares on
    /// raw data, plain least squares on the exposure-scaled design for
    /// residual-level data.
    Ls,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rosce => "rosce",
            Self::Ls => "ls",
        }
    }
}

/// Bootstrap configuration.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    /// Number of bootstrap replicates B.
    pub replicates: usize,
    /// Miscoverage level; the band has nominal coverage 1 - alpha.
    pub alpha: f64,
    pub seed: ResampleSeed,
    /// Refit the nuisance regressions inside every replicate (propagates
    /// their estimation uncertainty); false reuses the full-sample
    /// coefficients and only refits the effect.
    pub refit_nuisance: bool,
    /// Keep the full replicate-by-grid matrix for audits.
    pub keep_replicates: bool,
    /// Treat (y, z) as residuals already orthogonal to space, skipping the
    /// residualization stage everywhere.
    pub data_are_residuals: bool,
    /// Which pipeline to band.
    pub estimator: Estimator,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            alpha: 0.05,
            seed: ResampleSeed { seed: 0 },
            refit_nuisance: true,
            keep_replicates: false,
            data_are_residuals: false,
            estimator: Estimator::Rosce,
        }
    }
}

/// Pointwise confidence band on a query grid.
#[derive(Debug, Clone)]
pub struct CIBand {
    pub grid: Locations,
    /// Effect fitted on the original sample (not the bootstrap mean).
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nominal coverage 1 - alpha.
    pub level: f64,
    pub replicates: usize,
    /// Replicate-by-grid effect values, when kept.
    pub replicate_matrix: Option<Vec<Vec<f64>>>,
}

/// Maximum resampling attempts per replicate before giving up (bounding
/// total draws at 10 B).
const MAX_ATTEMPTS_PER_REPLICATE: usize = 10;

/// Linearly interpolated empirical quantile (the common "type 7" rule:
/// h = (n-1) p split into an index and a fraction) of already sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Pivotal interval per grid point from a replicate-by-grid matrix:
/// [2 point - q_{1-alpha/2}, 2 point - q_{alpha/2}].
pub fn pivotal_band(
    point: &[f64],
    replicate_matrix: &[Vec<f64>],
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if replicate_matrix.is_empty() {
        return Err(Error::Config("no replicates to form a band from".into()));
    }
    let g = point.len();
    let mut lower = vec![0.0; g];
    let mut upper = vec![0.0; g];
    let mut column = vec![0.0; replicate_matrix.len()];
    for j in 0..g {
        for (r, row) in replicate_matrix.iter().enumerate() {
            column[r] = row[j];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        let q_lo = quantile_sorted(&column, alpha / 2.0);
        let q_hi = quantile_sorted(&column, 1.0 - alpha / 2.0);
        lower[j] = 2.0 * point[j] - q_hi;
        upper[j] = 2.0 * point[j] - q_lo;
    }
    Ok((lower, upper))
}

/// Evaluate a fitted effect on a precomputed grid basis.
fn effect_on_grid(model: &EffectModel, grid_basis: &BasisMatrix) -> Vec<f64> {
    (0..grid_basis.n)
        .map(|i| {
            grid_basis
                .row(i)
                .iter()
                .zip(&model.theta)
                .map(|(&p, &t)| p * t)
                .sum()
        })
        .collect()
}

/// Wrap residual-level data as an identity residual fit: the columns are the
/// residuals, the nuisance coefficients are all zero.
fn identity_residual_fit(data: &Dataset, d_theta: usize) -> ResidualFit {
    ResidualFit {
        lambda_w: vec![0.0; d_theta + 1],
        lambda_v: vec![0.0; d_theta + 1],
        w_hat: data.y.clone(),
        v_hat: data.z.clone(),
        penalty_weights: vec![0.0; d_theta + 1],
        converged: true,
    }
}

/// Fit one pipeline on one dataset. `nuisance` carries residuals already
/// computed for this exact dataset, when the caller has them.
pub(crate) fn fit_pipeline(
    estimator: Estimator,
    data: &Dataset,
    spec: &BasisSpec,
    residual_level: bool,
    nuisance: Option<&ResidualFit>,
) -> Result<EffectModel> {
    match (estimator, residual_level) {
        (Estimator::Ls, false) => fit_direct_ls(data, spec),
        (estimator, _) => {
            let owned;
            let fit = match nuisance {
                Some(fit) => fit,
                None if residual_level => {
                    owned = identity_residual_fit(data, spec.d_theta());
                    &owned
                }
                None => {
                    owned = fit_residuals(data, spec)?;
                    &owned
                }
            };
            match estimator {
                Estimator::Rosce => fit_rosce(fit, &data.locations, spec),
                Estimator::Ls => fit_ls_on_residuals(fit, &data.locations, spec),
            }
        }
    }
}

/// Pivotal bootstrap band for the robust effect estimate.
///
/// Each replicate resamples whole (y, z, s) rows with replacement and
/// reruns the pipeline (nuisance refit included unless disabled). A
/// replicate that lands on degenerate-exposure data is redrawn from its own
/// stream, up to 10 attempts.
pub fn bootstrap_band(
    data: &Dataset,
    spec: &BasisSpec,
    grid: &Locations,
    options: &BootstrapOptions,
) -> Result<CIBand> {
    if options.replicates < 100 {
        return Err(Error::Config(format!(
            "need at least 100 replicates for a quantile band, got {}",
            options.replicates
        )));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 1), got {}",
            options.alpha
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty query grid".into()));
    }

    // Full-sample fit gives the band's center. The residuals are kept when
    // frozen-nuisance replicates will gather from them.
    let base_nuisance = if !options.data_are_residuals && options.estimator == Estimator::Rosce
    {
        Some(fit_residuals(data, spec)?)
    } else {
        None
    };
    let base_model = fit_pipeline(
        options.estimator,
        data,
        spec,
        options.data_are_residuals,
        base_nuisance.as_ref(),
    )?;
    let grid_basis = basis_matrix(spec, grid)?;
    let point = effect_on_grid(&base_model, &grid_basis);

    let n = data.n();
    let replicate_matrix: Vec<Vec<f64>> = (0..options.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.child(r));
            let mut indices = vec![0usize; n];
            for attempt in 0.. {
                for slot in indices.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                let resampled = data.gather(&indices);
                let frozen = match &base_nuisance {
                    Some(base) if !options.refit_nuisance => Some(ResidualFit {
                        lambda_w: base.lambda_w.clone(),
                        lambda_v: base.lambda_v.clone(),
                        w_hat: indices.iter().map(|&i| base.w_hat[i]).collect(),
                        v_hat: indices.iter().map(|&i| base.v_hat[i]).collect(),
                        penalty_weights: base.penalty_weights.clone(),
                        converged: base.converged,
                    }),
                    _ => None,
                };
                let outcome = fit_pipeline(
                    options.estimator,
                    &resampled,
                    spec,
                    options.data_are_residuals,
                    frozen.as_ref(),
                );
                match outcome {
                    Ok(model) => return Ok(effect_on_grid(&model, &grid_basis)),
                    Err(Error::DegenerateExposure(_))
                        if attempt + 1 < MAX_ATTEMPTS_PER_REPLICATE => {}
                    Err(Error::DegenerateExposure(msg)) => {
                        return Err(Error::DegenerateExposure(format!(
                            "replicate {r} stayed degenerate over \
                             {MAX_ATTEMPTS_PER_REPLICATE} attempts: {msg}"
                        )))
                    }
                    Err(other) => return Err(other),
                }
            }
            unreachable!("the attempt loop either returns or errors")
        })
        .collect::<Result<_>>()?;

    let (lower, upper) = pivotal_band(&point, &replicate_matrix, options.alpha)?;
    Ok(CIBand {
        grid: grid.clone(),
        point,
        lower,
        upper,
        level: 1.0 - options.alpha,
        replicates: options.replicates,
        replicate_matrix: options.keep_replicates.then_some(replicate_matrix),
    })
}

/// Per-location quantile band of effect estimates across simulations.
#[derive(Debug, Clone)]
pub struct McBand {
    pub method: Estimator,
    pub q_lo: Vec<f64>,
    pub q_hi: Vec<f64>,
}

/// Dispersion of effect estimates over independent draws from a DGP.
#[derive(Debug, Clone)]
pub struct McDispersion {
    pub grid: Locations,
    /// True effect on the grid, from the generator's own truth.
    pub truth: Vec<f64>,
    pub bands: Vec<McBand>,
    pub sims: usize,
    pub quantiles: (f64, f64),
}

/// Simulate `sims` datasets from the DGP (child seed per simulation), fit
/// each requested estimator with the given basis, and return per-location
/// empirical quantiles of the fitted effect.
pub fn mc_dispersion(
    dgp: &SynthConfig,
    spec: &BasisSpec,
    methods: &[Estimator],
    sims: usize,
    quantiles: (f64, f64),
    grid: &Locations,
    seed: ResampleSeed,
) -> Result<McDispersion> {
    if sims < 1 {
        return Err(Error::Config("need at least one simulation".into()));
    }
    let (q_lo, q_hi) = quantiles;
    if !(0.0..=1.0).contains(&q_lo) || !(0.0..=1.0).contains(&q_hi) || q_lo >= q_hi {
        return Err(Error::Config(format!(
            "quantiles must satisfy 0 <= lo < hi <= 1, got ({q_lo}, {q_hi})"
        )));
    }
    if methods.is_empty() {
        return Err(Error::Config("no estimators requested".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty query grid".into()));
    }
    let grid_basis = basis_matrix(spec, grid)?;

    // One truth evaluation up front; the effect surface is part of the DGP,
    // not of any single simulation.
    let probe = generate(&SynthConfig { seed: seed.child(0), ..dgp.clone() })?;
    let truth = grid
        .iter()
        .map(|loc| probe.truth.tau_at(loc))
        .collect::<Result<Vec<f64>>>()?;

    // sims x methods x grid effect values.
    let all: Vec<Vec<Vec<f64>>> = (0..sims as u64)
        .into_par_iter()
        .map(|sim| -> Result<Vec<Vec<f64>>> {
            let config = SynthConfig { seed: seed.child(sim), ..dgp.clone() };
            let out = generate(&config)?;
            let residual_level = out.truth.residual_level;
            // Residuals are shared across the estimators that use them.
            let nuisance = if !residual_level && methods.contains(&Estimator::Rosce) {
                Some(fit_residuals(&out.data, spec)?)
            } else {
                None
            };
            methods
                .iter()
                .map(|&method| -> Result<Vec<f64>> {
                    let model = fit_pipeline(
                        method,
                        &out.data,
                        spec,
                        residual_level,
                        nuisance.as_ref(),
                    )?;
                    Ok(effect_on_grid(&model, &grid_basis))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let g = grid.len();
    let bands = methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let mut lo = vec![0.0; g];
            let mut hi = vec![0.0; g];
            let mut column = vec![0.0; sims];
            for j in 0..g {
                for (sim_values, slot) in all.iter().zip(column.iter_mut()) {
                    *slot = sim_values[m][j];
                }
                column.sort_by(|a, b| a.total_cmp(b));
                lo[j] = quantile_sorted(&column, q_lo);
                hi[j] = quantile_sorted(&column, q_hi);
            }
            McBand { method, q_lo: lo, q_hi: hi }
        })
        .collect();

    Ok(McDispersion { grid: grid.clone(), truth, bands, sims, quantiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{AxisBounds, BasisLevel, SpaceDomain};
    use crate::synth::{
        discrete_experiment_config, eiv_config, EffectFn, ExposureLink, LocationScheme,
        NuisanceFn,
    };

    fn line_spec(n_components: usize, support_fraction: f64) -> BasisSpec {
        let domain =
            SpaceDomain::continuous(vec![AxisBounds::new(0.0, 10.0).unwrap()]).unwrap();
        BasisSpec::continuous(domain, vec![BasisLevel { n_components, support_fraction }])
            .unwrap()
    }

    /// Simple no-confounding DGP: constant effect, exogenous exposure.
    fn plain_config(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            domain: SpaceDomain::continuous(vec![AxisBounds::new(0.0, 10.0).unwrap()])
                .unwrap(),
            effect: EffectFn::Constant { value: 0.8 },
            nuisance: NuisanceFn::None,
            exposure_link: ExposureLink { nuisance_coef: 0.0, effect_coef: 0.0 },
            noise_sd_y: 0.5,
            noise_sd_z: 1.0,
            n,
            seed,
            locations: LocationScheme::UniformRandom,
            residual_injection: false,
        }
    }

    #[test]
    fn child_seeds_are_distinct_and_stable() {
        let seed = ResampleSeed { seed: 42 };
        let a: Vec<u64> = (0..100).map(|i| seed.child(i)).collect();
        let b: Vec<u64> = (0..100).map(|i| seed.child(i)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100, "child seeds collide");
        assert_ne!(seed.child(0), 42, "replicate 0 echoes the base seed");
    }

    #[test]
    fn quantiles_match_a_from_scratch_oracle() {
        // Oracle written directly from the interpolation definition,
        // structured differently from the production code.
        fn oracle(values: &[f64], p: f64) -> f64 {
            let mut v = values.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = p * (v.len() as f64 - 1.0);
            let below = idx.floor() as usize;
            let above = idx.ceil() as usize;
            if below == above {
                v[below]
            } else {
                v[below] * (above as f64 - idx) + v[above] * (idx - below as f64)
            }
        }

        struct Mix(u64);
        impl Mix {
            fn next(&mut self) -> f64 {
                self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
                let z = mix64(self.0);
                (z >> 11) as f64 / (1u64 << 53) as f64
            }
        }
        let mut mix = Mix(3);
        for n in [200, 201] {
            let values: Vec<f64> = (0..n).map(|_| mix.next() * 10.0 - 5.0).collect();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            for p in [0.025, 0.05, 0.5, 0.95, 0.975] {
                let got = quantile_sorted(&sorted, p);
                let want = oracle(&values, p);
                assert!(
                    (got - want).abs() < 1e-12,
                    "n={n}, p={p}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn constant_replicates_collapse_the_band_onto_the_point() {
        let point = vec![0.4, -0.2];
        let replicate_matrix = vec![vec![0.4, -0.2]; 150];
        let (lower, upper) = pivotal_band(&point, &replicate_matrix, 0.05).unwrap();
        assert_eq!(lower, point);
        assert_eq!(upper, point);
    }

    #[test]
    fn widening_the_level_never_narrows_the_band() {
        struct Mix(u64);
        impl Mix {
            fn next(&mut self) -> f64 {
                self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
                (mix64(self.0) >> 11) as f64 / (1u64 << 53) as f64
            }
        }
        let mut mix = Mix(17);
        let point = vec![0.1, 0.7, -0.4];
        let replicate_matrix: Vec<Vec<f64>> =
            (0..300).map(|_| (0..3).map(|_| mix.next() * 2.0 - 1.0).collect()).collect();
        let (lo90, hi90) = pivotal_band(&point, &replicate_matrix, 0.10).unwrap();
        let (lo99, hi99) = pivotal_band(&point, &replicate_matrix, 0.01).unwrap();
        for j in 0..3 {
            assert!(lo99[j] <= lo90[j] + 1e-12);
            assert!(hi99[j] >= hi90[j] - 1e-12);
        }
    }

    #[test]
    fn band_is_reproducible_and_thread_count_independent() {
        let out = generate(&plain_config(60, 5)).unwrap();
        let spec = line_spec(4, 0.6);
        let grid = Locations::grid(
            &[AxisBounds::new(0.0, 10.0).unwrap()],
            9,
        )
        .unwrap();
        let options = BootstrapOptions {
            replicates: 120,
            seed: ResampleSeed { seed: 9 },
            ..Default::default()
        };

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| bootstrap_band(&out.data, &spec, &grid, &options).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.point, b.point);
        assert_eq!(a.lower, b.lower);
        assert_eq!(a.upper, b.upper);

        let c = run(2);
        assert_eq!(a.lower, c.lower);

        for j in 0..a.point.len() {
            assert!(a.lower[j] <= a.upper[j]);
        }
        assert_eq!(a.level, 0.95);
    }

    #[test]
    fn pivotal_and_percentile_bands_share_their_width() {
        let out = generate(&plain_config(80, 2)).unwrap();
        let spec = line_spec(4, 0.6);
        let grid = Locations::grid(&[AxisBounds::new(0.0, 10.0).unwrap()], 5).unwrap();
        let options = BootstrapOptions {
            replicates: 150,
            keep_replicates: true,
            seed: ResampleSeed { seed: 31 },
            ..Default::default()
        };
        let band = bootstrap_band(&out.data, &spec, &grid, &options).unwrap();
        let matrix = band.replicate_matrix.as_ref().unwrap();
        assert_eq!(matrix.len(), 150);
        for j in 0..grid.len() {
            let mut col: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
            col.sort_by(|a, b| a.total_cmp(b));
            let q_lo = quantile_sorted(&col, 0.025);
            let q_hi = quantile_sorted(&col, 0.975);
            let pivotal_width = band.upper[j] - band.lower[j];
            assert!((pivotal_width - (q_hi - q_lo)).abs() < 1e-12);
            // Reflected around the point estimate.
            assert!((band.lower[j] - (2.0 * band.point[j] - q_hi)).abs() < 1e-12);
        }
    }

    #[test]
    fn nuisance_refit_flag_changes_the_band() {
        let config = discrete_experiment_config(120, 3, 7);
        let out = generate(&config).unwrap();
        let spec = BasisSpec::discrete(3).unwrap();
        let grid = Locations::all_regions(3).unwrap();
        let full = bootstrap_band(
            &out.data,
            &spec,
            &grid,
            &BootstrapOptions { replicates: 150, seed: ResampleSeed { seed: 1 }, ..Default::default() },
        )
        .unwrap();
        let frozen = bootstrap_band(
            &out.data,
            &spec,
            &grid,
            &BootstrapOptions {
                replicates: 150,
                seed: ResampleSeed { seed: 1 },
                refit_nuisance: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(full.point, frozen.point, "the center never depends on the flag");
        assert_ne!(full.lower, frozen.lower);
    }

    #[test]
    fn rejects_bad_options() {
        let out = generate(&plain_config(30, 1)).unwrap();
        let spec = line_spec(4, 0.6);
        let grid = Locations::grid(&[AxisBounds::new(0.0, 10.0).unwrap()], 3).unwrap();
        let mut options = BootstrapOptions { replicates: 50, ..Default::default() };
        assert!(bootstrap_band(&out.data, &spec, &grid, &options).is_err());
        options.replicates = 100;
        options.alpha = 0.0;
        assert!(bootstrap_band(&out.data, &spec, &grid, &options).is_err());
    }

    #[test]
    fn single_simulation_collapses_the_quantiles() {
        let theta0 = vec![0.5, -0.3, 0.8, 0.1, -0.6, 0.2, 0.9, -0.2, 0.4, 0.0];
        let dgp = eiv_config(theta0, 41, 3).unwrap();
        let spec = crate::synth::eiv_basis(10).unwrap();
        let grid = Locations::grid(&[AxisBounds::new(0.0, 10.0).unwrap()], 11).unwrap();
        let disp = mc_dispersion(
            &dgp,
            &spec,
            &[Estimator::Rosce, Estimator::Ls],
            1,
            (0.05, 0.95),
            &grid,
            ResampleSeed { seed: 4 },
        )
        .unwrap();
        assert_eq!(disp.bands.len(), 2);
        for band in &disp.bands {
            assert_eq!(band.q_lo, band.q_hi);
        }
        // Truth on the grid comes from theta0 itself.
        assert_eq!(disp.truth.len(), 11);
    }

    #[test]
    fn dispersion_is_deterministic_and_ordered() {
        let dgp = discrete_experiment_config(100, 4, 6);
        let spec = BasisSpec::discrete(4).unwrap();
        let grid = Locations::all_regions(4).unwrap();
        let run = || {
            mc_dispersion(
                &dgp,
                &spec,
                &[Estimator::Rosce],
                12,
                (0.05, 0.95),
                &grid,
                ResampleSeed { seed: 11 },
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.bands[0].q_lo, b.bands[0].q_lo);
        assert_eq!(a.bands[0].q_hi, b.bands[0].q_hi);
        for j in 0..4 {
            assert!(a.bands[0].q_lo[j] <= a.bands[0].q_hi[j]);
        }

        assert!(mc_dispersion(
            &dgp,
            &spec,
            &[Estimator::Rosce],
            5,
            (0.95, 0.05),
            &grid,
            ResampleSeed { seed: 11 },
        )
        .is_err());
    }

    #[test]
    fn residual_level_data_bands_both_pipelines() {
        let theta0 = vec![0.5, -0.3, 0.8, 0.1, -0.6, 0.2, 0.9, -0.2, 0.4, 0.0];
        let dgp = eiv_config(theta0, 41, 8).unwrap();
        let out = generate(&dgp).unwrap();
        assert!(out.truth.residual_level);
        let spec = crate::synth::eiv_basis(10).unwrap();
        let grid = Locations::grid(&[AxisBounds::new(0.0, 10.0).unwrap()], 11).unwrap();
        for estimator in [Estimator::Rosce, Estimator::Ls] {
            let band = bootstrap_band(
                &out.data,
                &spec,
                &grid,
                &BootstrapOptions {
                    replicates: 120,
                    seed: ResampleSeed { seed: 2 },
                    data_are_residuals: true,
                    estimator,
                    ..Default::default()
                },
            )
            .unwrap();
            for j in 0..grid.len() {
                assert!(band.lower[j] <= band.upper[j]);
                assert!(band.point[j].is_finite());
            }
        }
    }
}
