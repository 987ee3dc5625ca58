//! Seeded synthetic-data generators: a Gaussian-process confounding example,
//! a two-dimensional heterogeneous-effect experiment, a discrete five-region
//! experiment, and a residual-level errors-in-variables experiment.
//!
//! Every generator is a pure function of (config, seed). The random stream
//! is a single ChaCha8 generator consumed in a fixed, documented order —
//! locations first, then nuisance coefficients/fields, then exposure noise,
//! then outcome noise (residual-level configs instead draw the clean and
//! error parts of the exposure residual). Changing that order changes every
//! seeded dataset, so it is part of the output contract.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{
    basis_matrix, eval_basis, AxisBounds, BasisLevel, BasisSpec, LocationRef, Locations,
    SpaceDomain,
};
use crate::error::{Error, Result};
use crate::kernel::{cholesky_with_jitter, MaternKernel};
use crate::residualize::Dataset;

/// True effect surface tau(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectFn {
    /// tau == 0 everywhere.
    Zero,
    /// tau == value everywhere.
    Constant { value: f64 },
    /// One full cosine cycle across a continuous 1-D axis,
    /// tau(s) = cos(2 pi (s - lower) / range); over d discrete regions a
    /// half cycle, tau(s) = cos(pi s / d) (so the last region sits at -1).
    Cosine1d,
    /// tau(s) = cos(2 pi (s1 + s2) / period) over a continuous 2-D domain.
    Cosine2d { period: f64 },
    /// tau(s) = phi(s)' theta0 over an explicit basis.
    Parametric { theta0: Vec<f64>, spec: BasisSpec },
}

/// Spatial nuisance beta(s) (the confounder when it also drives exposure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuisanceFn {
    /// beta == 0.
    None,
    /// A Gaussian-process draw with Matérn-3/2 covariance. The smooth
    /// component is sampled once and shared wherever the confounder
    /// appears; the white-noise component has no consistent point values
    /// (evaluations of a white-noise process never correlate), so it is
    /// drawn independently for the outcome and exposure equations.
    GpMatern { kernel: MaternKernel },
    /// beta(s) = phi0(s)' eta with eta ~ N(0, coefficient_scale^2 I).
    BsplineRandom { spec: BasisSpec, coefficient_scale: f64 },
    /// beta(s) = 2 - s over discrete regions.
    LinearRegion,
}

/// How the exposure mean depends on the spatial structure:
/// E[z|s] = nuisance_coef * beta(s) + effect_coef * tau(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureLink {
    pub nuisance_coef: f64,
    pub effect_coef: f64,
}

/// Where sample locations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationScheme {
    /// Uniform draws over the domain (continuous box or region labels).
    UniformRandom,
    /// n evenly spaced points across a continuous 1-D axis (no draws).
    EvenGrid,
}

/// Full description of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub domain: SpaceDomain,
    pub effect: EffectFn,
    pub nuisance: NuisanceFn,
    pub exposure_link: ExposureLink,
    pub noise_sd_y: f64,
    pub noise_sd_z: f64,
    pub n: usize,
    pub seed: u64,
    pub locations: LocationScheme,
    /// When set, the generator emits residual-level data: the outcome slot
    /// holds w_hat = tau(s) (v_hat + v_tilde) and the exposure slot holds
    /// v_hat, with v_hat, v_tilde i.i.d. standard normal.
    pub residual_injection: bool,
}

/// A generated dataset together with everything needed to score it.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub data: Dataset,
    pub truth: Truth,
}

/// Ground truth recorded by the generator.
#[derive(Debug, Clone)]
pub struct Truth {
    pub domain: SpaceDomain,
    pub effect: EffectFn,
    /// Nuisance/confounder values entering the outcome equation, per row.
    pub beta: Vec<f64>,
    /// Outcome noise draws, per row (zero for residual-level data).
    pub epsilon: Vec<f64>,
    /// Coefficients of a parametric effect, when the effect has them.
    pub theta0: Option<Vec<f64>>,
    /// Random nuisance coefficients, when the nuisance has them.
    pub eta: Option<Vec<f64>>,
    /// Injected exposure-residual errors, for residual-level data.
    pub v_tilde: Option<Vec<f64>>,
    /// True when data holds (w_hat, v_hat) instead of (y, z).
    pub residual_level: bool,
}

impl Truth {
    /// Evaluate the true effect at a location.
    pub fn tau_at(&self, loc: LocationRef<'_>) -> Result<f64> {
        effect_value(&self.effect, &self.domain, loc)
    }
}

fn effect_value(effect: &EffectFn, domain: &SpaceDomain, loc: LocationRef<'_>) -> Result<f64> {
    if !domain.contains(loc) {
        return Err(Error::OutOfDomain(format!("{loc:?} is outside the generator domain")));
    }
    Ok(match (effect, loc) {
        (EffectFn::Zero, _) => 0.0,
        (EffectFn::Constant { value }, _) => *value,
        (EffectFn::Cosine1d, LocationRef::Continuous(c)) => {
            let b = match domain {
                SpaceDomain::Continuous { bounds } => bounds[0],
                SpaceDomain::Discrete { .. } => unreachable!("domain checked above"),
            };
            (2.0 * std::f64::consts::PI * (c[0] - b.lower) / b.range()).cos()
        }
        (EffectFn::Cosine1d, LocationRef::Discrete(region)) => {
            let d = match domain {
                SpaceDomain::Discrete { d } => *d as f64,
                SpaceDomain::Continuous { .. } => unreachable!("domain checked above"),
            };
            (std::f64::consts::PI * region as f64 / d).cos()
        }
        (EffectFn::Cosine2d { period }, LocationRef::Continuous(c)) => {
            (2.0 * std::f64::consts::PI * (c[0] + c[1]) / period).cos()
        }
        (EffectFn::Parametric { theta0, spec }, loc) => {
            let phi = eval_basis(spec, loc)?;
            phi.values.iter().zip(theta0).map(|(&p, &t)| p * t).sum()
        }
        (EffectFn::Cosine2d { .. }, LocationRef::Discrete(_)) => {
            return Err(Error::Config("a 2-D cosine effect needs a continuous domain".into()))
        }
    })
}

fn validate(config: &SynthConfig) -> Result<()> {
    if config.n < 1 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(config.noise_sd_y >= 0.0) || !(config.noise_sd_z >= 0.0) {
        return Err(Error::Config("noise standard deviations must be non-negative".into()));
    }
    match &config.effect {
        EffectFn::Parametric { theta0, spec } => {
            if spec.domain() != &config.domain {
                return Err(Error::Config(
                    "parametric effect basis domain differs from the generator domain".into(),
                ));
            }
            if theta0.len() != spec.d_theta() {
                return Err(Error::Config(format!(
                    "effect has {} coefficients for a basis of dimension {}",
                    theta0.len(),
                    spec.d_theta()
                )));
            }
        }
        EffectFn::Cosine2d { period } => {
            if !(period > &0.0) {
                return Err(Error::Config("cosine period must be positive".into()));
            }
            if config.domain.dim() != 2 || matches!(config.domain, SpaceDomain::Discrete { .. })
            {
                return Err(Error::Config(
                    "a 2-D cosine effect needs a continuous 2-D domain".into(),
                ));
            }
        }
        EffectFn::Cosine1d => {
            if let SpaceDomain::Continuous { bounds } = &config.domain {
                if bounds.len() != 1 {
                    return Err(Error::Config(
                        "a 1-D cosine effect needs a 1-D (or discrete) domain".into(),
                    ));
                }
            }
        }
        _ => {}
    }
    match &config.nuisance {
        NuisanceFn::BsplineRandom { spec, coefficient_scale } => {
            if spec.domain() != &config.domain {
                return Err(Error::Config(
                    "nuisance basis domain differs from the generator domain".into(),
                ));
            }
            if !(coefficient_scale >= &0.0) {
                return Err(Error::Config("coefficient scale must be non-negative".into()));
            }
        }
        NuisanceFn::GpMatern { .. } => {
            if matches!(config.domain, SpaceDomain::Discrete { .. }) {
                return Err(Error::Config(
                    "a Gaussian-process nuisance needs a continuous domain".into(),
                ));
            }
        }
        NuisanceFn::LinearRegion => {
            if matches!(config.domain, SpaceDomain::Continuous { .. }) {
                return Err(Error::Config(
                    "the linear-by-region nuisance needs a discrete domain".into(),
                ));
            }
        }
        NuisanceFn::None => {}
    }
    if config.locations == LocationScheme::EvenGrid {
        match &config.domain {
            SpaceDomain::Continuous { bounds } if bounds.len() == 1 => {}
            _ => {
                return Err(Error::Config(
                    "an even location grid is defined for continuous 1-D domains only".into(),
                ))
            }
        }
    }
    Ok(())
}

fn draw_locations(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Locations> {
    let n = config.n;
    match (&config.domain, config.locations) {
        (SpaceDomain::Continuous { bounds }, LocationScheme::UniformRandom) => {
            let dim = bounds.len();
            let mut coords = Vec::with_capacity(n * dim);
            for _ in 0..n {
                for b in bounds {
                    coords.push(b.lower + b.range() * rng.random::<f64>());
                }
            }
            Locations::continuous(dim, coords)
        }
        (SpaceDomain::Continuous { bounds }, LocationScheme::EvenGrid) => {
            let b = bounds[0];
            let coords = if n == 1 {
                vec![b.lower]
            } else {
                (0..n)
                    .map(|i| b.lower + b.range() * i as f64 / (n - 1) as f64)
                    .collect()
            };
            Locations::continuous(1, coords)
        }
        (SpaceDomain::Discrete { d }, LocationScheme::UniformRandom) => {
            let regions = (0..n).map(|_| rng.random_range(1..=*d)).collect();
            Locations::discrete(*d, regions)
        }
        (SpaceDomain::Discrete { .. }, LocationScheme::EvenGrid) => unreachable!(
            "rejected by validate()"
        ),
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Nuisance values per row for the outcome and exposure equations, plus any
/// random coefficients drawn along the way. Both equations see the same
/// confounder function, so `beta_y` and `beta_z` coincide; they are kept as
/// separate fields so a future generator variant can decouple them.
struct NuisanceDraw {
    beta_y: Vec<f64>,
    beta_z: Vec<f64>,
    eta: Option<Vec<f64>>,
}

fn draw_nuisance(
    config: &SynthConfig,
    locations: &Locations,
    rng: &mut ChaCha8Rng,
) -> Result<NuisanceDraw> {
    let n = locations.len();
    match &config.nuisance {
        NuisanceFn::None => Ok(NuisanceDraw {
            beta_y: vec![0.0; n],
            beta_z: vec![0.0; n],
            eta: None,
        }),
        NuisanceFn::GpMatern { kernel } => {
            let smooth_kernel = MaternKernel {
                lengthscale: kernel.lengthscale,
                signal_variance: kernel.signal_variance,
                noise_variance: 0.0,
            };
            let gram = smooth_kernel.smooth_gram(locations)?;
            let l = cholesky_with_jitter(&gram)?;
            let xi = nalgebra::DVector::from_vec(normals(rng, n));
            let smooth = l * xi;
            // The nugget is part of the confounder itself, so the rough
            // component is drawn once and shared by both equations.
            let sd_white = kernel.noise_variance.sqrt();
            let white = normals(rng, n);
            let beta: Vec<f64> =
                (0..n).map(|i| smooth[i] + sd_white * white[i]).collect();
            Ok(NuisanceDraw { beta_y: beta.clone(), beta_z: beta, eta: None })
        }
        NuisanceFn::BsplineRandom { spec, coefficient_scale } => {
            let d0 = spec.d_theta();
            let eta: Vec<f64> =
                normals(rng, d0).into_iter().map(|e| e * coefficient_scale).collect();
            let basis = basis_matrix(spec, locations)?;
            let beta: Vec<f64> = (0..n)
                .map(|i| basis.row(i).iter().zip(&eta).map(|(&p, &e)| p * e).sum())
                .collect();
            Ok(NuisanceDraw { beta_y: beta.clone(), beta_z: beta, eta: Some(eta) })
        }
        NuisanceFn::LinearRegion => {
            let beta: Vec<f64> = locations
                .iter()
                .map(|loc| match loc {
                    LocationRef::Discrete(r) => 2.0 - r as f64,
                    LocationRef::Continuous(_) => unreachable!("rejected by validate()"),
                })
                .collect();
            Ok(NuisanceDraw { beta_y: beta.clone(), beta_z: beta, eta: None })
        }
    }
}

/// Generate one dataset from a config. Pure in (config, seed).
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let locations = draw_locations(config, &mut rng)?;
    let n = config.n;

    let tau: Vec<f64> = locations
        .iter()
        .map(|loc| effect_value(&config.effect, &config.domain, loc))
        .collect::<Result<_>>()?;
    let theta0 = match &config.effect {
        EffectFn::Parametric { theta0, .. } => Some(theta0.clone()),
        _ => None,
    };

    if config.residual_injection {
        let v_hat = normals(&mut rng, n);
        let v_tilde = normals(&mut rng, n);
        let w_hat: Vec<f64> =
            (0..n).map(|i| tau[i] * (v_hat[i] + v_tilde[i])).collect();
        let data = Dataset::new(w_hat, v_hat, locations)?;
        return Ok(SynthOutput {
            truth: Truth {
                domain: config.domain.clone(),
                effect: config.effect.clone(),
                beta: vec![0.0; n],
                epsilon: vec![0.0; n],
                theta0,
                eta: None,
                v_tilde: Some(v_tilde),
                residual_level: true,
            },
            data,
        });
    }

    let nuisance = draw_nuisance(config, &locations, &mut rng)?;
    let z_noise = normals(&mut rng, n);
    let z: Vec<f64> = (0..n)
        .map(|i| {
            config.exposure_link.nuisance_coef * nuisance.beta_z[i]
                + config.exposure_link.effect_coef * tau[i]
                + config.noise_sd_z * z_noise[i]
        })
        .collect();
    let epsilon: Vec<f64> =
        normals(&mut rng, n).into_iter().map(|e| e * config.noise_sd_y).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| tau[i] * z[i] + nuisance.beta_y[i] + epsilon[i])
        .collect();

    let data = Dataset::new(y, z, locations)?;
    Ok(SynthOutput {
        truth: Truth {
            domain: config.domain.clone(),
            effect: config.effect.clone(),
            beta: nuisance.beta_y,
            epsilon,
            theta0,
            eta: nuisance.eta,
            v_tilde: None,
            residual_level: false,
        },
        data,
    })
}

/// Which effect the Gaussian-process example carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpCase {
    /// tau == 0: any association between y and z is pure confounding.
    FixedZero,
    /// A sign-changing cosine effect.
    Heterogeneous,
}

fn unit_interval_0_10() -> SpaceDomain {
    SpaceDomain::Continuous {
        bounds: vec![AxisBounds { lower: 0.0, upper: 10.0 }],
    }
}

/// Config of the 1-D Gaussian-process confounding example: y = tau(s) z + c(s)
/// and z = c(s) + noise, with c a Matérn-3/2 process (lengthscale 10% of the
/// range, unit signal variance, white-noise variance 0.1).
///
/// The exposure noise dominates the confounder (sd 2.1 against signal
/// variance 1), so the exposure keeps most of its variance through
/// residualization while the shared confounder still drives a clear raw
/// correlation between outcome and exposure.
pub fn gp_example_config(case: GpCase, n: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        domain: unit_interval_0_10(),
        effect: match case {
            GpCase::FixedZero => EffectFn::Zero,
            GpCase::Heterogeneous => EffectFn::Cosine1d,
        },
        nuisance: NuisanceFn::GpMatern {
            kernel: MaternKernel {
                lengthscale: 1.0,
                signal_variance: 1.0,
                noise_variance: 0.1,
            },
        },
        exposure_link: ExposureLink { nuisance_coef: 1.0, effect_coef: 0.0 },
        noise_sd_y: 0.0,
        noise_sd_z: 2.1,
        n,
        seed,
        locations: LocationScheme::UniformRandom,
        residual_injection: false,
    }
}

/// Generate the Gaussian-process confounding example.
pub fn gen_gp_example(case: GpCase, n: usize, seed: u64) -> Result<SynthOutput> {
    if n < 2 {
        return Err(Error::Config("the example needs at least 2 samples".into()));
    }
    generate(&gp_example_config(case, n, seed))
}

/// Config of the 2-D experiment: tau(s) = cos(2 pi (s1+s2) / 20) on [0,10]^2,
/// beta a random B-spline surface (10 components per axis, support 0.2 of
/// the range), z ~ N(0.5 beta(s), 1), outcome noise sd 0.2.
pub fn experiment_2d_config(n: usize, seed: u64) -> SynthConfig {
    let domain = SpaceDomain::Continuous {
        bounds: vec![
            AxisBounds { lower: 0.0, upper: 10.0 },
            AxisBounds { lower: 0.0, upper: 10.0 },
        ],
    };
    let nuisance_spec = BasisSpec::continuous(
        domain.clone(),
        vec![BasisLevel { n_components: 10, support_fraction: 0.2 }],
    )
    .expect("static nuisance basis is valid");
    SynthConfig {
        domain,
        effect: EffectFn::Cosine2d { period: 20.0 },
        nuisance: NuisanceFn::BsplineRandom { spec: nuisance_spec, coefficient_scale: 1.0 },
        exposure_link: ExposureLink { nuisance_coef: 0.5, effect_coef: 0.0 },
        noise_sd_y: 0.2,
        noise_sd_z: 1.0,
        n,
        seed,
        locations: LocationScheme::UniformRandom,
        residual_injection: false,
    }
}

/// Generate the 2-D heterogeneous-effect experiment (default n = 676).
pub fn gen_2d_experiment(n: usize, seed: u64) -> Result<SynthOutput> {
    if n < 2 {
        return Err(Error::Config("the experiment needs at least 2 samples".into()));
    }
    generate(&experiment_2d_config(n, seed))
}

/// Config of the discrete experiment over d regions:
/// tau(s) = cos(pi s / d), beta(s) = 2 - s, z ~ N(tau(s), 1), outcome noise
/// sd 0.2, locations uniform over regions.
pub fn discrete_experiment_config(n: usize, d: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        domain: SpaceDomain::Discrete { d },
        effect: EffectFn::Cosine1d,
        nuisance: NuisanceFn::LinearRegion,
        exposure_link: ExposureLink { nuisance_coef: 0.0, effect_coef: 1.0 },
        noise_sd_y: 0.2,
        noise_sd_z: 1.0,
        n,
        seed,
        locations: LocationScheme::UniformRandom,
        residual_injection: false,
    }
}

/// Generate the discrete-region experiment (defaults n = 500, d = 5).
pub fn gen_discrete_experiment(n: usize, d: usize, seed: u64) -> Result<SynthOutput> {
    if d < 1 {
        return Err(Error::Config("need at least one region".into()));
    }
    if n < d {
        return Err(Error::Config(format!("need n >= d, got n = {n}, d = {d}")));
    }
    generate(&discrete_experiment_config(n, d, seed))
}

/// Basis used by the errors-in-variables experiment: d_theta components on
/// [0, 10] with supports 4 cells wide, which makes the components a
/// partition of unity.
pub fn eiv_basis(d_theta: usize) -> Result<BasisSpec> {
    BasisSpec::continuous(
        unit_interval_0_10(),
        vec![BasisLevel {
            n_components: d_theta,
            support_fraction: 4.0 / d_theta as f64,
        }],
    )
}

/// Config of the errors-in-variables experiment with an explicit theta0:
/// residual-level data w_hat = tau(s)(v_hat + v_tilde) at n evenly spaced
/// locations on [0, 10], with v_hat, v_tilde i.i.d. standard normal.
pub fn eiv_config(theta0: Vec<f64>, n: usize, seed: u64) -> Result<SynthConfig> {
    let spec = eiv_basis(theta0.len())?;
    Ok(SynthConfig {
        domain: unit_interval_0_10(),
        effect: EffectFn::Parametric { theta0, spec },
        nuisance: NuisanceFn::None,
        exposure_link: ExposureLink { nuisance_coef: 0.0, effect_coef: 0.0 },
        noise_sd_y: 0.0,
        noise_sd_z: 0.0,
        n,
        seed,
        locations: LocationScheme::EvenGrid,
        residual_injection: true,
    })
}

/// The effect coefficients theta0 ~ N(0, I) the errors-in-variables
/// experiment draws from a seed, exposed so repeated simulations can hold
/// them fixed while the data seed varies.
pub fn eiv_theta0(d_theta: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normals(&mut rng, d_theta)
}

/// Offset applied to the experiment seed before data generation, so theta0
/// and the sample draws never share a stream.
pub const EIV_DATA_SEED_OFFSET: u64 = 0x9e3779b97f4a7c15;

/// Generate the errors-in-variables experiment (defaults n = 41,
/// d_theta = 10), drawing theta0 ~ N(0, I) first from the same seed.
pub fn gen_eiv_experiment(n: usize, d_theta: usize, seed: u64) -> Result<SynthOutput> {
    if n < 2 {
        return Err(Error::Config("the experiment needs at least 2 samples".into()));
    }
    let theta0 = eiv_theta0(d_theta, seed);
    // The sample draws use an offset stream so theta0 and the noise do not
    // alias when the experiment is replicated with nearby seeds.
    let config = eiv_config(theta0, n, seed.wrapping_add(EIV_DATA_SEED_OFFSET))?;
    generate(&config)
}
