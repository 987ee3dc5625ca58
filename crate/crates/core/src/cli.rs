//! Command-line front end: data ingestion, configuration resolution,
//! pipeline orchestration, and artifact export.
//!
//! Subcommands:
//!
//! * `fit` — run one estimator end to end; writes `effect.csv`, `ci.csv`,
//!   `model.json`, and `run.json`.
//! * `synth` — write a synthetic dataset (`data.csv`) with its ground truth
//!   (`truth.csv`).
//! * `mc` — per-location quantiles of effect estimates over repeated
//!   simulated datasets (`mc.csv`).
//! * `baselines` — every baseline the data's domain supports, in one table
//!   (`baselines.csv`).
//!
//! Contract:
//!
//! * Exit codes: 0 success; 2 configuration or data-schema problems (with
//!   line/column diagnostics); 3 degenerate exposure; 4 numerical failure.
//! * stdout carries exactly one machine-readable JSON summary line; all
//!   diagnostics go to stderr.
//! * Artifact writes are atomic (write to a temp file, then rename).
//! * Reruns with the same seed produce byte-identical artifacts regardless
//!   of thread count. Set the worker count with the `ROSCE_THREADS`
//!   environment variable.
//!
//! Accepted CSV schemas (header required, any column order): `y,z,s1` for a
//! continuous line, `y,z,s1,s2` for a continuous plane, and `y,z,region`
//! with 1-based integer region labels. A JSON file passed via `--config`
//! can hold the same settings as the flags (plus a custom `basis` and
//! `gls_kernel`); explicit flags win.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::basis::{AxisBounds, BasisLevel, BasisSpec, Locations, SpaceDomain};
use crate::bootstrap::{
    bootstrap_band, fit_pipeline, mc_dispersion, BootstrapOptions, Estimator, ResampleSeed,
};
use crate::error::{Error, Result};
use crate::estimator::{fit_gls_sre, fit_naive_region_ls, Method};
use crate::kernel::MaternKernel;
use crate::residualize::Dataset;
use crate::synth::{self, GpCase, SynthConfig, SynthOutput};

/// Parse the process arguments, run the selected command, and map any error
/// to its exit code (2 config/data, 3 degenerate exposure, 4 numerical).
pub fn run() -> u8 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Data(_) | Error::OutOfDomain(_) | Error::MissingRegions(_) => {
            2
        }
        Error::DegenerateExposure(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn execute(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Baselines(args) => cmd_baselines(args),
    }
}

/// Honor ROSCE_THREADS for the worker pool. Outputs never depend on the
/// pool shape, so a pool that already exists is left alone.
fn init_threads() -> Result<()> {
    match std::env::var("ROSCE_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let threads: usize = raw
                .trim()
                .parse()
                .ok()
                .filter(|&t| t >= 1)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "ROSCE_THREADS must be a positive integer, got '{raw}'"
                    ))
                })?;
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            Ok(())
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rosce",
    version,
    about = "Spatially varying effect estimation robust to spatial confounding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit an effect model end to end (effect.csv, ci.csv, model.json, run.json).
    Fit(FitArgs),
    /// Write a synthetic dataset (data.csv) and its ground truth (truth.csv).
    Synth(SynthArgs),
    /// Quantiles of effect estimates over repeated simulations (mc.csv).
    Mc(McArgs),
    /// Fit every baseline the data's domain supports (baselines.csv).
    Baselines(BaselinesArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// CSV dataset with headers y,z,s1 | y,z,s1,s2 | y,z,region.
    #[arg(long, value_name = "PATH", conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Built-in generator: gp-example, 2d, discrete-<d>, or eiv.
    #[arg(long, value_name = "NAME")]
    synth: Option<String>,
    /// Variant of the gp-example generator.
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Sample size for a generator.
    #[arg(long)]
    n: Option<usize>,
    /// Effect-basis dimension of the eiv generator.
    #[arg(long)]
    d_theta: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Estimator to fit.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Bootstrap replicates behind the confidence band.
    #[arg(long = "B", value_name = "COUNT")]
    replicates: Option<usize>,
    /// Miscoverage level: bands and intervals cover 1 - alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed for generators and resampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Refit nuisance regressions inside each bootstrap replicate.
    #[arg(long, value_name = "BOOL")]
    refit_nuisance: Option<bool>,
    /// Grid points per axis for continuous query grids.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Z-score the outcome and exposure columns before fitting.
    #[arg(long)]
    standardize: bool,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// JSON config with the same settings as the flags; flags win.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator name: gp-example, 2d, discrete-<d>, or eiv.
    name: String,
    /// Variant of the gp-example generator.
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Effect-basis dimension of the eiv generator.
    #[arg(long)]
    d_theta: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Generator name: gp-example, 2d, discrete-<d>, or eiv.
    name: String,
    /// Variant of the gp-example generator.
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Sample size per simulation.
    #[arg(long)]
    n: Option<usize>,
    /// Effect-basis dimension of the eiv generator.
    #[arg(long)]
    d_theta: Option<usize>,
    /// Number of simulated datasets.
    #[arg(long)]
    sims: Option<usize>,
    /// Estimators to compare, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<EstimatorArg>>,
    /// Lower and upper quantile, comma separated (default 0.05,0.95).
    #[arg(long, value_name = "LO,HI")]
    quantiles: Option<String>,
    /// Master seed; each simulation derives a child seed from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per axis for continuous query grids.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselinesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Miscoverage level for the analytic intervals.
    #[arg(long)]
    alpha: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per axis for continuous query grids.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Z-score the outcome and exposure columns before fitting.
    #[arg(long)]
    standardize: bool,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// JSON config with the same settings as the flags; flags win.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    Rosce,
    DirectLs,
    NaiveRegionLs,
    GlsSre,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Rosce => Method::Rosce,
            MethodArg::DirectLs => Method::DirectLs,
            MethodArg::NaiveRegionLs => Method::NaiveRegionLs,
            MethodArg::GlsSre => Method::GlsSre,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CaseArg {
    FixedZero,
    Heterogeneous,
}

impl From<CaseArg> for GpCase {
    fn from(value: CaseArg) -> Self {
        match value {
            CaseArg::FixedZero => GpCase::FixedZero,
            CaseArg::Heterogeneous => GpCase::Heterogeneous,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EstimatorArg {
    Rosce,
    Ls,
}

impl From<EstimatorArg> for Estimator {
    fn from(value: EstimatorArg) -> Self {
        match value {
            EstimatorArg::Rosce => Estimator::Rosce,
            EstimatorArg::Ls => Estimator::Ls,
        }
    }
}

/// Optional JSON config mirroring the flags, plus settings with no flag
/// form (a custom basis and the GLS working kernel). Unknown keys are
/// rejected.
#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    synth: Option<String>,
    case: Option<String>,
    n: Option<usize>,
    d_theta: Option<usize>,
    method: Option<String>,
    basis: Option<BasisSpec>,
    replicates: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    refit_nuisance: Option<bool>,
    gls_kernel: Option<MaternKernel>,
    grid_points: Option<usize>,
    standardize: Option<bool>,
    out: Option<PathBuf>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Data(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn parse_method_name(s: &str) -> Result<Method> {
    match s {
        "rosce" => Ok(Method::Rosce),
        "direct_ls" => Ok(Method::DirectLs),
        "naive_region_ls" => Ok(Method::NaiveRegionLs),
        "gls_sre" => Ok(Method::GlsSre),
        other => Err(Error::Config(format!(
            "unknown method '{other}'; expected rosce, direct_ls, naive_region_ls, or gls_sre"
        ))),
    }
}

fn parse_case_name(s: &str) -> Result<GpCase> {
    match s.replace('-', "_").as_str() {
        "fixed_zero" => Ok(GpCase::FixedZero),
        "heterogeneous" => Ok(GpCase::Heterogeneous),
        other => Err(Error::Config(format!(
            "unknown case '{other}'; expected fixed-zero or heterogeneous"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SynthName {
    GpExample,
    TwoD,
    Discrete(usize),
    Eiv,
}

impl SynthName {
    fn label(&self) -> String {
        match self {
            Self::GpExample => "gp-example".into(),
            Self::TwoD => "2d".into(),
            Self::Discrete(d) => format!("discrete-{d}"),
            Self::Eiv => "eiv".into(),
        }
    }
}

fn parse_synth_name(s: &str) -> Result<SynthName> {
    match s {
        "gp-example" => Ok(SynthName::GpExample),
        "2d" => Ok(SynthName::TwoD),
        "eiv" => Ok(SynthName::Eiv),
        other => {
            if let Some(rest) = other.strip_prefix("discrete-") {
                let d: usize = rest.parse().ok().filter(|&d| d >= 1).ok_or_else(|| {
                    Error::Config(format!(
                        "'{other}' needs a positive region count, like discrete-5"
                    ))
                })?;
                Ok(SynthName::Discrete(d))
            } else {
                Err(Error::Config(format!(
                    "unknown generator '{other}'; expected gp-example, 2d, discrete-<d>, or eiv"
                )))
            }
        }
    }
}

/// Where a command's data comes from, fully resolved.
#[derive(Clone, Debug)]
enum SourceSpec {
    Csv { path: PathBuf },
    Synth { name: SynthName, case: GpCase, n: usize, d_theta: usize, seed: u64 },
}

/// Generator parameter defaults: sizes each experiment is typically run at.
fn synth_defaults(name: SynthName) -> (usize, usize) {
    // (n, d_theta)
    match name {
        SynthName::GpExample => (300, 0),
        SynthName::TwoD => (676, 0),
        SynthName::Discrete(_) => (500, 0),
        SynthName::Eiv => (41, 10),
    }
}

fn resolve_synth(
    raw_name: &str,
    case: Option<GpCase>,
    n: Option<usize>,
    d_theta: Option<usize>,
    seed: u64,
) -> Result<SourceSpec> {
    let name = parse_synth_name(raw_name)?;
    if case.is_some() && name != SynthName::GpExample {
        return Err(Error::Config("--case only applies to gp-example".into()));
    }
    if d_theta.is_some() && name != SynthName::Eiv {
        return Err(Error::Config("--d-theta only applies to eiv".into()));
    }
    let (default_n, default_d_theta) = synth_defaults(name);
    Ok(SourceSpec::Synth {
        name,
        case: case.unwrap_or(GpCase::FixedZero),
        n: n.unwrap_or(default_n),
        d_theta: d_theta.unwrap_or(default_d_theta),
        seed,
    })
}

fn resolve_source(input: &InputArgs, file: &FileConfig, seed: u64) -> Result<SourceSpec> {
    let path = input.input.clone().or_else(|| file.input.clone());
    let synth_name = input.synth.clone().or_else(|| file.synth.clone());
    let case = match (input.case, file.case.as_deref()) {
        (Some(c), _) => Some(c.into()),
        (None, Some(s)) => Some(parse_case_name(s)?),
        (None, None) => None,
    };
    let n = input.n.or(file.n);
    let d_theta = input.d_theta.or(file.d_theta);
    match (path, synth_name) {
        (Some(_), Some(_)) => {
            Err(Error::Config("give either an input file or a generator, not both".into()))
        }
        (Some(path), None) => {
            if case.is_some() || n.is_some() || d_theta.is_some() {
                return Err(Error::Config(
                    "--case, --n, and --d-theta only apply to generators".into(),
                ));
            }
            Ok(SourceSpec::Csv { path })
        }
        (None, Some(name)) => resolve_synth(&name, case, n, d_theta, seed),
        (None, None) => {
            Err(Error::Config("an input is required: --input <csv> or --synth <name>".into()))
        }
    }
}

fn generate_named(source: &SourceSpec) -> Result<SynthOutput> {
    match source {
        SourceSpec::Csv { .. } => unreachable!("only generator sources are generated"),
        SourceSpec::Synth { name, case, n, d_theta, seed } => match name {
            SynthName::GpExample => synth::gen_gp_example(*case, *n, *seed),
            SynthName::TwoD => synth::gen_2d_experiment(*n, *seed),
            SynthName::Discrete(d) => synth::gen_discrete_experiment(*n, *d, *seed),
            SynthName::Eiv => synth::gen_eiv_experiment(*n, *d_theta, *seed),
        },
    }
}

/// The config behind a generator name, for commands that re-simulate. The
/// eiv effect coefficients are drawn once from the master seed here, so
/// varying the data seed later leaves the true effect fixed.
fn config_named(source: &SourceSpec) -> Result<SynthConfig> {
    match source {
        SourceSpec::Csv { .. } => {
            Err(Error::Config("simulation commands need a generator, not a file".into()))
        }
        SourceSpec::Synth { name, case, n, d_theta, seed } => match name {
            SynthName::GpExample => Ok(synth::gp_example_config(*case, *n, *seed)),
            SynthName::TwoD => Ok(synth::experiment_2d_config(*n, *seed)),
            SynthName::Discrete(d) => Ok(synth::discrete_experiment_config(*n, *d, *seed)),
            SynthName::Eiv => synth::eiv_config(
                synth::eiv_theta0(*d_theta, *seed),
                *n,
                seed.wrapping_add(synth::EIV_DATA_SEED_OFFSET),
            ),
        },
    }
}

/// Load the data behind a source: (dataset, data are residual-level,
/// exactly known domain when the source is a generator).
fn load_source(source: &SourceSpec) -> Result<(Dataset, bool, Option<SpaceDomain>)> {
    match source {
        SourceSpec::Csv { path } => Ok((read_dataset_csv(path)?, false, None)),
        SourceSpec::Synth { .. } => {
            let out = generate_named(source)?;
            let residual_level = out.truth.residual_level;
            let domain = out.truth.domain.clone();
            Ok((out.data, residual_level, Some(domain)))
        }
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

const SCHEMA_LINE: [&str; 3] = ["y", "z", "s1"];
const SCHEMA_PLANE: [&str; 4] = ["y", "z", "s1", "s2"];
const SCHEMA_REGION: [&str; 3] = ["y", "z", "region"];
const MAX_REGION_LABEL: u64 = 100_000;

fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let found: Vec<&str> = headers.iter().collect();

    for (i, name) in found.iter().enumerate() {
        if found[..i].contains(name) {
            return Err(Error::Data(format!(
                "{}: duplicate column '{name}' in the header",
                path.display()
            )));
        }
    }

    let schemas: [&[&str]; 3] = [&SCHEMA_LINE, &SCHEMA_PLANE, &SCHEMA_REGION];
    let matches_exactly = |schema: &[&str]| {
        schema.len() == found.len() && schema.iter().all(|c| found.contains(c))
    };
    let schema = match schemas.iter().find(|s| matches_exactly(s)) {
        Some(schema) => *schema,
        None => {
            // Diagnose against the closest schema: most shared columns,
            // then fewest missing ones.
            let best = schemas
                .iter()
                .max_by_key(|s| {
                    let shared = s.iter().filter(|c| found.contains(*c)).count();
                    let missing = s.len() - shared;
                    (shared, std::cmp::Reverse(missing))
                })
                .expect("there are candidate schemas");
            let missing: Vec<&str> =
                best.iter().filter(|c| !found.contains(*c)).copied().collect();
            let extra: Vec<&str> =
                found.iter().filter(|c| !best.contains(*c)).copied().collect();
            let mut parts = Vec::new();
            if !missing.is_empty() {
                parts.push(format!("missing column(s) {missing:?}"));
            }
            if !extra.is_empty() {
                parts.push(format!("unexpected column(s) {extra:?}"));
            }
            return Err(Error::Data(format!(
                "{}: header line 1: {}; accepted schemas are y,z,s1 | y,z,s1,s2 | y,z,region",
                path.display(),
                parts.join(" and ")
            )));
        }
    };

    let col = |name: &str| found.iter().position(|c| *c == name).expect("schema matched");
    let idx_y = col("y");
    let idx_z = col("z");
    let discrete = schema == SCHEMA_REGION;
    let dim = if discrete { 0 } else { schema.len() - 2 };
    let loc_idx: Vec<(usize, &str)> = if discrete {
        vec![(col("region"), "region")]
    } else {
        (0..dim)
            .map(|ax| {
                let name = if ax == 0 { "s1" } else { "s2" };
                (col(name), name)
            })
            .collect()
    };

    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut coords = Vec::new();
    let mut regions = Vec::new();
    for (record_index, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(record_index as u64 + 2);
        y.push(parse_numeric(path, &record, idx_y, "y", line)?);
        z.push(parse_numeric(path, &record, idx_z, "z", line)?);
        if discrete {
            regions.push(parse_region(path, &record, loc_idx[0].0, line)?);
        } else {
            for &(idx, name) in &loc_idx {
                coords.push(parse_numeric(path, &record, idx, name, line)?);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let locations = if discrete {
        let d = *regions.iter().max().expect("nonempty");
        Locations::discrete(d, regions)?
    } else {
        Locations::continuous(dim, coords)?
    };
    Dataset::new(y, z, locations)
}

fn parse_numeric(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<f64> {
    let raw = record.get(idx).ok_or_else(|| {
        Error::Data(format!("{}: line {line}: missing field '{name}'", path.display()))
    })?;
    let value: f64 = raw.parse().map_err(|_| {
        Error::Data(format!(
            "{}: line {line}, column '{name}': cannot parse '{raw}' as a number",
            path.display()
        ))
    })?;
    if !value.is_finite() {
        return Err(Error::Data(format!(
            "{}: line {line}, column '{name}': non-finite value '{raw}'",
            path.display()
        )));
    }
    Ok(value)
}

/// Region labels are 1-based, in files and in memory alike.
fn parse_region(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
) -> Result<usize> {
    let raw = record.get(idx).ok_or_else(|| {
        Error::Data(format!("{}: line {line}: missing field 'region'", path.display()))
    })?;
    let label: u64 = raw.parse().map_err(|_| {
        Error::Data(format!(
            "{}: line {line}, column 'region': cannot parse '{raw}' as a region label",
            path.display()
        ))
    })?;
    if label == 0 {
        return Err(Error::Data(format!(
            "{}: line {line}, column 'region': region labels are 1-based",
            path.display()
        )));
    }
    if label > MAX_REGION_LABEL {
        return Err(Error::Data(format!(
            "{}: line {line}, column 'region': label {label} exceeds the supported \
             maximum {MAX_REGION_LABEL}",
            path.display()
        )));
    }
    Ok(label as usize)
}

// ---------------------------------------------------------------------------
// Shared resolution helpers

/// The domain a run works over: the generator's own domain when the data is
/// synthetic, otherwise the data's bounding box (or region count).
fn data_domain(data: &Dataset, generator_domain: Option<&SpaceDomain>) -> Result<SpaceDomain> {
    if let Some(domain) = generator_domain {
        return Ok(domain.clone());
    }
    match &data.locations {
        Locations::Continuous { dim, coords } => {
            SpaceDomain::continuous(bounding_box(*dim, coords)?)
        }
        Locations::Discrete { d, .. } => Ok(SpaceDomain::Discrete { d: *d }),
    }
}

fn bounding_box(dim: usize, coords: &[f64]) -> Result<Vec<AxisBounds>> {
    (0..dim)
        .map(|ax| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in coords.iter().skip(ax).step_by(dim) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            AxisBounds::new(lo, hi).map_err(|_| {
                Error::Data(format!(
                    "axis {} has no spatial extent (every value is {lo})",
                    ax + 1
                ))
            })
        })
        .collect()
}

/// Default estimation basis: three resolutions of 10 components per axis
/// over a continuous domain, indicators over a discrete one, and the
/// partition-of-unity line basis for residual-level generator data.
fn default_basis(source: &SourceSpec, domain: &SpaceDomain) -> Result<BasisSpec> {
    if let SourceSpec::Synth { name: SynthName::Eiv, d_theta, .. } = source {
        return synth::eiv_basis(*d_theta);
    }
    match domain {
        SpaceDomain::Discrete { d } => BasisSpec::discrete(*d),
        SpaceDomain::Continuous { .. } => BasisSpec::continuous(
            domain.clone(),
            vec![
                BasisLevel { n_components: 10, support_fraction: 0.2 },
                BasisLevel { n_components: 10, support_fraction: 0.4 },
                BasisLevel { n_components: 10, support_fraction: 0.85 },
            ],
        ),
    }
}

/// A query grid, in a form that serializes into run.json and rebuilds the
/// exact locations.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Continuous { bounds: Vec<[f64; 2]>, points_per_axis: usize },
    Discrete { d: usize },
}

impl GridSpec {
    pub fn from_domain(domain: &SpaceDomain, points_per_axis: usize) -> Self {
        match domain {
            SpaceDomain::Continuous { bounds } => Self::Continuous {
                bounds: bounds.iter().map(|b| [b.lower, b.upper]).collect(),
                points_per_axis,
            },
            SpaceDomain::Discrete { d } => Self::Discrete { d: *d },
        }
    }

    pub fn build(&self) -> Result<Locations> {
        match self {
            Self::Continuous { bounds, points_per_axis } => {
                let bounds: Vec<AxisBounds> = bounds
                    .iter()
                    .map(|[lo, hi]| AxisBounds::new(*lo, *hi))
                    .collect::<Result<_>>()?;
                Locations::grid(&bounds, *points_per_axis)
            }
            Self::Discrete { d } => Locations::all_regions(*d),
        }
    }
}

/// Applied z-scoring, recorded so downstream results can be mapped back to
/// data units.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StandardizeRecord {
    pub y_mean: f64,
    pub y_sd: f64,
    pub z_mean: f64,
    pub z_sd: f64,
}

fn zscore(values: &mut [f64]) -> Option<(f64, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return None;
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Some((mean, sd))
}

fn apply_standardize(data: &mut Dataset) -> Result<StandardizeRecord> {
    let (y_mean, y_sd) = zscore(&mut data.y).ok_or_else(|| {
        Error::Data("the outcome column is constant; standardization is undefined".into())
    })?;
    let (z_mean, z_sd) = zscore(&mut data.z).ok_or_else(|| {
        Error::DegenerateExposure("the exposure column is constant".into())
    })?;
    Ok(StandardizeRecord { y_mean, y_sd, z_mean, z_sd })
}

/// Inverse standard-normal CDF (rational approximation, relative error
/// below 1.2e-9), for analytic intervals at arbitrary levels.
fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

// ---------------------------------------------------------------------------
// Artifact writing

struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn create(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    /// Atomic write: the final name appears only with complete contents.
    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| Error::Data(format!("cannot stage {name}: {e}")))?;
        tmp.write_all(bytes)
            .map_err(|e| Error::Data(format!("cannot write {name}: {e}")))?;
        tmp.persist(self.dir.join(name))
            .map_err(|e| Error::Data(format!("cannot publish {name}: {e}")))?;
        Ok(())
    }
}

fn csv_bytes<I>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| Error::Data(format!("csv assembly failed: {e}")))?;
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::Data(format!("csv assembly failed: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Data(format!("csv assembly failed: {e}")))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Shortest round-trip decimal form; parsing it back recovers the bits.
fn num(v: f64) -> String {
    format!("{v}")
}

fn loc_headers(locations: &Locations) -> Vec<&'static str> {
    match locations {
        Locations::Continuous { dim, .. } => match dim {
            1 => vec!["s1"],
            2 => vec!["s1", "s2"],
            _ => vec!["s1", "s2", "s3"],
        },
        Locations::Discrete { .. } => vec!["region"],
    }
}

fn loc_cells(locations: &Locations, i: usize) -> Vec<String> {
    match locations {
        Locations::Continuous { dim, coords } => {
            (0..*dim).map(|ax| num(coords[i * dim + ax])).collect()
        }
        Locations::Discrete { regions, .. } => vec![regions[i].to_string()],
    }
}

fn summary_line(value: serde_json::Value) {
    println!("{value}");
}

// ---------------------------------------------------------------------------
// fit

fn cmd_fit(args: FitArgs) -> Result<()> {
    let file = load_file_config(args.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let source = resolve_source(&args.input, &file, seed)?;
    let method = match (args.method, file.method.as_deref()) {
        (Some(m), _) => m.into(),
        (None, Some(s)) => parse_method_name(s)?,
        (None, None) => Method::Rosce,
    };
    let replicates = args.replicates.or(file.replicates).unwrap_or(1000);
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    let refit_nuisance = args.refit_nuisance.or(file.refit_nuisance).unwrap_or(true);
    let grid_points = args.grid_points.or(file.grid_points).unwrap_or(101);
    let standardize = args.standardize || file.standardize.unwrap_or(false);
    let gls_kernel = file.gls_kernel.clone().unwrap_or(MaternKernel {
        lengthscale: 1.0,
        signal_variance: 1.0,
        noise_variance: 0.1,
    });
    let out_dir = args
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("rosce_out"));

    let (mut data, residual_level, generator_domain) = load_source(&source)?;
    if residual_level && matches!(method, Method::NaiveRegionLs | Method::GlsSre) {
        return Err(Error::Config(format!(
            "the {} baseline needs raw outcome/exposure data, but this generator \
             emits residual-level data",
            method.name()
        )));
    }
    let standardize_record =
        if standardize { Some(apply_standardize(&mut data)?) } else { None };

    let domain = data_domain(&data, generator_domain.as_ref())?;
    let basis = match &file.basis {
        Some(spec) => spec.clone(),
        None => default_basis(&source, &domain)?,
    };
    let grid_spec = GridSpec::from_domain(&domain, grid_points);
    let grid = grid_spec.build()?;

    let (model, ci_rows, used_bootstrap) = match method {
        Method::Rosce | Method::DirectLs => {
            let estimator =
                if method == Method::Rosce { Estimator::Rosce } else { Estimator::Ls };
            let options = BootstrapOptions {
                replicates,
                alpha,
                seed: ResampleSeed { seed },
                refit_nuisance,
                keep_replicates: false,
                data_are_residuals: residual_level,
                estimator,
            };
            let band = bootstrap_band(&data, &basis, &grid, &options)?;
            let model = fit_pipeline(estimator, &data, &basis, residual_level, None)?;
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    let mut row = loc_cells(&grid, i);
                    row.push(num(band.point[i]));
                    row.push(num(band.lower[i]));
                    row.push(num(band.upper[i]));
                    row
                })
                .collect();
            (model, rows, true)
        }
        Method::NaiveRegionLs => {
            let fit = fit_naive_region_ls(&data)?;
            let q = normal_quantile(1.0 - alpha / 2.0);
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    let mut row = loc_cells(&grid, i);
                    let estimate = fit.model.theta[i];
                    let se = fit.std_errs[i];
                    row.push(num(estimate));
                    row.push(num(estimate - q * se));
                    row.push(num(estimate + q * se));
                    row
                })
                .collect();
            (fit.model, rows, false)
        }
        Method::GlsSre => {
            let fit = fit_gls_sre(&data, &gls_kernel, Some(domain.clone()))?;
            let q = normal_quantile(1.0 - alpha / 2.0);
            let estimate = fit.model.theta[0];
            let (lo, hi) = (estimate - q * fit.std_err, estimate + q * fit.std_err);
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    let mut row = loc_cells(&grid, i);
                    row.push(num(estimate));
                    row.push(num(lo));
                    row.push(num(hi));
                    row
                })
                .collect();
            (fit.model, rows, false)
        }
    };

    let curve = model.effect_curve(&grid)?;
    let out = OutDir::create(out_dir.clone())?;
    let mut effect_header = loc_headers(&grid);
    effect_header.push("tau_hat");
    let effect_rows = (0..grid.len()).map(|i| {
        let mut row = loc_cells(&grid, i);
        row.push(num(curve[i]));
        row
    });
    out.write("effect.csv", &csv_bytes(&effect_header, effect_rows)?)?;

    let mut ci_header = loc_headers(&grid);
    ci_header.extend(["estimate", "lower", "upper"]);
    out.write("ci.csv", &csv_bytes(&ci_header, ci_rows)?)?;

    out.write("model.json", &json_bytes(&model)?)?;

    let run_record = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "fit",
        "input": source_json(&source),
        "method": method.name(),
        "basis": serde_json::to_value(&basis)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
        "grid": serde_json::to_value(&grid_spec)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
        "bootstrap": if used_bootstrap {
            json!({
                "replicates": replicates,
                "alpha": alpha,
                "seed": seed,
                "refit_nuisance": refit_nuisance,
            })
        } else {
            json!(null)
        },
        "alpha": alpha,
        "gls_kernel": if method == Method::GlsSre {
            serde_json::to_value(&gls_kernel)
                .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?
        } else {
            serde_json::Value::Null
        },
        "standardize": standardize_record,
        "residual_level": residual_level,
    });
    out.write("run.json", &json_bytes(&run_record)?)?;

    summary_line(json!({
        "command": "fit",
        "method": method.name(),
        "n": data.n(),
        "d_theta": model.theta.len(),
        "ridge_fallback": model.ridge_fallback,
        "dead_coordinates": model.dead_coordinates.len(),
        "grid_size": grid.len(),
        "out_dir": out_dir.display().to_string(),
        "artifacts": ["effect.csv", "ci.csv", "model.json", "run.json"],
    }));
    Ok(())
}

fn source_json(source: &SourceSpec) -> serde_json::Value {
    match source {
        SourceSpec::Csv { path } => json!({
            "kind": "csv",
            "path": path.display().to_string(),
        }),
        SourceSpec::Synth { name, case, n, d_theta, seed } => json!({
            "kind": "synth",
            "name": name.label(),
            "case": if *name == SynthName::GpExample {
                json!(match case {
                    GpCase::FixedZero => "fixed-zero",
                    GpCase::Heterogeneous => "heterogeneous",
                })
            } else {
                json!(null)
            },
            "n": n,
            "d_theta": if *name == SynthName::Eiv { json!(d_theta) } else { json!(null) },
            "seed": seed,
        }),
    }
}

// ---------------------------------------------------------------------------
// synth

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    let source =
        resolve_synth(&args.name, args.case.map(Into::into), args.n, args.d_theta, seed)?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("rosce_out"));
    let generated = generate_named(&source)?;
    let data = &generated.data;
    let truth = &generated.truth;

    let out = OutDir::create(out_dir.clone())?;
    let (data_header, truth_header): (Vec<&str>, Vec<&str>) = if truth.residual_level {
        (vec!["w_hat", "v_hat", "s"], vec!["s", "tau"])
    } else {
        let mut dh = vec!["y", "z"];
        dh.extend(loc_headers(&data.locations));
        let mut th = loc_headers(&data.locations);
        th.extend(["tau", "beta"]);
        (dh, th)
    };

    let data_rows = (0..data.n()).map(|i| {
        let mut row = vec![num(data.y[i]), num(data.z[i])];
        row.extend(loc_cells(&data.locations, i));
        row
    });
    out.write("data.csv", &csv_bytes(&data_header, data_rows)?)?;

    let mut truth_rows = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let tau = truth.tau_at(data.locations.get(i))?;
        let mut row = loc_cells(&data.locations, i);
        row.push(num(tau));
        if !truth.residual_level {
            row.push(num(truth.beta[i]));
        }
        truth_rows.push(row);
    }
    out.write("truth.csv", &csv_bytes(&truth_header, truth_rows)?)?;

    let run_record = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "synth",
        "input": source_json(&source),
        "residual_level": truth.residual_level,
    });
    out.write("run.json", &json_bytes(&run_record)?)?;

    summary_line(json!({
        "command": "synth",
        "name": source_label(&source),
        "n": data.n(),
        "residual_level": truth.residual_level,
        "out_dir": out_dir.display().to_string(),
        "artifacts": ["data.csv", "truth.csv", "run.json"],
    }));
    Ok(())
}

fn source_label(source: &SourceSpec) -> String {
    match source {
        SourceSpec::Csv { path } => path.display().to_string(),
        SourceSpec::Synth { name, .. } => name.label(),
    }
}

// ---------------------------------------------------------------------------
// mc

fn parse_quantiles(raw: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = raw.split(',').collect();
    let err = || {
        Error::Config(format!(
            "quantiles must be two comma-separated numbers like 0.05,0.95; got '{raw}'"
        ))
    };
    if parts.len() != 2 {
        return Err(err());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| err())?;
    Ok((lo, hi))
}

fn cmd_mc(args: McArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    let source =
        resolve_synth(&args.name, args.case.map(Into::into), args.n, args.d_theta, seed)?;
    let sims = args.sims.unwrap_or(100);
    let methods: Vec<Estimator> = args
        .methods
        .clone()
        .map(|ms| ms.into_iter().map(Into::into).collect())
        .unwrap_or_else(|| vec![Estimator::Rosce, Estimator::Ls]);
    let quantiles = match &args.quantiles {
        Some(raw) => parse_quantiles(raw)?,
        None => (0.05, 0.95),
    };
    let grid_points = args.grid_points.unwrap_or(101);
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("rosce_out"));

    let dgp = config_named(&source)?;
    let basis = default_basis(&source, &dgp.domain)?;
    let grid_spec = GridSpec::from_domain(&dgp.domain, grid_points);
    let grid = grid_spec.build()?;
    let dispersion = mc_dispersion(
        &dgp,
        &basis,
        &methods,
        sims,
        quantiles,
        &grid,
        ResampleSeed { seed },
    )?;

    let out = OutDir::create(out_dir.clone())?;
    let mut header = vec!["method"];
    header.extend(loc_headers(&grid));
    header.extend(["truth", "q_lo", "q_hi"]);
    let mut rows = Vec::with_capacity(methods.len() * grid.len());
    for band in &dispersion.bands {
        for i in 0..grid.len() {
            let mut row = vec![band.method.name().to_string()];
            row.extend(loc_cells(&grid, i));
            row.push(num(dispersion.truth[i]));
            row.push(num(band.q_lo[i]));
            row.push(num(band.q_hi[i]));
            rows.push(row);
        }
    }
    out.write("mc.csv", &csv_bytes(&header, rows)?)?;

    let run_record = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "mc",
        "input": source_json(&source),
        "sims": sims,
        "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "quantiles": [quantiles.0, quantiles.1],
        "seed": seed,
        "basis": serde_json::to_value(&basis)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
        "grid": serde_json::to_value(&grid_spec)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
    });
    out.write("run.json", &json_bytes(&run_record)?)?;

    summary_line(json!({
        "command": "mc",
        "name": source_label(&source),
        "sims": sims,
        "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "grid_size": grid.len(),
        "out_dir": out_dir.display().to_string(),
        "artifacts": ["mc.csv", "run.json"],
    }));
    Ok(())
}

// ---------------------------------------------------------------------------
// baselines

fn cmd_baselines(args: BaselinesArgs) -> Result<()> {
    let file = load_file_config(args.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let source = resolve_source(&args.input, &file, seed)?;
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    let grid_points = args.grid_points.or(file.grid_points).unwrap_or(101);
    let standardize = args.standardize || file.standardize.unwrap_or(false);
    let gls_kernel = file.gls_kernel.clone().unwrap_or(MaternKernel {
        lengthscale: 1.0,
        signal_variance: 1.0,
        noise_variance: 0.1,
    });
    let out_dir = args
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("rosce_out"));

    let (mut data, residual_level, generator_domain) = load_source(&source)?;
    let standardize_record =
        if standardize { Some(apply_standardize(&mut data)?) } else { None };
    let domain = data_domain(&data, generator_domain.as_ref())?;
    let basis = match &file.basis {
        Some(spec) => spec.clone(),
        None => default_basis(&source, &domain)?,
    };
    let grid_spec = GridSpec::from_domain(&domain, grid_points);
    let grid = grid_spec.build()?;
    let q = normal_quantile(1.0 - alpha / 2.0);

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut ran: Vec<&'static str> = Vec::new();

    // Joint least squares runs everywhere (on residual-level data it is
    // plain least squares on the exposure-scaled design).
    let direct = fit_pipeline(Estimator::Ls, &data, &basis, residual_level, None)?;
    let direct_curve = direct.effect_curve(&grid)?;
    for i in 0..grid.len() {
        let mut row = vec!["direct_ls".to_string()];
        row.extend(loc_cells(&grid, i));
        row.push(num(direct_curve[i]));
        row.extend([String::new(), String::new(), String::new()]);
        rows.push(row);
    }
    ran.push("direct_ls");

    if !residual_level {
        match &domain {
            SpaceDomain::Continuous { .. } => {
                let fit = fit_gls_sre(&data, &gls_kernel, Some(domain.clone()))?;
                let estimate = fit.model.theta[0];
                let (lo, hi) = (estimate - q * fit.std_err, estimate + q * fit.std_err);
                for i in 0..grid.len() {
                    let mut row = vec!["gls_sre".to_string()];
                    row.extend(loc_cells(&grid, i));
                    row.push(num(estimate));
                    row.push(num(fit.std_err));
                    row.push(num(lo));
                    row.push(num(hi));
                    rows.push(row);
                }
                ran.push("gls_sre");
            }
            SpaceDomain::Discrete { .. } => {
                let fit = fit_naive_region_ls(&data)?;
                for i in 0..grid.len() {
                    let estimate = fit.model.theta[i];
                    let se = fit.std_errs[i];
                    let mut row = vec!["naive_region_ls".to_string()];
                    row.extend(loc_cells(&grid, i));
                    row.push(num(estimate));
                    row.push(num(se));
                    row.push(num(estimate - q * se));
                    row.push(num(estimate + q * se));
                    rows.push(row);
                }
                ran.push("naive_region_ls");
            }
        }
    }

    let out = OutDir::create(out_dir.clone())?;
    let mut header = vec!["method"];
    header.extend(loc_headers(&grid));
    header.extend(["estimate", "std_err", "lower", "upper"]);
    out.write("baselines.csv", &csv_bytes(&header, rows)?)?;

    let run_record = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "baselines",
        "input": source_json(&source),
        "methods": ran,
        "alpha": alpha,
        "basis": serde_json::to_value(&basis)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
        "gls_kernel": if ran.contains(&"gls_sre") {
            serde_json::to_value(&gls_kernel)
                .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?
        } else {
            serde_json::Value::Null
        },
        "grid": serde_json::to_value(&grid_spec)
            .map_err(|e| Error::Data(format!("json assembly failed: {e}")))?,
        "standardize": standardize_record,
        "residual_level": residual_level,
        "seed": seed,
    });
    out.write("run.json", &json_bytes(&run_record)?)?;

    summary_line(json!({
        "command": "baselines",
        "methods": ran,
        "n": data.n(),
        "grid_size": grid.len(),
        "out_dir": out_dir.display().to_string(),
        "artifacts": ["baselines.csv", "run.json"],
    }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_names_parse_and_reject() {
        assert_eq!(parse_synth_name("gp-example").unwrap(), SynthName::GpExample);
        assert_eq!(parse_synth_name("2d").unwrap(), SynthName::TwoD);
        assert_eq!(parse_synth_name("discrete-5").unwrap(), SynthName::Discrete(5));
        assert_eq!(parse_synth_name("eiv").unwrap(), SynthName::Eiv);
        assert!(parse_synth_name("discrete-0").is_err());
        assert!(parse_synth_name("discrete-x").is_err());
        assert!(parse_synth_name("nope").is_err());
    }

    #[test]
    fn method_and_case_names_parse() {
        assert_eq!(parse_method_name("rosce").unwrap(), Method::Rosce);
        assert_eq!(parse_method_name("direct_ls").unwrap(), Method::DirectLs);
        assert_eq!(parse_method_name("naive_region_ls").unwrap(), Method::NaiveRegionLs);
        assert_eq!(parse_method_name("gls_sre").unwrap(), Method::GlsSre);
        assert!(parse_method_name("ols").is_err());
        assert!(matches!(parse_case_name("fixed-zero").unwrap(), GpCase::FixedZero));
        assert!(matches!(parse_case_name("fixed_zero").unwrap(), GpCase::FixedZero));
        assert!(matches!(parse_case_name("heterogeneous").unwrap(), GpCase::Heterogeneous));
        assert!(parse_case_name("other").is_err());
    }

    #[test]
    fn normal_quantile_matches_reference_values() {
        // Reference values of the standard normal inverse CDF.
        let cases = [
            (0.5, 0.0),
            (0.975, 1.959963984540054),
            (0.95, 1.6448536269514722),
            (0.995, 2.5758293035489004),
            (0.025, -1.959963984540054),
            (0.01, -2.3263478740408408),
        ];
        for (p, want) in cases {
            let got = normal_quantile(p);
            assert!((got - want).abs() < 2e-8, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn quantile_pairs_parse() {
        assert_eq!(parse_quantiles("0.05,0.95").unwrap(), (0.05, 0.95));
        assert_eq!(parse_quantiles(" 0.1 , 0.9 ").unwrap(), (0.1, 0.9));
        assert!(parse_quantiles("0.05").is_err());
        assert!(parse_quantiles("a,b").is_err());
        assert!(parse_quantiles("0.1,0.2,0.3").is_err());
    }

    #[test]
    fn schema_errors_name_the_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");

        std::fs::write(&path, "y,s1\n1.0,2.0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains("\"z\""), "message was: {err}");

        std::fs::write(&path, "y,z,s1,extra\n1.0,2.0,3.0,4.0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains("\"extra\""), "message was: {err}");

        std::fs::write(&path, "y,z,z\n1.0,2.0,3.0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "message was: {err}");
    }

    #[test]
    fn value_errors_carry_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "y,z,s1\n1.0,2.0,3.0\n1.0,oops,3.0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "message was: {msg}");
        assert!(msg.contains("column 'z'"), "message was: {msg}");
        assert!(msg.contains("oops"), "message was: {msg}");

        std::fs::write(&path, "y,z,s1\n1.0,NaN,3.0\n").unwrap();
        assert!(read_dataset_csv(&path).is_err());
    }

    #[test]
    fn csv_round_trip_continuous_and_discrete() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");

        // Column order is free.
        std::fs::write(&path, "s1,y,z\n0.5,1.0,2.0\n1.5,3.0,4.0\n").unwrap();
        let data = read_dataset_csv(&path).unwrap();
        assert_eq!(data.y, vec![1.0, 3.0]);
        assert_eq!(data.z, vec![2.0, 4.0]);
        match &data.locations {
            Locations::Continuous { dim, coords } => {
                assert_eq!(*dim, 1);
                assert_eq!(coords, &vec![0.5, 1.5]);
            }
            _ => panic!("expected continuous locations"),
        }

        std::fs::write(&path, "y,z,region\n1.0,2.0,1\n3.0,4.0,3\n").unwrap();
        let data = read_dataset_csv(&path).unwrap();
        match &data.locations {
            Locations::Discrete { d, regions } => {
                assert_eq!(*d, 3);
                assert_eq!(regions, &vec![1, 3]);
            }
            _ => panic!("expected discrete locations"),
        }

        std::fs::write(&path, "y,z,region\n1.0,2.0,0\n").unwrap();
        let err = read_dataset_csv(&path).unwrap_err();
        assert!(err.to_string().contains("1-based"), "message was: {err}");

        std::fs::write(&path, "y,z,s1\n").unwrap();
        assert!(read_dataset_csv(&path).unwrap_err().to_string().contains("no data rows"));
    }

    #[test]
    fn grid_specs_rebuild_their_locations() {
        let spec = GridSpec::Continuous { bounds: vec![[0.0, 10.0]], points_per_axis: 11 };
        let grid = spec.build().unwrap();
        assert_eq!(grid.len(), 11);
        let spec2 = GridSpec::Continuous {
            bounds: vec![[0.0, 10.0], [0.0, 10.0]],
            points_per_axis: 5,
        };
        assert_eq!(spec2.build().unwrap().len(), 25);
        let disc = GridSpec::Discrete { d: 4 };
        assert_eq!(disc.build().unwrap().len(), 4);

        // Serialized form round-trips.
        let text = serde_json::to_string(&spec2).unwrap();
        let back: GridSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec2);
    }

    #[test]
    fn zscoring_centers_and_scales() {
        let mut values = vec![2.0, 4.0, 6.0];
        let (mean, sd) = zscore(&mut values).unwrap();
        assert!((mean - 4.0).abs() < 1e-12);
        assert!((sd - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(values.iter().sum::<f64>().abs() < 1e-12);
        let n = values.len() as f64;
        let var = values.iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 1e-12);

        let mut constant = vec![3.0, 3.0];
        assert!(zscore(&mut constant).is_none());
    }

    #[test]
    fn exit_codes_map_error_kinds() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Data("x".into())), 2);
        assert_eq!(exit_code(&Error::OutOfDomain("x".into())), 2);
        assert_eq!(exit_code(&Error::MissingRegions(vec![1])), 2);
        assert_eq!(exit_code(&Error::DegenerateExposure("x".into())), 3);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
    }

    #[test]
    fn command_line_parses_the_documented_forms() {
        use clap::Parser as _;
        let cli = Cli::try_parse_from([
            "rosce", "fit", "--synth", "discrete-5", "--method", "rosce", "--B", "1000",
            "--seed", "7",
        ])
        .unwrap();
        match cli.command {
            Command::Fit(args) => {
                assert_eq!(args.input.synth.as_deref(), Some("discrete-5"));
                assert_eq!(args.method, Some(MethodArg::Rosce));
                assert_eq!(args.replicates, Some(1000));
                assert_eq!(args.seed, Some(7));
            }
            _ => panic!("expected fit"),
        }

        let cli = Cli::try_parse_from([
            "rosce", "synth", "gp-example", "--case", "fixed-zero", "--n", "200", "--seed",
            "1",
        ])
        .unwrap();
        match cli.command {
            Command::Synth(args) => {
                assert_eq!(args.name, "gp-example");
                assert_eq!(args.case, Some(CaseArg::FixedZero));
                assert_eq!(args.n, Some(200));
            }
            _ => panic!("expected synth"),
        }

        let cli = Cli::try_parse_from([
            "rosce", "mc", "eiv", "--sims", "100", "--methods", "rosce,ls", "--seed", "3",
        ])
        .unwrap();
        match cli.command {
            Command::Mc(args) => {
                assert_eq!(args.sims, Some(100));
                assert_eq!(
                    args.methods,
                    Some(vec![EstimatorArg::Rosce, EstimatorArg::Ls])
                );
            }
            _ => panic!("expected mc"),
        }

        assert!(Cli::try_parse_from([
            "rosce", "fit", "--input", "a.csv", "--synth", "2d"
        ])
        .is_err());
    }

    #[test]
    fn source_resolution_validates_generator_flags() {
        let no_flags = InputArgs { input: None, synth: None, case: None, n: None, d_theta: None };
        assert!(resolve_source(&no_flags, &FileConfig::default(), 0).is_err());

        let csv_with_n = InputArgs {
            input: Some(PathBuf::from("data.csv")),
            synth: None,
            case: None,
            n: Some(10),
            d_theta: None,
        };
        assert!(resolve_source(&csv_with_n, &FileConfig::default(), 0).is_err());

        let eiv = InputArgs {
            input: None,
            synth: Some("eiv".into()),
            case: None,
            n: None,
            d_theta: None,
        };
        match resolve_source(&eiv, &FileConfig::default(), 3).unwrap() {
            SourceSpec::Synth { name, n, d_theta, seed, .. } => {
                assert_eq!(name, SynthName::Eiv);
                assert_eq!(n, 41);
                assert_eq!(d_theta, 10);
                assert_eq!(seed, 3);
            }
            _ => panic!("expected a generator source"),
        }

        let bad_case = InputArgs {
            input: None,
            synth: Some("2d".into()),
            case: Some(CaseArg::FixedZero),
            n: None,
            d_theta: None,
        };
        assert!(resolve_source(&bad_case, &FileConfig::default(), 0).is_err());
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        let parsed: std::result::Result<FileConfig, _> =
            serde_json::from_str(r#"{"method": "rosce", "mystery": 1}"#);
        assert!(parsed.is_err());
        let parsed: std::result::Result<FileConfig, _> =
            serde_json::from_str(r#"{"method": "rosce", "replicates": 500}"#);
        assert!(parsed.is_ok());
    }
}
