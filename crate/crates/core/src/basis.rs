//! Spatial basis vectors: cubic B-spline tensor products over continuous
//! space and indicator (one-hot) vectors over discrete regions.
//!
//! A continuous basis is organized in resolution levels. Each level places
//! `n_components` cubic B-splines per axis on a uniform lattice of centers,
//! takes the Kronecker product across axes, and the levels are stacked into
//! one vector. Support lengths are expressed as fractions of the per-axis
//! range, so `support_fraction = 0.2` over `[0, 10]` gives splines of
//! support length 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval of valid coordinates along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds {
    pub lower: f64,
    pub upper: f64,
}

impl AxisBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::Config(format!(
                "axis bounds must be finite with lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lower && s <= self.upper
    }
}

/// Where the data lives: a box in R^dim (dim 1..=3) or `d` discrete
/// regions labeled 1..=d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDomain {
    Continuous { bounds: Vec<AxisBounds> },
    Discrete { d: usize },
}

impl SpaceDomain {
    pub fn continuous(bounds: Vec<AxisBounds>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 3 {
            return Err(Error::Config(format!(
                "continuous domain must have 1 to 3 axes, got {}",
                bounds.len()
            )));
        }
        Ok(Self::Continuous { bounds })
    }

    pub fn discrete(d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::Config("discrete domain needs d >= 1 regions".into()));
        }
        Ok(Self::Discrete { d })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Continuous { bounds } => bounds.len(),
            Self::Discrete { .. } => 1,
        }
    }

    pub fn contains(&self, loc: LocationRef<'_>) -> bool {
        match (self, loc) {
            (Self::Continuous { bounds }, LocationRef::Continuous(coords)) => {
                coords.len() == bounds.len()
                    && bounds.iter().zip(coords).all(|(b, &s)| b.contains(s))
            }
            (Self::Discrete { d }, LocationRef::Discrete(region)) => {
                region >= 1 && region <= *d
            }
            _ => false,
        }
    }

    fn describe(&self) -> String {
        match self {
            Self::Continuous { bounds } => {
                let axes: Vec<String> = bounds
                    .iter()
                    .map(|b| format!("[{}, {}]", b.lower, b.upper))
                    .collect();
                format!("continuous {}", axes.join(" x "))
            }
            Self::Discrete { d } => format!("discrete 1..={d}"),
        }
    }
}

/// One resolution level of a continuous basis: `n_components` splines per
/// axis, each with support `support_fraction * range` on that axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisLevel {
    pub n_components: usize,
    pub support_fraction: f64,
}

/// Configuration of the spatial basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    domain: SpaceDomain,
    levels: Vec<BasisLevel>,
}

impl BasisSpec {
    /// Continuous basis over `domain` with the given resolution levels.
    pub fn continuous(domain: SpaceDomain, levels: Vec<BasisLevel>) -> Result<Self> {
        let bounds = match &domain {
            SpaceDomain::Continuous { bounds } => bounds,
            SpaceDomain::Discrete { .. } => {
                return Err(Error::Config(
                    "a leveled B-spline basis requires a continuous domain".into(),
                ))
            }
        };
        if levels.is_empty() {
            return Err(Error::Config(
                "continuous basis needs at least one level".into(),
            ));
        }
        for level in &levels {
            for b in bounds {
                // Validates n_components, support and lattice coverage.
                knot_layout(*b, level.n_components, level.support_fraction * b.range())?;
            }
        }
        Ok(Self { domain, levels })
    }

    /// Indicator basis over `d` discrete regions.
    pub fn discrete(d: usize) -> Result<Self> {
        Ok(Self {
            domain: SpaceDomain::discrete(d)?,
            levels: Vec::new(),
        })
    }

    pub fn domain(&self) -> &SpaceDomain {
        &self.domain
    }

    pub fn levels(&self) -> &[BasisLevel] {
        &self.levels
    }

    /// Total basis dimension: sum over levels of n_components^dim for
    /// continuous domains, the region count for discrete ones.
    pub fn d_theta(&self) -> usize {
        match &self.domain {
            SpaceDomain::Continuous { bounds } => self
                .levels
                .iter()
                .map(|l| l.n_components.pow(bounds.len() as u32))
                .sum(),
            SpaceDomain::Discrete { d } => *d,
        }
    }
}

/// Flat JSON form: `kind`, `bounds`, `levels` for continuous;
/// `kind`, `d` for discrete.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisSpecJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<BasisLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
}

impl Serialize for BasisSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match &self.domain {
            SpaceDomain::Continuous { bounds } => BasisSpecJson {
                kind: "continuous".into(),
                bounds: Some(bounds.iter().map(|b| [b.lower, b.upper]).collect()),
                levels: Some(self.levels.clone()),
                d: None,
            },
            SpaceDomain::Discrete { d } => BasisSpecJson {
                kind: "discrete".into(),
                bounds: None,
                levels: None,
                d: Some(*d),
            },
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = BasisSpecJson::deserialize(deserializer)?;
        let spec = match json.kind.as_str() {
            "continuous" => {
                let bounds = json
                    .bounds
                    .ok_or_else(|| serde::de::Error::custom("continuous basis needs `bounds`"))?
                    .into_iter()
                    .map(|[lo, hi]| AxisBounds::new(lo, hi))
                    .collect::<Result<Vec<_>>>()
                    .map_err(serde::de::Error::custom)?;
                let levels = json
                    .levels
                    .ok_or_else(|| serde::de::Error::custom("continuous basis needs `levels`"))?;
                let domain = SpaceDomain::continuous(bounds).map_err(serde::de::Error::custom)?;
                BasisSpec::continuous(domain, levels).map_err(serde::de::Error::custom)?
            }
            "discrete" => {
                let d = json
                    .d
                    .ok_or_else(|| serde::de::Error::custom("discrete basis needs `d`"))?;
                BasisSpec::discrete(d).map_err(serde::de::Error::custom)?
            }
            other => {
                return Err(serde::de::Error::custom(format!(
                    "unknown basis kind `{other}` (expected continuous or discrete)"
                )))
            }
        };
        Ok(spec)
    }
}

/// An evaluated basis vector phi(s).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub values: Vec<f64>,
}

/// Sample locations, stored column-free: row-major coordinates for a
/// continuous domain, 1-based region labels for a discrete one.
#[derive(Debug, Clone, PartialEq)]
pub enum Locations {
    Continuous { dim: usize, coords: Vec<f64> },
    Discrete { d: usize, regions: Vec<usize> },
}

/// A borrowed view of one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocationRef<'a> {
    Continuous(&'a [f64]),
    Discrete(usize),
}

impl Locations {
    pub fn continuous(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::Config(format!("dim must be 1..=3, got {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Data(format!(
                "coordinate buffer length {} is not a multiple of dim {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data("non-finite coordinate".into()));
        }
        Ok(Self::Continuous { dim, coords })
    }

    pub fn discrete(d: usize, regions: Vec<usize>) -> Result<Self> {
        if d < 1 {
            return Err(Error::Config("discrete domain needs d >= 1".into()));
        }
        if let Some(&r) = regions.iter().find(|&&r| r < 1 || r > d) {
            return Err(Error::Data(format!(
                "region label {r} outside 1..={d}"
            )));
        }
        Ok(Self::Discrete { d, regions })
    }

    /// Regular grid with `points_per_axis` points per axis over `bounds`,
    /// flattened axis-1-major (last axis fastest).
    pub fn grid(bounds: &[AxisBounds], points_per_axis: usize) -> Result<Self> {
        if points_per_axis < 2 {
            return Err(Error::Config("grid needs at least 2 points per axis".into()));
        }
        let dim = bounds.len();
        if dim == 0 || dim > 3 {
            return Err(Error::Config(format!("dim must be 1..=3, got {dim}")));
        }
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|b| {
                let step = b.range() / (points_per_axis - 1) as f64;
                (0..points_per_axis)
                    .map(|i| {
                        if i + 1 == points_per_axis {
                            b.upper
                        } else {
                            b.lower + step * i as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let total = points_per_axis.pow(dim as u32);
        let mut coords = Vec::with_capacity(total * dim);
        for flat in 0..total {
            let mut rem = flat;
            let mut idx = [0usize; 3];
            for ax in (0..dim).rev() {
                idx[ax] = rem % points_per_axis;
                rem /= points_per_axis;
            }
            for ax in 0..dim {
                coords.push(axes[ax][idx[ax]]);
            }
        }
        Self::continuous(dim, coords)
    }

    /// All regions 1..=d, one point each.
    pub fn all_regions(d: usize) -> Result<Self> {
        Self::discrete(d, (1..=d).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Continuous { dim, coords } => coords.len() / dim,
            Self::Discrete { regions, .. } => regions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> LocationRef<'_> {
        match self {
            Self::Continuous { dim, coords } => {
                LocationRef::Continuous(&coords[i * dim..(i + 1) * dim])
            }
            Self::Discrete { regions, .. } => LocationRef::Discrete(regions[i]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LocationRef<'_>> {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// New locations formed by gathering rows at `indices`.
    pub fn gather(&self, indices: &[usize]) -> Self {
        match self {
            Self::Continuous { dim, coords } => {
                let mut out = Vec::with_capacity(indices.len() * dim);
                for &i in indices {
                    out.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
                }
                Self::Continuous { dim: *dim, coords: out }
            }
            Self::Discrete { d, regions } => Self::Discrete {
                d: *d,
                regions: indices.iter().map(|&i| regions[i]).collect(),
            },
        }
    }

    /// Same spatial kind and dimensionality as `domain`.
    pub fn matches_domain(&self, domain: &SpaceDomain) -> bool {
        match (self, domain) {
            (Self::Continuous { dim, .. }, SpaceDomain::Continuous { bounds }) => {
                *dim == bounds.len()
            }
            (Self::Discrete { d, .. }, SpaceDomain::Discrete { d: dd }) => d == dd,
            _ => false,
        }
    }
}

/// The four-piece cubic polynomial as a function of f = 4s/L - c + 2.
///
/// Pieces 1 and 4 are evaluated as f^3/6 and (4-f)^3/6, and piece 3 as
/// piece 2 mirrored through f -> 4 - f; these forms are algebraically
/// identical to the expanded cubics and keep the value non-negative and
/// exactly zero at the support boundary.
fn bspline_kernel(f: f64) -> f64 {
    if f <= 0.0 || f >= 4.0 {
        return 0.0;
    }
    if f < 1.0 {
        f * f * f / 6.0
    } else if f < 2.0 {
        ((-0.5 * f + 2.0) * f - 2.0) * f + 2.0 / 3.0
    } else if f < 3.0 {
        let g = 4.0 - f;
        ((-0.5 * g + 2.0) * g - 2.0) * g + 2.0 / 3.0
    } else {
        let g = 4.0 - f;
        g * g * g / 6.0
    }
}

/// Cubic B-spline component with knot index `c` and support length `support`,
/// evaluated at coordinate `s`. Nonzero only for s in ((c-2)L/4, (c+2)L/4).
pub fn bspline_scalar(s: f64, c: f64, support: f64) -> Result<f64> {
    if !(support > 0.0) || !support.is_finite() {
        return Err(Error::Config(format!(
            "B-spline support must be positive and finite, got {support}"
        )));
    }
    Ok(bspline_kernel(4.0 * s / support - c + 2.0))
}

/// Same spline parameterized by its center position, f = 4(s - center)/L + 2.
#[inline]
fn bspline_centered(s: f64, center: f64, support: f64) -> f64 {
    bspline_kernel(4.0 * (s - center) / support + 2.0)
}

/// Uniform lattice of component centers covering `bounds`: the axis is cut
/// into `n_components` equal cells and one spline is centered in each, so
/// supports extend symmetrically past the data bounds. Requires the support
/// to exceed the cell width, which makes every in-domain point interior to
/// at least one component.
pub fn knot_layout(bounds: AxisBounds, n_components: usize, support: f64) -> Result<Vec<f64>> {
    let bounds = AxisBounds::new(bounds.lower, bounds.upper)?;
    if n_components < 4 {
        return Err(Error::Config(format!(
            "a cubic B-spline level needs at least 4 components per axis, got {n_components}"
        )));
    }
    if !(support > 0.0) || !support.is_finite() {
        return Err(Error::Config(format!(
            "support must be positive and finite, got {support}"
        )));
    }
    let cell = bounds.range() / n_components as f64;
    if support <= cell {
        return Err(Error::Config(format!(
            "support {support} does not cover the axis: it must exceed the cell width {cell} \
             (range {} / {n_components} components)",
            bounds.range()
        )));
    }
    Ok((0..n_components)
        .map(|k| bounds.lower + (k as f64 + 0.5) * cell)
        .collect())
}

/// Per-axis center/support tables for one continuous level.
struct LevelLattice {
    centers: Vec<Vec<f64>>,
    supports: Vec<f64>,
}

fn level_lattice(bounds: &[AxisBounds], level: &BasisLevel) -> Result<LevelLattice> {
    let mut centers = Vec::with_capacity(bounds.len());
    let mut supports = Vec::with_capacity(bounds.len());
    for b in bounds {
        let support = level.support_fraction * b.range();
        centers.push(knot_layout(*b, level.n_components, support)?);
        supports.push(support);
    }
    Ok(LevelLattice { centers, supports })
}

/// Evaluate phi(s) into `out`, which must have length `spec.d_theta()`.
/// `loc` must already be inside the domain.
fn eval_into(spec: &BasisSpec, loc: LocationRef<'_>, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(out.len(), spec.d_theta());
    match (&spec.domain, loc) {
        (SpaceDomain::Discrete { .. }, LocationRef::Discrete(region)) => {
            out.fill(0.0);
            out[region - 1] = 1.0;
            Ok(())
        }
        (SpaceDomain::Continuous { bounds }, LocationRef::Continuous(coords)) => {
            let dim = bounds.len();
            let mut offset = 0;
            for level in &spec.levels {
                let lattice = level_lattice(bounds, level)?;
                let n = level.n_components;
                // Per-axis component values.
                let mut axis_vals: Vec<Vec<f64>> = Vec::with_capacity(dim);
                for ax in 0..dim {
                    axis_vals.push(
                        lattice.centers[ax]
                            .iter()
                            .map(|&t| bspline_centered(coords[ax], t, lattice.supports[ax]))
                            .collect(),
                    );
                }
                // Kronecker product flattened axis-1-major: for dim 2 the
                // entry at (k1, k2) lands at k1 * n + k2.
                let block = n.pow(dim as u32);
                let dst = &mut out[offset..offset + block];
                match dim {
                    1 => dst.copy_from_slice(&axis_vals[0]),
                    2 => {
                        for k1 in 0..n {
                            let v1 = axis_vals[0][k1];
                            for k2 in 0..n {
                                dst[k1 * n + k2] = v1 * axis_vals[1][k2];
                            }
                        }
                    }
                    3 => {
                        for k1 in 0..n {
                            for k2 in 0..n {
                                let v12 = axis_vals[0][k1] * axis_vals[1][k2];
                                for k3 in 0..n {
                                    dst[(k1 * n + k2) * n + k3] = v12 * axis_vals[2][k3];
                                }
                            }
                        }
                    }
                    _ => unreachable!("dim validated to 1..=3"),
                }
                offset += block;
            }
            Ok(())
        }
        _ => unreachable!("domain membership checked before evaluation"),
    }
}

/// Evaluate the basis vector phi(s) at a location.
pub fn eval_basis(spec: &BasisSpec, loc: LocationRef<'_>) -> Result<BasisVector> {
    if !spec.domain.contains(loc) {
        return Err(Error::OutOfDomain(format!(
            "{loc:?} is not in the {} domain",
            spec.domain.describe()
        )));
    }
    let mut values = vec![0.0; spec.d_theta()];
    eval_into(spec, loc, &mut values)?;
    Ok(BasisVector { values })
}

/// Row-major design matrix with rows phi(s_i), one per location.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub n: usize,
    pub d: usize,
    /// Row-major n x d values.
    pub values: Vec<f64>,
}

impl BasisMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// Column-major copy of the matrix (each column contiguous).
    pub fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; self.n]; self.d];
        for i in 0..self.n {
            let row = self.row(i);
            for (k, col) in cols.iter_mut().enumerate() {
                col[i] = row[k];
            }
        }
        cols
    }
}

/// Evaluate the basis at every location. Locations whose basis row is
/// identically zero are reported as uncovered; a validated spec covers its
/// whole domain, so this check is defensive and names the offending rows.
pub fn basis_matrix(spec: &BasisSpec, locations: &Locations) -> Result<BasisMatrix> {
    if !locations.matches_domain(&spec.domain) {
        return Err(Error::Config(format!(
            "locations do not match the basis domain ({})",
            spec.domain.describe()
        )));
    }
    let n = locations.len();
    let d = spec.d_theta();
    let mut values = vec![0.0; n * d];
    let mut uncovered = Vec::new();
    for i in 0..n {
        let loc = locations.get(i);
        if !spec.domain.contains(loc) {
            return Err(Error::OutOfDomain(format!(
                "location {i} ({loc:?}) is outside the {} domain",
                spec.domain.describe()
            )));
        }
        let row = &mut values[i * d..(i + 1) * d];
        eval_into(spec, loc, row)?;
        if row.iter().all(|&v| v == 0.0) {
            uncovered.push(i);
        }
    }
    if !uncovered.is_empty() {
        return Err(Error::Config(format!(
            "basis covers none of the components at location indices {uncovered:?}"
        )));
    }
    Ok(BasisMatrix { n, d, values })
}
