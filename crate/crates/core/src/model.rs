//! Index space, memory function and innovation law of the process
//! `X_k(t) = Σ_{j≥0} (j+1)^{-d(t)} ε_{k-j}(t)`, plus validation of the
//! standing assumptions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result, Violation};
use crate::linalg;
use crate::special::zeta;

/// Exponents within this distance of 1 are treated as the boundary case.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default relative tail-variance budget for series truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;

/// Hard cap on any truncation length.
pub const DEFAULT_TRUNCATION_CAP: u64 = 10_000_000;

/// Discretization of the measure space: locations `t_1 < … < t_q` with
/// positive quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SpaceGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid has no points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (t[{i}]={} >= t[{}]={})",
                points[i],
                i + 1,
                points[i + 1]
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "weight {i} must be positive, got {}",
                weights[i]
            )));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights summing to one.
    pub fn with_probability_weights(points: Vec<f64>) -> Result<Self> {
        let q = points.len().max(1) as f64;
        let weights = vec![1.0 / q; points.len()];
        Self::new(points, weights)
    }

    /// `count` points `start + i·(end-start)/(count-1)` with trapezoid-free
    /// equal weights `(end-start)/count`.
    pub fn uniform(start: f64, end: f64, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::InvalidGrid(
                "uniform grid needs at least one point".into(),
            ));
        }
        let points: Vec<f64> = if count == 1 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
                .collect()
        };
        let w = if count == 1 {
            1.0
        } else {
            (end - start).abs() / count as f64
        };
        Self::new(points, vec![w; count])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Memory regime of a single exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `1/2 < d < 1`
    Long,
    /// `d = 1`
    Boundary,
    /// `d > 1`
    Short,
}

impl Regime {
    /// `None` when `d ≤ 1/2` (the defining series diverges).
    pub fn of(d: f64) -> Option<Self> {
        if !(d > 0.5) || !d.is_finite() {
            None
        } else if (d - 1.0).abs() <= BOUNDARY_TOL {
            Some(Self::Boundary)
        } else if d < 1.0 {
            Some(Self::Long)
        } else {
            Some(Self::Short)
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Long => "long",
            Self::Boundary => "boundary",
            Self::Short => "short",
        }
    }
}

pub fn is_boundary(d: f64) -> bool {
    (d - 1.0).abs() <= BOUNDARY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemoryKind {
    Constant {
        value: f64,
    },
    /// `levels[i]` applies on `[breakpoints[i-1], breakpoints[i])`.
    Step {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    Table,
}

/// The exponent field `d(t)` evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryFunction {
    kind: MemoryKind,
    values: Vec<f64>,
}

impl MemoryFunction {
    pub fn constant(grid: &SpaceGrid, value: f64) -> Result<Self> {
        Self::build(MemoryKind::Constant { value }, vec![value; grid.len()])
    }

    pub fn step(grid: &SpaceGrid, breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidMemory(format!(
                "step function needs {} levels for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMemory(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let values = grid
            .points()
            .iter()
            .map(|&t| levels[breakpoints.iter().filter(|&&b| b <= t).count()])
            .collect();
        Self::build(
            MemoryKind::Step {
                breakpoints,
                levels,
            },
            values,
        )
    }

    pub fn table(grid: &SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidMemory(format!(
                "table has {} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Self::build(MemoryKind::Table, values)
    }

    fn build(kind: MemoryKind, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|d| !d.is_finite()) {
            return Err(Error::InvalidMemory(format!(
                "exponent at grid point {i} is not finite"
            )));
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> &MemoryKind {
        &self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid indices grouped by identical exponent, in first-seen order.
    pub fn groups(&self) -> Vec<(f64, Vec<usize>)> {
        let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &d) in self.values.iter().enumerate() {
            match out.iter_mut().find(|(v, _)| v.to_bits() == d.to_bits()) {
                Some((_, idx)) => idx.push(i),
                None => out.push((d, vec![i])),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationKind {
    White,
    Wiener,
    Custom,
}

/// Marginal law of the standardized draws fed through the factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationLaw {
    Gaussian,
    /// Random sign times `U^{-1/alpha} - 1`, scaled to unit variance.
    /// Finite variance needs `alpha > 2`.
    SymmetricLomax {
        alpha: f64,
    },
}

impl InnovationLaw {
    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::Gaussian)
    }
}

/// Spatial covariance `σ(s,t)` of the innovations on the grid, with a
/// sampling factor `F Fᵀ = σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnovationModel {
    kind: InnovationKind,
    law: InnovationLaw,
    #[serde(skip)]
    sigma: DMatrix<f64>,
    #[serde(skip)]
    factor: Option<DMatrix<f64>>,
    seed_stream: u64,
    eig_min: f64,
    eig_max: f64,
}

impl InnovationModel {
    /// Independent across grid points with per-point variances.
    pub fn white(grid: &SpaceGrid, sigma2: Vec<f64>) -> Result<Self> {
        if sigma2.len() != grid.len() {
            return Err(Error::InvalidInnovations(format!(
                "{} variances for {} grid points",
                sigma2.len(),
                grid.len()
            )));
        }
        Self::from_matrix(
            InnovationKind::White,
            DMatrix::from_diagonal(&sigma2.into()),
        )
    }

    /// Standard Wiener process: `σ(s,t) = min(s,t)`.
    pub fn wiener(grid: &SpaceGrid) -> Result<Self> {
        let p = grid.points();
        if let Some(i) = p.iter().position(|&t| t < 0.0) {
            return Err(Error::InvalidInnovations(format!(
                "wiener innovations need non-negative locations, t[{i}]={}",
                p[i]
            )));
        }
        Self::from_matrix(
            InnovationKind::Wiener,
            DMatrix::from_fn(p.len(), p.len(), |i, j| p[i].min(p[j])),
        )
    }

    pub fn custom(grid: &SpaceGrid, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != grid.len() || sigma.ncols() != grid.len() {
            return Err(Error::InvalidInnovations(format!(
                "sigma is {}x{}, grid has {} points",
                sigma.nrows(),
                sigma.ncols(),
                grid.len()
            )));
        }
        Self::from_matrix(InnovationKind::Custom, sigma)
    }

    fn from_matrix(kind: InnovationKind, mut sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInnovations(
                "sigma has non-finite entries".into(),
            ));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        let asym = linalg::max_asymmetry(&sigma);
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInnovations(format!(
                "sigma is not symmetric (max |σ-σᵀ| = {asym:e})"
            )));
        }
        linalg::symmetrize(&mut sigma);
        let (eig_min, eig_max) = linalg::eigen_range(&sigma);
        let factor = linalg::psd_factor(&sigma).ok();
        Ok(Self {
            kind,
            law: InnovationLaw::Gaussian,
            sigma,
            factor,
            seed_stream: 0,
            eig_min,
            eig_max,
        })
    }

    pub fn with_law(mut self, law: InnovationLaw) -> Result<Self> {
        if let InnovationLaw::SymmetricLomax { alpha } = law {
            if !(alpha > 2.0) || !alpha.is_finite() {
                return Err(Error::InvalidInnovations(format!(
                    "symmetric Lomax innovations need alpha > 2 for finite variance, got {alpha}"
                )));
            }
        }
        self.law = law;
        Ok(self)
    }

    pub fn with_seed_stream(mut self, seed_stream: u64) -> Self {
        self.seed_stream = seed_stream;
        self
    }

    pub fn kind(&self) -> InnovationKind {
        self.kind
    }

    pub fn law(&self) -> InnovationLaw {
        self.law
    }

    pub fn seed_stream(&self) -> u64 {
        self.seed_stream
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_at(&self, i: usize, j: usize) -> f64 {
        self.sigma[(i, j)]
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.sigma.diagonal().iter().copied().collect()
    }

    /// Lower-triangular factor, if `σ` is positive semidefinite.
    pub fn factor(&self) -> Result<&DMatrix<f64>> {
        self.factor.as_ref().ok_or_else(|| {
            Error::Factorization(format!(
                "innovation covariance is not positive semidefinite (eigenvalues in [{:e}, {:e}])",
                self.eig_min, self.eig_max
            ))
        })
    }

    pub fn eigen_range(&self) -> (f64, f64) {
        (self.eig_min, self.eig_max)
    }

    pub fn is_psd(&self) -> bool {
        self.eig_min >= -linalg::PSD_REL_TOL * self.eig_max.abs().max(f64::MIN_POSITIVE)
    }
}

/// Fully specified simulation input.
#[derive(Debug, Clone, Serialize)]
pub struct ProcessSpec {
    grid: SpaceGrid,
    memory: MemoryFunction,
    innovations: InnovationModel,
    tail_tol: f64,
    horizon: usize,
}

impl ProcessSpec {
    /// Builds and validates; any fatal violation is returned as
    /// [`Error::Validation`].
    pub fn new(
        grid: SpaceGrid,
        memory: MemoryFunction,
        innovations: InnovationModel,
        tail_tol: f64,
        horizon: usize,
    ) -> Result<Self> {
        let report = validate_parts(&grid, &memory, &innovations, tail_tol);
        if !report.violations.is_empty() {
            return Err(Error::Validation(report.violations));
        }
        Ok(Self {
            grid,
            memory,
            innovations,
            tail_tol,
            horizon,
        })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn memory(&self) -> &MemoryFunction {
        &self.memory
    }

    pub fn innovations(&self) -> &InnovationModel {
        &self.innovations
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn d(&self, i: usize) -> f64 {
        self.memory.at(i)
    }

    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.innovations.sigma_at(i, j)
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Result<Self> {
        check_tail_tol(tail_tol).map_err(|v| Error::Validation(vec![v]))?;
        self.tail_tol = tail_tol;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_innovations(self, innovations: InnovationModel) -> Result<Self> {
        Self::new(
            self.grid,
            self.memory,
            innovations,
            self.tail_tol,
            self.horizon,
        )
    }

    /// Past cut shared by every grid point: the truncation length of the
    /// slowest-decaying exponent.
    pub fn truncation(&self) -> Result<u64> {
        truncation_length(self.memory.min(), self.tail_tol)
    }

    /// Stable identity of the spec contents (FNV-1a over its JSON form).
    pub fn fingerprint(&self) -> u64 {
        let mut text = serde_json::to_string(self).unwrap_or_default();
        for v in self.innovations.sigma.iter() {
            text.push_str(&format!(",{:016x}", v.to_bits()));
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// Which part of the functional CLT applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CltPart {
    /// `1/2 < d(t) < 1` everywhere; normalization `n^{3/2-d(t)}`.
    Long,
    /// `d ≡ 1`; normalization `√n ln n`.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRegime {
    pub index: usize,
    pub location: f64,
    pub d: f64,
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltApplicability {
    pub part: Option<CltPart>,
    pub reason: String,
    /// `∫σ²/(1-d)² dμ` and `∫σ²/((1-d)(2d-1)) dμ` for the power case.
    pub integrals: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub regimes: Vec<PointRegime>,
    pub violations: Vec<Violation>,
    pub clt: CltApplicability,
    pub sigma_eigen_range: (f64, f64),
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        !self.violations.is_empty()
    }
}

fn check_tail_tol(tail_tol: f64) -> std::result::Result<(), Violation> {
    if tail_tol > 0.0 && tail_tol <= 1.0 {
        Ok(())
    } else {
        Err(Violation {
            index: None,
            location: None,
            message: format!("tail_tol must lie in (0, 1], got {tail_tol}"),
        })
    }
}

pub fn validate(spec: &ProcessSpec) -> ValidationReport {
    validate_parts(&spec.grid, &spec.memory, &spec.innovations, spec.tail_tol)
}

/// Checks every standing assumption and classifies the memory regime and
/// CLT applicability point by point.
pub fn validate_parts(
    grid: &SpaceGrid,
    memory: &MemoryFunction,
    innovations: &InnovationModel,
    tail_tol: f64,
) -> ValidationReport {
    let mut violations = Vec::new();
    let q = grid.len();
    if memory.values().len() != q {
        violations.push(Violation {
            index: None,
            location: None,
            message: format!(
                "memory function has {} values for {q} grid points",
                memory.values().len()
            ),
        });
    }
    if innovations.dim() != q {
        violations.push(Violation {
            index: None,
            location: None,
            message: format!(
                "innovation covariance is {}x{} for {q} grid points",
                innovations.dim(),
                innovations.dim()
            ),
        });
    }
    if let Err(v) = check_tail_tol(tail_tol) {
        violations.push(v);
    }

    let regimes: Vec<PointRegime> = memory
        .values()
        .iter()
        .enumerate()
        .map(|(i, &d)| PointRegime {
            index: i,
            location: grid.points().get(i).copied().unwrap_or(f64::NAN),
            d,
            regime: Regime::of(d),
        })
        .collect();
    for r in &regimes {
        if r.regime.is_none() {
            violations.push(Violation {
                index: Some(r.index),
                location: Some(r.location),
                message: format!(
                    "d(t)={} violates d(t) > 1/2 (series does not converge)",
                    r.d
                ),
            });
        }
    }

    if innovations.dim() == q {
        let sigma = innovations.sigma();
        for i in 0..q {
            if sigma[(i, i)] < 0.0 {
                violations.push(Violation {
                    index: Some(i),
                    location: Some(grid.points()[i]),
                    message: format!("negative innovation variance σ²(t)={}", sigma[(i, i)]),
                });
            }
        }
        if !innovations.is_psd() {
            let (lo, hi) = innovations.eigen_range();
            violations.push(Violation {
                index: None,
                location: None,
                message: format!(
                    "innovation covariance is not positive semidefinite (smallest eigenvalue {lo:e}, largest {hi:e})"
                ),
            });
        }
    }

    let clt = clt_applicability(grid, &regimes, innovations);
    ValidationReport {
        regimes,
        violations,
        clt,
        sigma_eigen_range: innovations.eigen_range(),
    }
}

fn clt_applicability(
    grid: &SpaceGrid,
    regimes: &[PointRegime],
    innovations: &InnovationModel,
) -> CltApplicability {
    let all = |want: Regime| regimes.iter().all(|r| r.regime == Some(want));
    if regimes.iter().any(|r| r.regime.is_none()) {
        return CltApplicability {
            part: None,
            reason: "invalid exponents present".into(),
            integrals: None,
        };
    }
    if all(Regime::Long) {
        let s2 = innovations.sigma2();
        let a: Vec<f64> = regimes
            .iter()
            .zip(&s2)
            .map(|(r, s)| s / (1.0 - r.d).powi(2))
            .collect();
        let b: Vec<f64> = regimes
            .iter()
            .zip(&s2)
            .map(|(r, s)| s / ((1.0 - r.d) * (2.0 * r.d - 1.0)))
            .collect();
        let integrals = (grid.integrate(&a), grid.integrate(&b));
        return CltApplicability {
            part: Some(CltPart::Long),
            reason: "1/2 < d(t) < 1 at every grid point".into(),
            integrals: Some(integrals),
        };
    }
    if all(Regime::Boundary) {
        return CltApplicability {
            part: Some(CltPart::Boundary),
            reason: "d(t) = 1 at every grid point".into(),
            integrals: None,
        };
    }
    let counts = |want: Regime| regimes.iter().filter(|r| r.regime == Some(want)).count();
    CltApplicability {
        part: None,
        reason: format!(
            "mixed regimes: {} long, {} boundary, {} short points",
            counts(Regime::Long),
            counts(Regime::Boundary),
            counts(Regime::Short)
        ),
        integrals: None,
    }
}

/// Integral-comparison bound `Σ_{j>M} (j+1)^{-2d} ≤ (M+1)^{1-2d}/(2d-1)`.
pub fn tail_variance_bound(d: f64, m: u64) -> f64 {
    (m as f64 + 1.0).powf(1.0 - 2.0 * d) / (2.0 * d - 1.0)
}

/// Smallest `M` whose tail-variance bound is within `tail_tol · ζ(2d)`.
pub fn truncation_length(d: f64, tail_tol: f64) -> Result<u64> {
    truncation_length_with_cap(d, tail_tol, DEFAULT_TRUNCATION_CAP)
}

pub fn truncation_length_with_cap(d: f64, tail_tol: f64, cap: u64) -> Result<u64> {
    if !(d > 0.5) {
        return Err(Error::InvalidArgument(format!(
            "truncation needs d > 1/2, got {d}"
        )));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail_tol must lie in (0, 1], got {tail_tol}"
        )));
    }
    let total = zeta(2.0 * d);
    let budget = tail_tol * total;
    let fits = |m: u64| tail_variance_bound(d, m) <= budget;
    // (M+1)^{1-2d} ≤ budget·(2d-1)
    let guess = (budget * (2.0 * d - 1.0)).powf(-1.0 / (2.0 * d - 1.0)) - 1.0;
    if !guess.is_finite() || guess > cap as f64 + 1.0 {
        return Err(unreachable_budget(d, tail_tol, guess, cap, total));
    }
    let mut m = guess.max(0.0).ceil() as u64;
    while m > 0 && fits(m - 1) {
        m -= 1;
    }
    while !fits(m) {
        m += 1;
    }
    if m > cap {
        return Err(unreachable_budget(d, tail_tol, m as f64, cap, total));
    }
    Ok(m)
}

fn unreachable_budget(d: f64, tail_tol: f64, required: f64, cap: u64, total: f64) -> Error {
    Error::TailBudgetUnreachable {
        d,
        tail_tol,
        required,
        cap,
        suggested_tol: tail_variance_bound(d, cap) / total,
    }
}
