//! Functional linear processes with space-varying memory
//! `X_k(t) = Σ_{j≥0} (j+1)^{-d(t)} ε_{k-j}(t)`: exact covariance analytics,
//! seeded simulation, and Monte Carlo checks of the partial-sum CLT.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod export;
pub mod linalg;
pub mod mcverify;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod special;

pub use analytics::{CoefficientTable, LimitKernel, NormalizationPlan, SeriesValue};
pub use config::SpecConfig;
pub use error::{Error, Result, Violation};
pub use mcverify::{CltOptions, CovarianceReport, ExponentFit, NormalityOptions, PointNormality};
pub use model::{
    CltPart, InnovationLaw, InnovationModel, MemoryFunction, ProcessSpec, Regime, SpaceGrid,
    ValidationReport,
};
pub use rng::{InnovationField, SeedRecord, SeededInnovations};
pub use simulate::{PartialSums, PathEnsemble, Window};
