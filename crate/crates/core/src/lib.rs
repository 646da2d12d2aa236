//! Regression-with-residuals estimation of marginal effects for time-varying
//! treatments and for treatment/mediator pairs, together with the comparison
//! estimators, a bootstrap, and a Monte Carlo harness.

pub mod bootstrap;
pub mod dataset;
pub mod design;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod numerics;

pub use dataset::{ColumnTable, TreatmentKind};
pub use error::{Error, Result};
pub use estimators::{EffectReport, MediationSpec, TimeVaryingMethod, TimeVaryingSpec};
