//! Marginal-effect estimators for a two-period treatment and for a
//! treatment/mediator pair.
//!
//! Every estimator maps a [`ColumnTable`] plus a role specification to an
//! [`EffectReport`]. Effects are always read from the coefficients on
//! treatment and treatment-by-treatment terms; treatment-by-residual
//! coefficients are reported separately as moderation diagnostics.

mod mediation;
mod report;
mod time_varying;

use std::collections::HashSet;

use serde::Serialize;

pub use mediation::{estimate_mediation_g, estimate_mediation_rwr, MediationSpec};
pub use report::{
    Diagnostics, Effect, EffectReport, Estimand, Estimates, Method, ProbitDiagnostic, WeightSummary,
};
pub use time_varying::{
    estimate_conventional, estimate_g, estimate_iptw, estimate_rwr, DenominatorModel, IptwOptions,
    RwrOptions, TimeVaryingSpec,
};

use crate::dataset::{validate_treatment_column, ColumnTable, TreatmentKind};
use crate::design::{build_design, Term};
use crate::error::{Error, Result};
use crate::numerics::{fit_probit, solve_least_squares, DesignMatrix, LeastSquaresFit};

/// The five time-varying estimators, as selected on the command line and in
/// simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeVaryingMethod {
    Conventional,
    Iptw,
    G,
    Rwr,
    RwrInteract,
}

impl TimeVaryingMethod {
    pub const ALL: [TimeVaryingMethod; 5] = [
        TimeVaryingMethod::Conventional,
        TimeVaryingMethod::Iptw,
        TimeVaryingMethod::G,
        TimeVaryingMethod::Rwr,
        TimeVaryingMethod::RwrInteract,
    ];

    pub fn method(self) -> Method {
        match self {
            TimeVaryingMethod::Conventional => Method::Conventional,
            TimeVaryingMethod::Iptw => Method::Iptw,
            TimeVaryingMethod::G => Method::G,
            TimeVaryingMethod::Rwr => Method::Rwr,
            TimeVaryingMethod::RwrInteract => Method::RwrInteract,
        }
    }

    pub fn name(self) -> &'static str {
        self.method().name()
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }

    /// Runs the estimator with default options.
    pub fn estimate(self, table: &ColumnTable, spec: &TimeVaryingSpec) -> Result<EffectReport> {
        match self {
            TimeVaryingMethod::Conventional => estimate_conventional(table, spec),
            TimeVaryingMethod::Iptw => estimate_iptw(table, spec, &IptwOptions::default()),
            TimeVaryingMethod::G => estimate_g(table, spec),
            TimeVaryingMethod::Rwr => estimate_rwr(table, spec, &RwrOptions::plain()),
            TimeVaryingMethod::RwrInteract => {
                estimate_rwr(table, spec, &RwrOptions::interactions())
            }
        }
    }
}

pub(crate) fn check_roles(table: &ColumnTable, groups: &[&[&str]]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in groups.iter().flat_map(|g| g.iter()) {
        table.column(name)?;
        if !seen.insert(*name) {
            return Err(Error::InvalidSpec(format!(
                "column `{name}` is assigned more than one role"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_treatment(table: &ColumnTable, name: &str, kind: TreatmentKind) -> Result<()> {
    validate_treatment_column(table, name, kind)
}

/// Intercept plus the named raw columns.
pub(crate) fn covariate_design(table: &ColumnTable, names: &[&str]) -> Result<DesignMatrix> {
    let mut terms = vec![Term::intercept()];
    terms.extend(names.iter().map(|n| Term::raw(n)));
    build_design(table, &terms)
}

pub(crate) fn ols(
    table: &ColumnTable,
    terms: &[Term],
    y: &[f64],
    weights: Option<&[f64]>,
    stage: &str,
    diagnostics: &mut Diagnostics,
) -> Result<LeastSquaresFit> {
    let x = build_design(table, terms)?;
    let fit = solve_least_squares(&x, y, weights)?;
    diagnostics.note_dropped(stage, &fit.dropped_columns);
    Ok(fit)
}

/// Fitted treatment probabilities (binary) or conditional means (continuous)
/// given the named predictors.
pub(crate) fn propensity(
    table: &ColumnTable,
    treatment: &str,
    predictors: &[&str],
    kind: TreatmentKind,
    model: &str,
    diagnostics: &mut Diagnostics,
) -> Result<Vec<f64>> {
    let x = covariate_design(table, predictors)?;
    let a = table.column(treatment)?;
    match kind {
        TreatmentKind::Binary => {
            let fit = fit_probit(&x, a)?;
            diagnostics
                .probit
                .push(ProbitDiagnostic::from_fit(model, &fit));
            diagnostics.note_dropped(model, &fit.dropped_columns);
            if !fit.converged {
                return Err(Error::NonConvergence(model.to_string()));
            }
            Ok(fit.fitted_probabilities)
        }
        TreatmentKind::Continuous => {
            let fit = solve_least_squares(&x, a, None)?;
            diagnostics.note_dropped(model, &fit.dropped_columns);
            Ok(fit.fitted)
        }
    }
}

/// A column name not yet present in the table, based on `base`.
pub(crate) fn fresh_name(table: &ColumnTable, base: &str) -> String {
    let mut name = base.to_string();
    while table.contains(&name) {
        name.insert(0, '_');
    }
    name
}

pub(crate) fn coef(fit: &LeastSquaresFit, term: &Term) -> f64 {
    fit.coef(&term.label()).unwrap_or(0.0)
}
