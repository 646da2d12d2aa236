use serde::Serialize;

use super::{
    check_roles, check_treatment, coef, fresh_name, ols, propensity, Diagnostics, EffectReport,
    Method,
};
use crate::dataset::{ColumnTable, TreatmentKind};
use crate::design::{
    residualize, standard_term_sets, FactorKind, FirstStage, ResidualizationPlan, Term, TermPolicy,
    TermSet,
};
use crate::error::{Error, Result};

/// Variable roles for a two-period treatment, in temporal order
/// `baseline → treatment1 → post → treatment2 → outcome`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeVaryingSpec {
    pub outcome: String,
    pub treatment1: String,
    pub treatment2: String,
    pub baseline_confounders: Vec<String>,
    pub post_confounders: Vec<String>,
    pub treatment_kind: TreatmentKind,
}

impl TimeVaryingSpec {
    pub fn new(
        outcome: &str,
        treatment1: &str,
        treatment2: &str,
        baseline: &[&str],
        post: &[&str],
    ) -> Self {
        Self {
            outcome: outcome.into(),
            treatment1: treatment1.into(),
            treatment2: treatment2.into(),
            baseline_confounders: baseline.iter().map(|s| s.to_string()).collect(),
            post_confounders: post.iter().map(|s| s.to_string()).collect(),
            treatment_kind: TreatmentKind::Binary,
        }
    }

    pub fn with_kind(mut self, kind: TreatmentKind) -> Self {
        self.treatment_kind = kind;
        self
    }

    /// Column layout produced by the simulation data generator.
    pub fn simulation() -> Self {
        Self::new("y", "a1", "a2", &["c1"], &["c2"])
    }

    pub fn validate(&self, table: &ColumnTable) -> Result<()> {
        let single = [
            self.outcome.as_str(),
            self.treatment1.as_str(),
            self.treatment2.as_str(),
        ];
        let base: Vec<&str> = self
            .baseline_confounders
            .iter()
            .map(String::as_str)
            .collect();
        let post: Vec<&str> = self.post_confounders.iter().map(String::as_str).collect();
        check_roles(table, &[&single, &base, &post])?;
        check_treatment(table, &self.treatment1, self.treatment_kind)?;
        check_treatment(table, &self.treatment2, self.treatment_kind)?;
        Ok(())
    }

    fn policy(&self) -> TermPolicy {
        TermPolicy::new(
            [&self.treatment1, &self.treatment2],
            &self.baseline_confounders,
            &self.post_confounders,
        )
    }

    fn a1(&self) -> Term {
        Term::treatment(&self.treatment1)
    }

    fn a2(&self) -> Term {
        Term::treatment(&self.treatment2)
    }

    fn a1a2(&self) -> Term {
        self.a1().times(&self.a2())
    }
}

/// Effects from a fit whose design carries `a1`, `a2` and `a1:a2`.
fn effects_from_treatment_terms(
    method: Method,
    spec: &TimeVaryingSpec,
    fit: &crate::numerics::LeastSquaresFit,
    diagnostics: Diagnostics,
) -> EffectReport {
    let dte = coef(fit, &spec.a1());
    let pte0 = coef(fit, &spec.a2());
    let pte1 = pte0 + coef(fit, &spec.a1a2());
    EffectReport::time_varying(method, dte, pte0, pte1, diagnostics)
}

/// Least squares of the outcome on both treatments, their product and the
/// raw confounders from both periods.
pub fn estimate_conventional(table: &ColumnTable, spec: &TimeVaryingSpec) -> Result<EffectReport> {
    spec.validate(table)?;
    let mut diag = Diagnostics::default();
    let terms = standard_term_sets(TermSet::Conventional, &spec.policy())?;
    let fit = ols(
        table,
        &terms,
        table.column(&spec.outcome)?,
        None,
        "outcome",
        &mut diag,
    )?;
    Ok(effects_from_treatment_terms(
        Method::Conventional,
        spec,
        &fit,
        diag,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DenominatorModel {
    /// Denominators condition on the confounder history.
    #[default]
    Confounders,
    /// Denominators reuse the numerator predictors, which makes every weight
    /// exactly one.
    NumeratorOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IptwOptions {
    /// Truncate weights at this lower quantile and its mirror upper quantile.
    pub trim_quantile: Option<f64>,
    pub denominators: DenominatorModel,
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn trim_weights(weights: &mut [f64], q: f64) -> usize {
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, q);
    let hi = quantile_sorted(&sorted, 1.0 - q);
    let mut trimmed = 0;
    for w in weights.iter_mut() {
        let c = w.clamp(lo, hi);
        if c != *w {
            trimmed += 1;
            *w = c;
        }
    }
    trimmed
}

/// Weighted least squares of the outcome on the treatment history, with
/// stabilized inverse-probability-of-treatment weights from probit models.
pub fn estimate_iptw(
    table: &ColumnTable,
    spec: &TimeVaryingSpec,
    options: &IptwOptions,
) -> Result<EffectReport> {
    if spec.treatment_kind != TreatmentKind::Binary {
        return Err(Error::InvalidSpec(
            "IPTW requires binary treatments; use conventional, g, rwr or rwr-interact for continuous treatments".into(),
        ));
    }
    spec.validate(table)?;
    if let Some(q) = options.trim_quantile {
        if !(0.0..0.5).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "trim quantile must lie in [0, 0.5), got {q}"
            )));
        }
    }
    let mut diag = Diagnostics::default();
    let a1_name = spec.treatment1.as_str();
    let a2_name = spec.treatment2.as_str();
    let base: Vec<&str> = spec
        .baseline_confounders
        .iter()
        .map(String::as_str)
        .collect();
    let mut history: Vec<&str> = base.clone();
    history.push(a1_name);
    history.extend(spec.post_confounders.iter().map(String::as_str));

    let kind = TreatmentKind::Binary;
    let num1 = propensity(table, a1_name, &[], kind, "numerator t1", &mut diag)?;
    let num2 = propensity(table, a2_name, &[a1_name], kind, "numerator t2", &mut diag)?;
    let (den1, den2) = match options.denominators {
        DenominatorModel::Confounders => (
            propensity(table, a1_name, &base, kind, "denominator t1", &mut diag)?,
            propensity(table, a2_name, &history, kind, "denominator t2", &mut diag)?,
        ),
        DenominatorModel::NumeratorOnly => (
            propensity(table, a1_name, &[], kind, "denominator t1", &mut diag)?,
            propensity(
                table,
                a2_name,
                &[a1_name],
                kind,
                "denominator t2",
                &mut diag,
            )?,
        ),
    };
    if diag
        .probit
        .iter()
        .any(|p| p.model.starts_with("denominator") && p.at_boundary)
    {
        diag.warnings.push(
            "a denominator probability reached the clamp boundary; positivity may be violated"
                .into(),
        );
    }

    let a1 = table.column(a1_name)?;
    let a2 = table.column(a2_name)?;
    let ratio = |a: f64, num: f64, den: f64| {
        if a == 1.0 {
            num / den
        } else {
            (1.0 - num) / (1.0 - den)
        }
    };
    let mut weights: Vec<f64> = (0..table.n_rows())
        .map(|i| ratio(a1[i], num1[i], den1[i]) * ratio(a2[i], num2[i], den2[i]))
        .collect();
    let trimmed = match options.trim_quantile {
        Some(q) if q > 0.0 => trim_weights(&mut weights, q),
        _ => 0,
    };
    diag.weights = Some(super::WeightSummary::of(&weights, trimmed));

    let terms = standard_term_sets(TermSet::Iptw, &spec.policy())?;
    let fit = ols(
        table,
        &terms,
        table.column(&spec.outcome)?,
        Some(&weights),
        "weighted outcome",
        &mut diag,
    )?;
    Ok(effects_from_treatment_terms(Method::Iptw, spec, &fit, diag))
}

/// Two-step g-estimation of a structural nested mean model without effect
/// moderation: propensity-augmented outcome regression for the proximal
/// effects, then the distal effect from the outcome with the proximal effect
/// removed.
pub fn estimate_g(table: &ColumnTable, spec: &TimeVaryingSpec) -> Result<EffectReport> {
    spec.validate(table)?;
    let mut diag = Diagnostics::default();
    let kind = spec.treatment_kind;
    let a1_name = spec.treatment1.as_str();
    let base: Vec<&str> = spec
        .baseline_confounders
        .iter()
        .map(String::as_str)
        .collect();
    let mut history = base.clone();
    history.push(a1_name);
    history.extend(spec.post_confounders.iter().map(String::as_str));

    let ps1 = propensity(table, a1_name, &base, kind, "propensity t1", &mut diag)?;
    let ps2 = propensity(
        table,
        &spec.treatment2,
        &history,
        kind,
        "propensity t2",
        &mut diag,
    )?;

    let mut policy = spec.policy();
    let mut augmented = table.clone();
    for (slot, values) in [ps1, ps2].into_iter().enumerate() {
        let name = fresh_name(&augmented, &policy.propensity[slot]);
        augmented.push_column(name.clone(), values)?;
        policy.propensity[slot] = name;
    }

    let y = table.column(&spec.outcome)?;
    let step1_terms = standard_term_sets(TermSet::GStep1, &policy)?;
    let step1 = ols(&augmented, &step1_terms, y, None, "g step 1", &mut diag)?;
    let pte0 = coef(&step1, &spec.a2());
    let interaction = coef(&step1, &spec.a1a2());

    let a1 = table.column(a1_name)?;
    let a2 = table.column(&spec.treatment2)?;
    let h: Vec<f64> = (0..table.n_rows())
        .map(|i| y[i] - a2[i] * (pte0 + interaction * a1[i]))
        .collect();
    let step2_terms = standard_term_sets(TermSet::GStep2, &policy)?;
    let step2 = ols(&augmented, &step2_terms, &h, None, "g step 2", &mut diag)?;
    let dte = coef(&step2, &spec.a1());

    Ok(EffectReport::time_varying(
        Method::G,
        dte,
        pte0,
        pte0 + interaction,
        diag,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RwrOptions {
    /// Add two-way treatment-by-residualized-confounder terms.
    pub interactions: bool,
    /// Saturate the one-confounder-per-period model (requires
    /// `interactions`).
    pub saturated: bool,
    pub first_stage: FirstStage,
}

impl RwrOptions {
    pub fn plain() -> Self {
        Self::default()
    }

    pub fn interactions() -> Self {
        Self {
            interactions: true,
            ..Self::default()
        }
    }
}

fn is_moderation_term(term: &Term) -> bool {
    let f = term.factors();
    f.iter().any(|x| x.kind == FactorKind::Treatment)
        && f.iter()
            .any(|x| matches!(x.kind, FactorKind::Residualized { .. }))
}

pub(super) fn record_moderation(
    terms: &[Term],
    fit: &crate::numerics::LeastSquaresFit,
    diag: &mut Diagnostics,
) {
    for t in terms.iter().filter(|t| is_moderation_term(t)) {
        diag.moderation.insert(t.label(), coef(fit, t));
    }
}

/// Regression-with-residuals: residualize the confounders on the observed
/// past, then regress the outcome on the treatments, the residualized
/// confounders and (optionally) their treatment interactions.
pub fn estimate_rwr(
    table: &ColumnTable,
    spec: &TimeVaryingSpec,
    options: &RwrOptions,
) -> Result<EffectReport> {
    spec.validate(table)?;
    let mut diag = Diagnostics::default();
    let plan = ResidualizationPlan::two_period(
        &spec.baseline_confounders,
        &spec.post_confounders,
        &spec.treatment1,
    )?
    .with_first_stage(options.first_stage);
    let stage1 = residualize(table, &plan)?;
    diag.warnings.extend(stage1.warnings);

    let mut policy = spec.policy();
    policy.saturated = options.saturated;
    let set = if options.interactions {
        TermSet::RwrInteract
    } else {
        TermSet::RwrPlain
    };
    let terms = standard_term_sets(set, &policy)?;
    let fit = ols(
        &stage1.table,
        &terms,
        table.column(&spec.outcome)?,
        None,
        "outcome",
        &mut diag,
    )?;
    record_moderation(&terms, &fit, &mut diag);
    let method = if options.interactions {
        Method::RwrInteract
    } else {
        Method::Rwr
    };
    Ok(effects_from_treatment_terms(method, spec, &fit, diag))
}
