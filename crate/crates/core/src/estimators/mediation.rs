use serde::Serialize;

use super::time_varying::record_moderation;
use super::{
    check_roles, check_treatment, coef, fresh_name, ols, propensity, Diagnostics, EffectReport,
    Method,
};
use crate::dataset::{ColumnTable, TreatmentKind};
use crate::design::{
    residualize, standard_term_sets, ResidualizationPlan, Term, TermPolicy, TermSet,
};
use crate::error::{Error, Result};

/// Variable roles for a treatment/mediator analysis, in temporal order
/// `baseline → treatment → post-treatment confounders → mediator → outcome`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediationSpec {
    pub outcome: String,
    pub treatment: String,
    pub mediator: String,
    pub baseline_confounders: Vec<String>,
    pub posttreatment_confounders: Vec<String>,
    /// Mediator value at which the controlled direct effect is evaluated.
    pub cde_mediator_value: f64,
    pub treatment_kind: TreatmentKind,
}

impl MediationSpec {
    pub fn new(
        outcome: &str,
        treatment: &str,
        mediator: &str,
        baseline: &[&str],
        post: &[&str],
        cde_mediator_value: f64,
    ) -> Self {
        Self {
            outcome: outcome.into(),
            treatment: treatment.into(),
            mediator: mediator.into(),
            baseline_confounders: baseline.iter().map(|s| s.to_string()).collect(),
            posttreatment_confounders: post.iter().map(|s| s.to_string()).collect(),
            cde_mediator_value,
            treatment_kind: TreatmentKind::Binary,
        }
    }

    pub fn with_kind(mut self, kind: TreatmentKind) -> Self {
        self.treatment_kind = kind;
        self
    }

    /// Column layout produced by the synthetic mediation generator.
    pub fn simulation(cde_mediator_value: f64) -> Self {
        Self::new("y", "d", "m", &["x"], &["z"], cde_mediator_value)
    }

    pub fn validate(&self, table: &ColumnTable) -> Result<()> {
        if !self.cde_mediator_value.is_finite() {
            return Err(Error::InvalidSpec(
                "the controlled-direct-effect mediator value must be finite".into(),
            ));
        }
        let single = [
            self.outcome.as_str(),
            self.treatment.as_str(),
            self.mediator.as_str(),
        ];
        let base: Vec<&str> = self
            .baseline_confounders
            .iter()
            .map(String::as_str)
            .collect();
        let post: Vec<&str> = self
            .posttreatment_confounders
            .iter()
            .map(String::as_str)
            .collect();
        check_roles(table, &[&single, &base, &post])?;
        check_treatment(table, &self.treatment, self.treatment_kind)?;
        check_treatment(table, &self.mediator, TreatmentKind::Continuous)?;
        Ok(())
    }

    fn policy(&self) -> TermPolicy {
        TermPolicy::new(
            [&self.treatment, &self.mediator],
            &self.baseline_confounders,
            &self.posttreatment_confounders,
        )
    }

    fn d(&self) -> Term {
        Term::treatment(&self.treatment)
    }

    fn dm(&self) -> Term {
        self.d().times(&Term::treatment(&self.mediator))
    }
}

/// Regression-with-residuals for the total effect and the controlled direct
/// effect `CDE(1, m) = β_d + β_{d:m}·m`.
pub fn estimate_mediation_rwr(
    table: &ColumnTable,
    spec: &MediationSpec,
    interactions: bool,
) -> Result<EffectReport> {
    spec.validate(table)?;
    let mut diag = Diagnostics::default();
    let plan = ResidualizationPlan::two_period(
        &spec.baseline_confounders,
        &spec.posttreatment_confounders,
        &spec.treatment,
    )?;
    let stage1 = residualize(table, &plan)?;
    diag.warnings.extend(stage1.warnings);
    let y = table.column(&spec.outcome)?;

    let d = spec.d();
    let xr: Vec<Term> = spec
        .baseline_confounders
        .iter()
        .map(|x| Term::residual(x, 0))
        .collect();
    let mut total_terms = vec![Term::intercept(), d.clone()];
    total_terms.extend(xr.iter().cloned());
    if interactions {
        total_terms.extend(xr.iter().map(|x| d.times(x)));
    }
    let total_fit = ols(
        &stage1.table,
        &total_terms,
        y,
        None,
        "total effect",
        &mut diag,
    )?;
    let total = coef(&total_fit, &d);

    let set = if interactions {
        TermSet::MedRwrInteract
    } else {
        TermSet::MedRwrPlain
    };
    let terms = standard_term_sets(set, &spec.policy())?;
    let fit = ols(&stage1.table, &terms, y, None, "direct effect", &mut diag)?;
    record_moderation(&terms, &fit, &mut diag);
    let cde = coef(&fit, &d) + coef(&fit, &spec.dm()) * spec.cde_mediator_value;

    let method = if interactions {
        Method::MedRwrInteract
    } else {
        Method::MedRwr
    };
    Ok(EffectReport::mediation(
        method,
        Some(total),
        cde,
        spec.cde_mediator_value,
        diag,
    ))
}

/// g-estimation of a mediation model without effect moderation: a
/// propensity-augmented outcome regression yields the mediator effects, the
/// outcome is demediated, and the treatment effect is read from a regression
/// of the demediated outcome on treatment, baseline confounders and the
/// treatment propensity.
pub fn estimate_mediation_g(table: &ColumnTable, spec: &MediationSpec) -> Result<EffectReport> {
    spec.validate(table)?;
    let mut diag = Diagnostics::default();
    let base: Vec<&str> = spec
        .baseline_confounders
        .iter()
        .map(String::as_str)
        .collect();
    let post: Vec<&str> = spec
        .posttreatment_confounders
        .iter()
        .map(String::as_str)
        .collect();
    let mut mediator_history = base.clone();
    mediator_history.push(spec.treatment.as_str());
    mediator_history.extend(post.iter().copied());

    let ps_d = propensity(
        table,
        &spec.treatment,
        &base,
        spec.treatment_kind,
        "treatment propensity",
        &mut diag,
    )?;
    let ps_m = propensity(
        table,
        &spec.mediator,
        &mediator_history,
        TreatmentKind::Continuous,
        "mediator propensity",
        &mut diag,
    )?;
    let mut augmented = table.clone();
    let ps_d_name = fresh_name(&augmented, &format!("ps_{}", spec.treatment));
    augmented.push_column(ps_d_name.clone(), ps_d)?;
    let ps_m_name = fresh_name(&augmented, &format!("ps_{}", spec.mediator));
    augmented.push_column(ps_m_name.clone(), ps_m)?;

    let d = spec.d();
    let m = Term::treatment(&spec.mediator);
    let dm = spec.dm();
    let y = table.column(&spec.outcome)?;

    let mut step1_terms = vec![Term::intercept(), d.clone()];
    step1_terms.extend(base.iter().map(|x| Term::raw(x)));
    step1_terms.extend(post.iter().map(|z| Term::raw(z)));
    step1_terms.push(dm.clone());
    step1_terms.push(d.times(&Term::raw(&ps_m_name)));
    step1_terms.push(m.clone());
    let step1 = ols(&augmented, &step1_terms, y, None, "g step 1", &mut diag)?;
    let beta_m = coef(&step1, &m);
    let beta_dm = coef(&step1, &dm);

    let dcol = table.column(&spec.treatment)?;
    let mcol = table.column(&spec.mediator)?;
    let h: Vec<f64> = (0..table.n_rows())
        .map(|i| y[i] - mcol[i] * beta_m - dcol[i] * mcol[i] * beta_dm)
        .collect();

    let mut step2_terms = vec![Term::intercept(), d.clone()];
    step2_terms.extend(base.iter().map(|x| Term::raw(x)));
    step2_terms.push(Term::raw(&ps_d_name));
    let step2 = ols(&augmented, &step2_terms, &h, None, "g step 2", &mut diag)?;
    let cde = coef(&step2, &d) + beta_dm * spec.cde_mediator_value;

    let total_fit = ols(&augmented, &step2_terms, y, None, "total effect", &mut diag)?;
    let total = coef(&total_fit, &d);

    Ok(EffectReport::mediation(
        Method::MedG,
        Some(total),
        cde,
        spec.cde_mediator_value,
        diag,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{std_normal_cdf, RngStream};

    /// x → d → z → m with y = 0.1·d + 0.2·m exactly.
    fn noiseless(n: usize, seed: u64) -> ColumnTable {
        let mut s = RngStream::new(seed, 0, 0);
        let mut cols: [Vec<f64>; 5] = Default::default();
        for _ in 0..n {
            let x = s.normal(0.0, 1.0);
            let d = s.bernoulli(std_normal_cdf(0.5 * x));
            let z = 0.4 * d + 0.3 * x + s.normal(0.0, 1.0);
            let m = 0.5 * z + 0.2 * d + s.normal(0.0, 1.0);
            for (c, v) in cols.iter_mut().zip([x, d, z, m, 0.1 * d + 0.2 * m]) {
                c.push(v);
            }
        }
        ColumnTable::from_columns(["x", "d", "z", "m", "y"].into_iter().zip(cols)).unwrap()
    }

    #[test]
    fn noiseless_cde_is_exact() {
        let t = noiseless(300, 21);
        for at in [0.0, 0.5, 2.0] {
            let spec = MediationSpec::simulation(at);
            for r in [
                estimate_mediation_rwr(&t, &spec, false).unwrap(),
                estimate_mediation_rwr(&t, &spec, true).unwrap(),
                estimate_mediation_g(&t, &spec).unwrap(),
            ] {
                assert!(
                    (r.cde().unwrap() - 0.1).abs() < 1e-8,
                    "{} at {at}",
                    r.method
                );
            }
        }
    }

    #[test]
    fn cde_at_zero_is_treatment_coefficient() {
        let mut t = noiseless(200, 2);
        let mut s = RngStream::new(3, 0, 0);
        let y: Vec<f64> = t
            .column("y")
            .unwrap()
            .iter()
            .map(|v| v + s.normal(0.0, 1.0))
            .collect();
        t.set_column("y", y).unwrap();
        let spec = MediationSpec::simulation(0.0);
        let r = estimate_mediation_rwr(&t, &spec, true).unwrap();

        let plan = ResidualizationPlan::two_period(
            &spec.baseline_confounders,
            &spec.posttreatment_confounders,
            "d",
        )
        .unwrap();
        let stage1 = residualize(&t, &plan).unwrap();
        let terms = standard_term_sets(TermSet::MedRwrInteract, &spec.policy()).unwrap();
        let x = crate::design::build_design(&stage1.table, &terms).unwrap();
        let fit = crate::numerics::solve_least_squares(&x, t.column("y").unwrap(), None).unwrap();
        assert_eq!(r.cde().unwrap().to_bits(), fit.coef("d").unwrap().to_bits());
    }

    #[test]
    fn total_effect_without_mediator_path() {
        // m does not depend on d here, so the total effect equals the direct one.
        let mut s = RngStream::new(6, 0, 0);
        let n = 400;
        let mut cols: [Vec<f64>; 5] = Default::default();
        for _ in 0..n {
            let x = s.normal(0.0, 1.0);
            let d = s.bernoulli(std_normal_cdf(0.5 * x));
            let z = 0.3 * x + s.normal(0.0, 1.0);
            let m = 0.5 * z + s.normal(0.0, 1.0);
            for (c, v) in cols.iter_mut().zip([x, d, z, m, 0.1 * d + 0.2 * m]) {
                c.push(v);
            }
        }
        let t = ColumnTable::from_columns(["x", "d", "z", "m", "y"].into_iter().zip(cols)).unwrap();
        let r = estimate_mediation_rwr(&t, &MediationSpec::simulation(0.5), false).unwrap();
        // Finite-sample correlation between d and m only enters through noise.
        assert!((r.total_effect().unwrap() - 0.1).abs() < 0.05);
        assert!((r.cde().unwrap() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_finite_mediator_value() {
        let t = noiseless(50, 1);
        let spec = MediationSpec::simulation(f64::NAN);
        assert!(matches!(
            estimate_mediation_rwr(&t, &spec, true),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn report_labels() {
        let t = noiseless(100, 4);
        let r = estimate_mediation_g(&t, &MediationSpec::simulation(0.5)).unwrap();
        let labels: Vec<_> = r.effects.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["TotalEffect", "CDE(1,0.5)"]);
    }
}
