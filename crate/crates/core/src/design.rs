//! Stage one of regression-with-residuals (residualizing confounders on the
//! observed past) and term-based construction of second-stage designs.
//!
//! A [`Term`] is a product of factors. Each factor is a raw column, a
//! treatment column, or the residualized version of a confounder, which lives
//! in the table under the confounder's name plus [`RES_SUFFIX`]. Terms that
//! multiply a treatment by two *different* residualized confounders from the
//! same block are rejected: their conditional effects cannot be decomposed
//! into zero-mean residual terms.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dataset::ColumnTable;
use crate::error::{Error, Result};
use crate::numerics::{fit_probit, solve_least_squares, DesignMatrix};

pub const RES_SUFFIX: &str = "__res";
pub const INTERCEPT: &str = "(Intercept)";

/// Residual norms below this fraction of the confounder's own norm are
/// treated as an exact fit and zeroed.
const ZERO_RESIDUAL_TOL: f64 = 1e-10;

pub fn residual_name(confounder: &str) -> String {
    format!("{confounder}{RES_SUFFIX}")
}

/// How binary confounders are residualized. Continuous confounders are always
/// residualized with a linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum FirstStage {
    #[default]
    Linear,
    /// `c - Φ(x̂ᵀβ)` from a probit fit, for 0/1 confounders only.
    ProbitForBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualBlock {
    pub confounders: Vec<String>,
    /// Raw confounders and treatments from earlier blocks. The intercept is
    /// implicit.
    pub predictors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualizationPlan {
    blocks: Vec<ResidualBlock>,
    first_stage: FirstStage,
}

impl ResidualizationPlan {
    pub fn new(blocks: Vec<ResidualBlock>) -> Result<Self> {
        let mut seen: HashSet<&str> = HashSet::new();
        for (t, block) in blocks.iter().enumerate() {
            if t == 0 && !block.predictors.is_empty() {
                return Err(Error::InvalidPlan(
                    "the first block is mean-centered and takes no predictors".into(),
                ));
            }
            for c in &block.confounders {
                if !seen.insert(c) {
                    return Err(Error::InvalidPlan(format!(
                        "confounder `{c}` appears more than once"
                    )));
                }
            }
        }
        for (t, block) in blocks.iter().enumerate() {
            for p in &block.predictors {
                let later = blocks[t..].iter().any(|b| b.confounders.contains(p));
                if later {
                    return Err(Error::InvalidPlan(format!(
                        "block {} predictor `{p}` is not measured before the block",
                        t + 1
                    )));
                }
            }
        }
        Ok(Self {
            blocks,
            first_stage: FirstStage::Linear,
        })
    }

    /// Baseline confounders mean-centered; post-treatment confounders
    /// regressed on the baseline confounders and the first treatment.
    pub fn two_period(baseline: &[String], post: &[String], first_treatment: &str) -> Result<Self> {
        let mut predictors = baseline.to_vec();
        predictors.push(first_treatment.to_string());
        Self::new(vec![
            ResidualBlock {
                confounders: baseline.to_vec(),
                predictors: Vec::new(),
            },
            ResidualBlock {
                confounders: post.to_vec(),
                predictors,
            },
        ])
    }

    pub fn with_first_stage(mut self, first_stage: FirstStage) -> Self {
        self.first_stage = first_stage;
        self
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }
}

#[derive(Debug, Clone)]
pub struct Residualized {
    pub table: ColumnTable,
    pub warnings: Vec<String>,
}

fn is_binary(col: &[f64]) -> bool {
    col.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Appends `<c>__res` for every confounder in the plan. Input columns are
/// left untouched.
pub fn residualize(table: &ColumnTable, plan: &ResidualizationPlan) -> Result<Residualized> {
    let n = table.n_rows();
    let mut out = table.clone();
    let mut warnings = Vec::new();

    for block in &plan.blocks {
        let mut x = DesignMatrix::new(n);
        x.push(INTERCEPT, vec![1.0; n])?;
        for p in &block.predictors {
            x.push(p.clone(), table.column(p)?.to_vec())?;
        }
        for c in &block.confounders {
            let name = residual_name(c);
            if table.contains(&name) {
                return Err(Error::InvalidPlan(format!(
                    "column `{name}` already exists in the input"
                )));
            }
            let values = table.column(c)?;
            let use_probit = plan.first_stage == FirstStage::ProbitForBinary
                && is_binary(values)
                && values.contains(&1.0)
                && values.contains(&0.0);
            let mut resid = if use_probit {
                let fit = fit_probit(&x, values)?;
                if !fit.converged {
                    warnings.push(format!("probit first stage for `{c}` did not converge"));
                }
                if !fit.dropped_columns.is_empty() {
                    warnings.push(format!(
                        "first stage for `{c}` dropped collinear predictors {:?}",
                        fit.dropped_columns
                    ));
                }
                values
                    .iter()
                    .zip(&fit.fitted_probabilities)
                    .map(|(v, p)| v - p)
                    .collect()
            } else {
                let fit = solve_least_squares(&x, values, None)?;
                if !fit.dropped_columns.is_empty() {
                    warnings.push(format!(
                        "first stage for `{c}` dropped collinear predictors {:?}",
                        fit.dropped_columns
                    ));
                }
                fit.residuals
            };
            let scale = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= ZERO_RESIDUAL_TOL * scale {
                warnings.push(format!(
                    "`{c}` is fully explained by its predictors; its residual and every term using it are dropped"
                ));
                resid.iter_mut().for_each(|v| *v = 0.0);
            }
            out.push_column(name, resid)?;
        }
    }
    Ok(Residualized {
        table: out,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FactorKind {
    Raw,
    Treatment,
    /// Residualized confounder from the given (0-based) plan block.
    Residualized {
        block: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Factor {
    pub name: String,
    pub kind: FactorKind,
}

impl Factor {
    pub fn column(&self) -> String {
        match self.kind {
            FactorKind::Residualized { .. } => residual_name(&self.name),
            _ => self.name.clone(),
        }
    }
}

/// A product of factors; the empty product is the intercept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    pub fn intercept() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    pub fn from_factors(mut factors: Vec<Factor>) -> Self {
        factors.sort_by_key(|f| f.column());
        Self { factors }
    }

    pub fn raw(name: &str) -> Self {
        Self::single(name, FactorKind::Raw)
    }

    pub fn treatment(name: &str) -> Self {
        Self::single(name, FactorKind::Treatment)
    }

    pub fn residual(name: &str, block: usize) -> Self {
        Self::single(name, FactorKind::Residualized { block })
    }

    fn single(name: &str, kind: FactorKind) -> Self {
        Self {
            factors: vec![Factor {
                name: name.to_string(),
                kind,
            }],
        }
    }

    pub fn times(&self, other: &Term) -> Term {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self::from_factors(factors)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_intercept(&self) -> bool {
        self.factors.is_empty()
    }

    /// Sorted factor column names joined by `:`.
    pub fn label(&self) -> String {
        if self.factors.is_empty() {
            return INTERCEPT.to_string();
        }
        self.factors
            .iter()
            .map(Factor::column)
            .collect::<Vec<_>>()
            .join(":")
    }

    pub fn check_admissible(&self) -> Result<()> {
        let has_treatment = self.factors.iter().any(|f| f.kind == FactorKind::Treatment);
        if !has_treatment {
            return Ok(());
        }
        let residuals: Vec<(usize, &str)> = self
            .factors
            .iter()
            .filter_map(|f| match f.kind {
                FactorKind::Residualized { block } => Some((block, f.name.as_str())),
                _ => None,
            })
            .collect();
        for (i, (bi, ni)) in residuals.iter().enumerate() {
            for (bj, nj) in &residuals[i + 1..] {
                if bi == bj && ni != nj {
                    return Err(Error::Inadmissible(self.label()));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One design column per term, each the elementwise product of its factors.
/// Terms with identical labels are the same regressor and appear once.
pub fn build_design(table: &ColumnTable, terms: &[Term]) -> Result<DesignMatrix> {
    let n = table.n_rows();
    let mut x = DesignMatrix::new(n);
    let mut seen = HashSet::new();
    for term in terms {
        term.check_admissible()?;
        let label = term.label();
        if !seen.insert(label.clone()) {
            continue;
        }
        let mut values = vec![1.0; n];
        for factor in term.factors() {
            let col = table.column(&factor.column())?;
            values.iter_mut().zip(col).for_each(|(v, c)| *v *= c);
        }
        x.push(label, values)?;
    }
    if x.n_cols() == 0 {
        return Err(Error::EmptyDesign);
    }
    Ok(x)
}

/// Canonical regressor sets for each estimator's regression stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TermSet {
    Conventional,
    Iptw,
    GStep1,
    GStep2,
    RwrPlain,
    RwrInteract,
    MedRwrPlain,
    MedRwrInteract,
}

impl TermSet {
    pub const ALL: [TermSet; 8] = [
        TermSet::Conventional,
        TermSet::Iptw,
        TermSet::GStep1,
        TermSet::GStep2,
        TermSet::RwrPlain,
        TermSet::RwrInteract,
        TermSet::MedRwrPlain,
        TermSet::MedRwrInteract,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TermSet::Conventional => "conventional",
            TermSet::Iptw => "iptw",
            TermSet::GStep1 => "g-step1",
            TermSet::GStep2 => "g-step2",
            TermSet::RwrPlain => "rwr-plain",
            TermSet::RwrInteract => "rwr-interact",
            TermSet::MedRwrPlain => "med-rwr-plain",
            TermSet::MedRwrInteract => "med-rwr-interact",
        }
    }
}

impl FromStr for TermSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TermSet::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Variable roles that resolve a [`TermSet`] into concrete terms.
///
/// For mediation sets, `treatments` is `[treatment, mediator]`, `baseline` the
/// pre-treatment confounders and `post` the treatment-induced confounders.
#[derive(Debug, Clone, PartialEq)]
pub struct TermPolicy {
    pub treatments: [String; 2],
    pub baseline: Vec<String>,
    pub post: Vec<String>,
    /// Propensity-score column names for the two treatments (g-estimation).
    pub propensity: [String; 2],
    /// Add the residual-by-residual nuisance products and the higher-order
    /// treatment interactions that saturate the one-confounder-per-period
    /// model.
    pub saturated: bool,
}

impl TermPolicy {
    pub fn new(treatments: [&str; 2], baseline: &[String], post: &[String]) -> Self {
        Self {
            treatments: treatments.map(str::to_string),
            baseline: baseline.to_vec(),
            post: post.to_vec(),
            propensity: treatments.map(|t| format!("ps_{t}")),
            saturated: false,
        }
    }
}

pub fn standard_term_sets(set: TermSet, policy: &TermPolicy) -> Result<Vec<Term>> {
    let a1 = Term::treatment(&policy.treatments[0]);
    let a2 = Term::treatment(&policy.treatments[1]);
    let raw = |names: &[String]| names.iter().map(|c| Term::raw(c)).collect::<Vec<_>>();
    let res = |names: &[String], block| {
        names
            .iter()
            .map(|c| Term::residual(c, block))
            .collect::<Vec<_>>()
    };
    let c1r = res(&policy.baseline, 0);
    let c2r = res(&policy.post, 1);
    let times_all = |t: &Term, xs: &[Term]| xs.iter().map(|x| t.times(x)).collect::<Vec<_>>();

    let mut terms = vec![Term::intercept()];
    match set {
        TermSet::Conventional => {
            terms.extend(raw(&policy.baseline));
            terms.push(a1.clone());
            terms.extend(raw(&policy.post));
            terms.push(a2.clone());
            terms.push(a1.times(&a2));
        }
        TermSet::Iptw => {
            terms.extend([a1.clone(), a2.clone(), a1.times(&a2)]);
        }
        TermSet::GStep1 => {
            let ps1 = Term::raw(&policy.propensity[0]);
            let ps2 = Term::raw(&policy.propensity[1]);
            terms.extend(raw(&policy.baseline));
            terms.push(ps1);
            terms.push(a1.clone());
            terms.extend(raw(&policy.post));
            terms.push(ps2.clone());
            terms.push(a1.times(&ps2));
            terms.push(a2.clone());
            terms.push(a1.times(&a2));
        }
        TermSet::GStep2 => {
            terms.extend(raw(&policy.baseline));
            terms.push(Term::raw(&policy.propensity[0]));
            terms.push(a1.clone());
        }
        TermSet::RwrPlain | TermSet::RwrInteract => {
            let interact = set == TermSet::RwrInteract;
            terms.extend(c1r.iter().cloned());
            terms.push(a1.clone());
            if interact {
                terms.extend(times_all(&a1, &c1r));
            }
            terms.extend(c2r.iter().cloned());
            if interact {
                terms.extend(times_all(&a1, &c2r));
            }
            terms.push(a2.clone());
            terms.push(a1.times(&a2));
            if interact {
                terms.extend(times_all(&a2, &c1r));
                terms.extend(times_all(&a2, &c2r));
            }
            if policy.saturated {
                if !interact {
                    return Err(Error::InvalidSpec(
                        "the saturated model extends the interaction term set".into(),
                    ));
                }
                if c1r.len() != 1 || c2r.len() != 1 {
                    return Err(Error::InvalidSpec(
                        "the saturated model requires exactly one confounder per period".into(),
                    ));
                }
                let (r1, r2) = (&c1r[0], &c2r[0]);
                let rr = r1.times(r2);
                let a12 = a1.times(&a2);
                terms.push(rr.clone());
                terms.push(a1.times(&rr));
                terms.push(a12.times(r1));
                terms.push(a12.times(r2));
                terms.push(a2.times(&rr));
                terms.push(a12.times(&rr));
            }
        }
        TermSet::MedRwrPlain | TermSet::MedRwrInteract => {
            let interact = set == TermSet::MedRwrInteract;
            let (d, m) = (&a1, &a2);
            let xr = &c1r;
            let zr = &c2r;
            terms.extend(xr.iter().cloned());
            terms.push(d.clone());
            if interact {
                terms.extend(times_all(d, xr));
            }
            terms.extend(zr.iter().cloned());
            terms.extend(times_all(d, zr));
            for x in xr {
                terms.extend(times_all(x, zr));
            }
            terms.push(m.clone());
            terms.push(d.times(m));
            if interact {
                let dm = d.times(m);
                terms.extend(times_all(m, xr));
                terms.extend(times_all(&dm, xr));
                terms.extend(times_all(m, zr));
                terms.extend(times_all(&dm, zr));
            }
        }
    }
    Ok(terms)
}
