use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

use crate::numerics::ProbitFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Conventional,
    Iptw,
    G,
    Rwr,
    RwrInteract,
    MedRwr,
    MedRwrInteract,
    MedG,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Iptw => "iptw",
            Method::G => "g",
            Method::Rwr => "rwr",
            Method::RwrInteract => "rwr-interact",
            Method::MedRwr => "med-rwr",
            Method::MedRwrInteract => "med-rwr-interact",
            Method::MedG => "med-g",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Estimand {
    /// Effect of the first treatment with the second set to zero.
    Dte,
    /// Effect of the second treatment among the first-period untreated.
    PteA1Zero,
    /// Effect of the second treatment among the first-period treated.
    PteA1One,
    /// Always versus never treated.
    Cte,
    /// Difference between the two proximal effects.
    Ine,
    TotalEffect,
    /// Controlled direct effect with the mediator fixed at `mediator`.
    Cde {
        mediator: f64,
    },
}

impl Estimand {
    pub fn label(&self) -> String {
        match self {
            Estimand::Dte => "DTE(1,0)".into(),
            Estimand::PteA1Zero => "PTE(0,1)".into(),
            Estimand::PteA1One => "PTE(1,1)".into(),
            Estimand::Cte => "CTE".into(),
            Estimand::Ine => "INE".into(),
            Estimand::TotalEffect => "TotalEffect".into(),
            Estimand::Cde { mediator } => format!("CDE(1,{mediator})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effect {
    pub estimand: Estimand,
    pub label: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub p_value: Option<f64>,
}

impl Effect {
    fn new(estimand: Estimand, estimate: f64) -> Self {
        Self {
            label: estimand.label(),
            estimand,
            estimate,
            se: None,
            p_value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitDiagnostic {
    pub model: String,
    pub converged: bool,
    pub iterations: usize,
    pub at_boundary: bool,
}

impl ProbitDiagnostic {
    pub fn from_fit(model: impl Into<String>, fit: &ProbitFit) -> Self {
        Self {
            model: model.into(),
            converged: fit.converged,
            iterations: fit.iterations,
            at_boundary: fit.hits_boundary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    pub trimmed: usize,
}

impl WeightSummary {
    pub fn of(weights: &[f64], trimmed: usize) -> Self {
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let var = if weights.len() > 1 {
            weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            min: weights.iter().copied().fold(f64::INFINITY, f64::min),
            max: weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            sd: var.sqrt(),
            trimmed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub dropped_columns: Vec<String>,
    pub probit: Vec<ProbitDiagnostic>,
    pub weights: Option<WeightSummary>,
    /// Treatment-by-residualized-confounder coefficients.
    pub moderation: IndexMap<String, f64>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn note_dropped(&mut self, stage: &str, dropped: &[String]) {
        self.dropped_columns
            .extend(dropped.iter().map(|d| format!("{stage}: {d}")));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectReport {
    pub method: Method,
    pub effects: Vec<Effect>,
    pub diagnostics: Diagnostics,
}

impl EffectReport {
    /// Builds the five time-varying estimands from the distal effect and the
    /// two proximal effects. The cumulative and interaction effects are
    /// derived here so the identities hold exactly.
    pub fn time_varying(
        method: Method,
        dte: f64,
        pte_a1_zero: f64,
        pte_a1_one: f64,
        diagnostics: Diagnostics,
    ) -> Self {
        let effects = vec![
            Effect::new(Estimand::Dte, dte),
            Effect::new(Estimand::PteA1Zero, pte_a1_zero),
            Effect::new(Estimand::PteA1One, pte_a1_one),
            Effect::new(Estimand::Cte, dte + pte_a1_one),
            Effect::new(Estimand::Ine, pte_a1_one - pte_a1_zero),
        ];
        Self {
            method,
            effects,
            diagnostics,
        }
    }

    pub fn mediation(
        method: Method,
        total_effect: Option<f64>,
        cde: f64,
        mediator: f64,
        diagnostics: Diagnostics,
    ) -> Self {
        let mut effects = Vec::with_capacity(2);
        if let Some(te) = total_effect {
            effects.push(Effect::new(Estimand::TotalEffect, te));
        }
        effects.push(Effect::new(Estimand::Cde { mediator }, cde));
        Self {
            method,
            effects,
            diagnostics,
        }
    }

    fn find(&self, pred: impl Fn(&Estimand) -> bool) -> Option<f64> {
        self.effects
            .iter()
            .find(|e| pred(&e.estimand))
            .map(|e| e.estimate)
    }

    pub fn dte(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::Dte)
    }

    pub fn pte_given_a1_0(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::PteA1Zero)
    }

    pub fn pte_given_a1_1(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::PteA1One)
    }

    pub fn cte(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::Cte)
    }

    pub fn ine(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::Ine)
    }

    pub fn total_effect(&self) -> Option<f64> {
        self.find(|e| *e == Estimand::TotalEffect)
    }

    pub fn cde(&self) -> Option<f64> {
        self.find(|e| matches!(e, Estimand::Cde { .. }))
    }
}

/// Anything that yields a fixed-length vector of point estimates; the
/// bootstrap resamples over these.
pub trait Estimates {
    fn values(&self) -> Vec<f64>;

    fn labels(&self) -> Vec<String> {
        (0..self.values().len()).map(|i| format!("v{i}")).collect()
    }
}

impl Estimates for EffectReport {
    fn values(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.estimate).collect()
    }

    fn labels(&self) -> Vec<String> {
        self.effects.iter().map(|e| e.label.clone()).collect()
    }
}

impl Estimates for f64 {
    fn values(&self) -> Vec<f64> {
        vec![*self]
    }
}

impl Estimates for Vec<f64> {
    fn values(&self) -> Vec<f64> {
        self.clone()
    }
}
