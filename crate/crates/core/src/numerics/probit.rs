use indexmap::IndexMap;
use serde::Serialize;

use super::least_squares::{solve_least_squares, DesignMatrix};
use super::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::error::{Error, Result};

/// Fitted probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-10;
const MAX_ITER: usize = 25;
const DEVIANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitFit {
    pub coefficients: IndexMap<String, f64>,
    pub fitted_probabilities: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub dropped_columns: Vec<String>,
}

impl ProbitFit {
    pub fn coef(&self, label: &str) -> Option<f64> {
        self.coefficients.get(label).copied()
    }

    pub fn coefficient_vec(&self) -> Vec<f64> {
        self.coefficients.values().copied().collect()
    }

    /// True when any fitted probability sits on the clamp boundary.
    pub fn hits_boundary(&self) -> bool {
        self.fitted_probabilities
            .iter()
            .any(|&p| p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some((row, &value)) = y.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
        return Err(Error::NonBinaryResponse { row, value });
    }
    if let Some(&first) = y.first() {
        if y.iter().all(|&v| v == first) {
            return Err(Error::ConstantResponse(first));
        }
    }
    Ok(())
}

fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    -2.0 * log_lik_from_mu(y, mu)
}

fn log_lik_from_mu(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &m)| if yi == 1.0 { m.ln() } else { (1.0 - m).ln() })
        .sum()
}

/// Probit log-likelihood at `beta` (aligned with the design columns).
pub fn probit_log_likelihood(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let mu: Vec<f64> = x
        .mul_vec(beta)
        .into_iter()
        .map(|e| clamp_prob(std_normal_cdf(e)))
        .collect();
    log_lik_from_mu(y, &mu)
}

/// Analytic gradient of [`probit_log_likelihood`].
pub fn probit_score(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let eta = x.mul_vec(beta);
    let resid: Vec<f64> = eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| {
            let mu = clamp_prob(std_normal_cdf(e));
            (yi - mu) * std_normal_pdf(e) / (mu * (1.0 - mu))
        })
        .collect();
    x.columns()
        .map(|(_, col)| col.iter().zip(&resid).map(|(a, b)| a * b).sum())
        .collect()
}

/// Probit maximum likelihood by iteratively reweighted least squares.
///
/// Non-convergence is not an error: the fit is returned with
/// `converged == false` and the caller decides what to do with it.
pub fn fit_probit(x: &DesignMatrix, y: &[f64]) -> Result<ProbitFit> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "probit response".into(),
            expected: n,
            found: y.len(),
        });
    }
    if x.n_cols() == 0 || n == 0 {
        return Err(Error::EmptyDesign);
    }
    check_binary(y)?;

    let mut eta: Vec<f64> = y
        .iter()
        .map(|&yi| std_normal_quantile((yi + 0.5) / 2.0))
        .collect::<Result<_>>()?;
    let mut mu: Vec<f64> = eta.iter().map(|&e| clamp_prob(std_normal_cdf(e))).collect();
    let mut dev_old = deviance(y, &mu);

    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    let mut last = None;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        for i in 0..n {
            let d = std_normal_pdf(eta[i]).max(f64::EPSILON);
            let var = mu[i] * (1.0 - mu[i]);
            z[i] = eta[i] + (y[i] - mu[i]) / d;
            w[i] = d * d / var;
        }
        let fit = solve_least_squares(x, &z, Some(&w))?;
        eta = fit.fitted.clone();
        mu = eta.iter().map(|&e| clamp_prob(std_normal_cdf(e))).collect();
        let dev = deviance(y, &mu);
        let rel = (dev - dev_old).abs() / (dev.abs() + 0.1);
        last = Some(fit);
        dev_old = dev;
        if rel < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }

    let fit = last.expect("at least one IRLS iteration runs");
    Ok(ProbitFit {
        coefficients: fit.coefficients,
        log_likelihood: log_lik_from_mu(y, &mu),
        fitted_probabilities: mu,
        converged,
        iterations,
        dropped_columns: fit.dropped_columns,
    })
}
