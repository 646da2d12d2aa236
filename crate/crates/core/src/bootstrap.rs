//! Nonparametric bootstrap standard errors, resampling either rows or whole
//! clusters.
//!
//! Replicate `b` always draws from `RngStream::new(seed, RESAMPLE_STREAM, b)`
//! and results are gathered in replicate order, so the output does not depend
//! on how many threads run the replicates.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::ColumnTable;
use crate::error::{Error, Result};
use crate::estimators::{EffectReport, Estimates};
use crate::numerics::{std_normal_cdf, RngStream};

const RESAMPLE_STREAM: u64 = 0xB007;
const MAX_FAILURE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueRule {
    /// Two-sided normal approximation `2·Φ(−|estimate / se|)`.
    #[default]
    Normal,
    /// Twice the share of replicates on the far side of zero from the point
    /// estimate, capped at one.
    Sign,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult<R> {
    pub point: R,
    pub labels: Vec<String>,
    /// One row per successful replicate, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub p_value: Vec<f64>,
    pub reps: usize,
    pub failed: usize,
    pub seed: u64,
}

impl BootstrapResult<EffectReport> {
    /// The point-estimate report with standard errors and p-values filled in.
    pub fn into_report(self) -> EffectReport {
        let mut report = self.point;
        for ((effect, se), p) in report.effects.iter_mut().zip(self.se).zip(self.p_value) {
            effect.se = Some(se);
            effect.p_value = Some(p);
        }
        if self.failed > 0 {
            report.diagnostics.warnings.push(format!(
                "{} of {} bootstrap replicates failed and were skipped",
                self.failed, self.reps
            ));
        }
        report
    }
}

/// Row indices for iid replicate `replicate`.
pub fn iid_indices(n: usize, seed: u64, replicate: usize) -> Vec<usize> {
    let mut stream = RngStream::new(seed, RESAMPLE_STREAM, replicate as u64);
    (0..n).map(|_| stream.index(n)).collect()
}

/// Groups row indices by cluster id, clusters ordered by first appearance.
pub fn cluster_rows(ids: &[f64]) -> Vec<Vec<usize>> {
    let mut position: HashMap<u64, usize> = HashMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (row, id) in ids.iter().enumerate() {
        // Normalize -0.0 so it shares a cluster with 0.0.
        let key = (id + 0.0).to_bits();
        let slot = *position.entry(key).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(row);
    }
    clusters
}

/// Row indices for block replicate `replicate`: clusters are drawn with
/// replacement and each draw contributes all of the cluster's rows.
pub fn block_indices(clusters: &[Vec<usize>], seed: u64, replicate: usize) -> Vec<usize> {
    let k = clusters.len();
    let mut stream = RngStream::new(seed, RESAMPLE_STREAM, replicate as u64);
    let mut rows = Vec::new();
    for _ in 0..k {
        rows.extend_from_slice(&clusters[stream.index(k)]);
    }
    rows
}

pub fn bootstrap_iid<R, F>(
    table: &ColumnTable,
    estimator: F,
    reps: usize,
    seed: u64,
    rule: PValueRule,
) -> Result<BootstrapResult<R>>
where
    R: Estimates + Send,
    F: Fn(&ColumnTable) -> Result<R> + Sync,
{
    let n = table.n_rows();
    run(table, estimator, reps, seed, rule, |b| {
        iid_indices(n, seed, b)
    })
}

pub fn bootstrap_block<R, F>(
    table: &ColumnTable,
    cluster_column: &str,
    estimator: F,
    reps: usize,
    seed: u64,
    rule: PValueRule,
) -> Result<BootstrapResult<R>>
where
    R: Estimates + Send,
    F: Fn(&ColumnTable) -> Result<R> + Sync,
{
    let clusters = cluster_rows(table.column(cluster_column)?);
    if clusters.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "block bootstrap needs at least two clusters in `{cluster_column}`"
        )));
    }
    run(table, estimator, reps, seed, rule, |b| {
        block_indices(&clusters, seed, b)
    })
}

fn run<R, F, I>(
    table: &ColumnTable,
    estimator: F,
    reps: usize,
    seed: u64,
    rule: PValueRule,
    indices: I,
) -> Result<BootstrapResult<R>>
where
    R: Estimates + Send,
    F: Fn(&ColumnTable) -> Result<R> + Sync,
    I: Fn(usize) -> Vec<usize> + Sync,
{
    if reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 2 replicates, got {reps}"
        )));
    }
    let point = estimator(table)?;
    let point_values = point.values();
    let width = point_values.len();

    let outcomes: Vec<Option<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let sample = table.select_rows(&indices(b));
            estimator(&sample)
                .ok()
                .map(|r| r.values())
                .filter(|v| v.len() == width && v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * reps as f64 || reps - failed < 2 {
        return Err(Error::TooManyFailures { failed, reps });
    }
    let replicates: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();

    let mut se = Vec::with_capacity(width);
    let mut p_value = Vec::with_capacity(width);
    for j in 0..width {
        let column: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
        let s = sample_sd(&column);
        se.push(s);
        p_value.push(match rule {
            PValueRule::Normal => normal_p_value(point_values[j], s),
            PValueRule::Sign => sign_p_value(point_values[j], &column),
        });
    }

    Ok(BootstrapResult {
        labels: point.labels(),
        point,
        replicates,
        se,
        p_value,
        reps,
        failed,
        seed,
    })
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn normal_p_value(estimate: f64, se: f64) -> f64 {
    if estimate == 0.0 {
        1.0
    } else if se == 0.0 {
        0.0
    } else {
        (2.0 * std_normal_cdf(-(estimate / se).abs())).min(1.0)
    }
}

pub fn sign_p_value(estimate: f64, replicates: &[f64]) -> f64 {
    if estimate == 0.0 {
        return 1.0;
    }
    let opposite = replicates
        .iter()
        .filter(|&&r| if estimate < 0.0 { r > 0.0 } else { r < 0.0 })
        .count();
    (2.0 * opposite as f64 / replicates.len() as f64).min(1.0)
}
