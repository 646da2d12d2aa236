use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative threshold below which a column's residual norm, after
/// orthogonalization against the retained columns before it, marks the
/// column as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// A labeled, column-major regressor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl DesignMatrix {
    pub fn new(n_rows: usize) -> Self {
        Self {
            labels: Vec::new(),
            columns: Vec::new(),
            n_rows,
        }
    }

    pub fn from_columns<I, S>(columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut iter = columns.into_iter().peekable();
        let n = match iter.peek() {
            Some((_, v)) => v.len(),
            None => return Err(Error::EmptyDesign),
        };
        let mut out = Self::new(n);
        for (label, values) in iter {
            out.push(label, values)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, label: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let label = label.into();
        if values.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                what: format!("design column `{label}`"),
                expected: self.n_rows,
                found: values.len(),
            });
        }
        if self.labels.contains(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        self.labels.push(label);
        self.columns.push(values);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|j| self.columns[j].as_slice())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    /// Row-wise linear predictor `X β`, with `beta` aligned to the columns.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (col, &b) in self.columns.iter().zip(beta) {
            if b == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(col) {
                *o += b * x;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeastSquaresFit {
    pub coefficients: IndexMap<String, f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rank: usize,
    pub dropped_columns: Vec<String>,
}

impl LeastSquaresFit {
    /// Coefficient by label; dropped columns report 0.
    pub fn coef(&self, label: &str) -> Option<f64> {
        self.coefficients.get(label).copied()
    }

    pub fn coefficient_vec(&self) -> Vec<f64> {
        self.coefficients.values().copied().collect()
    }
}

/// Householder reflector `I - tau v vᵀ` acting on rows `start..n`.
struct Reflector {
    start: usize,
    v: Vec<f64>,
    tau: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.start..];
        let dot: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let s = self.tau * dot;
        for (t, &vi) in tail.iter_mut().zip(&self.v) {
            *t -= s * vi;
        }
    }
}

/// Weighted least squares via Householder QR, processing columns in their
/// given order and dropping any column that is numerically dependent on the
/// columns retained before it.
pub fn solve_least_squares(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<LeastSquaresFit> {
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(Error::EmptyDesign);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response".into(),
            expected: n,
            found: y.len(),
        });
    }
    let sqrt_w = match weights {
        None => None,
        Some(w) => {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "weights".into(),
                    expected: n,
                    found: w.len(),
                });
            }
            if let Some((row, &value)) = w
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
            {
                return Err(Error::InvalidWeight { row, value });
            }
            if w.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroWeights);
            }
            Some(w.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
        }
    };

    let scale = |v: &[f64]| -> Vec<f64> {
        match &sqrt_w {
            Some(sw) => v.iter().zip(sw).map(|(a, s)| a * s).collect(),
            None => v.to_vec(),
        }
    };

    let mut reflectors: Vec<Reflector> = Vec::new();
    // Upper-triangular factor, one column per retained design column.
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();

    for (j, (label, col)) in x.columns().enumerate() {
        let mut a = scale(col);
        let original_norm = norm(&a);
        for h in &reflectors {
            h.apply(&mut a);
        }
        let r = reflectors.len();
        let tail_norm = norm(&a[r..]);
        if r >= n || original_norm == 0.0 || tail_norm <= RANK_TOL * original_norm {
            dropped.push(label.to_string());
            continue;
        }
        let alpha = if a[r] > 0.0 { -tail_norm } else { tail_norm };
        let mut v = a[r..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let tau = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        let mut rc = a[..r].to_vec();
        rc.push(alpha);
        r_cols.push(rc);
        reflectors.push(Reflector { start: r, v, tau });
        kept.push(j);
    }

    let rank = kept.len();
    let mut qtb = scale(y);
    for h in &reflectors {
        h.apply(&mut qtb);
    }

    // Back substitution on the retained block.
    let mut beta_kept = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut acc = qtb[i];
        for k in (i + 1)..rank {
            acc -= r_cols[k][i] * beta_kept[k];
        }
        beta_kept[i] = acc / r_cols[i][i];
    }

    let mut beta = vec![0.0; x.n_cols()];
    for (&j, &b) in kept.iter().zip(&beta_kept) {
        beta[j] = b;
    }
    let fitted = x.mul_vec(&beta);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let coefficients = x
        .labels()
        .iter()
        .cloned()
        .zip(beta)
        .collect::<IndexMap<_, _>>();

    Ok(LeastSquaresFit {
        coefficients,
        residuals,
        fitted,
        rank,
        dropped_columns: dropped,
    })
}

fn norm(v: &[f64]) -> f64 {
    // Scaled accumulation avoids overflow for extreme columns.
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let s: f64 = v.iter().map(|x| (x / max) * (x / max)).sum();
    max * s.sqrt()
}
