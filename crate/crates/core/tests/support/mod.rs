//! Independent oracles and fuzzed property checks. Each check returns
//! `Err(description)` on the first violation so the same code can back both
//! ordinary tests and the acceptance report.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use rwr_core::bootstrap::{
    block_indices, bootstrap_block, bootstrap_iid, cluster_rows, PValueRule,
};
use rwr_core::design::{residual_name, residualize, ResidualizationPlan};
use rwr_core::estimators::{
    estimate_mediation_g, estimate_mediation_rwr, EffectReport, Estimates, MediationSpec,
};
use rwr_core::montecarlo::{
    run_scenario, simulate_dataset, simulate_mediation_dataset, MediationParams, Scenario,
};
use rwr_core::numerics::{
    fit_probit, probit_log_likelihood, probit_score, solve_least_squares, std_normal_cdf,
    DesignMatrix, RngStream,
};
use rwr_core::{ColumnTable, Error, TimeVaryingMethod, TimeVaryingSpec};

pub type Check = Result<(), String>;

/// Design, its columns, response and optional weights.
pub type Problem = (DesignMatrix, Vec<Vec<f64>>, Vec<f64>, Option<Vec<f64>>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let p = b.len();
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            let (upper, lower) = a.split_at_mut(i);
            for (x, pivot) in lower[0][k..].iter_mut().zip(&upper[k][k..]) {
                *x -= f * pivot;
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Weighted normal equations `XᵀWX β = XᵀWy`.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = cols.len();
    let n = y.len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for j in 0..p {
        for k in 0..p {
            a[j][k] = (0..n).map(|i| w[i] * cols[j][i] * cols[k][i]).sum();
        }
        b[j] = (0..n).map(|i| w[i] * cols[j][i] * y[i]).sum();
    }
    gauss_solve(a, b)
}

pub fn random_problem(stream: &mut RngStream) -> Problem {
    let n = 10 + stream.index(70);
    let p = 2 + stream.index(6).min(n - 3);
    let mut cols = vec![vec![1.0; n]];
    for _ in 1..p {
        let scale = [0.01, 1.0, 10.0, 100.0][stream.index(4)];
        let shift = stream.normal(0.0, 3.0);
        cols.push(
            (0..n)
                .map(|_| shift + scale * stream.normal(0.0, 1.0))
                .collect(),
        );
    }
    let y: Vec<f64> = (0..n).map(|_| stream.normal(0.0, 5.0)).collect();
    let w =
        (stream.uniform() < 0.5).then(|| (0..n).map(|_| 0.2 + 2.8 * stream.uniform()).collect());
    let x = DesignMatrix::from_columns(
        cols.iter()
            .enumerate()
            .map(|(j, c)| (format!("x{j}"), c.clone())),
    )
    .unwrap();
    (x, cols, y, w)
}

pub fn least_squares_oracle() -> Check {
    let mut stream = RngStream::new(2024, 1, 0);
    for case in 0..50 {
        let (x, cols, y, w) = random_problem(&mut stream);
        let fit = solve_least_squares(&x, &y, w.as_deref()).map_err(|e| e.to_string())?;
        ensure(fit.rank == cols.len(), || {
            format!("problem {case}: unexpected rank deficiency")
        })?;
        let unit = vec![1.0; y.len()];
        let want = normal_equations(&cols, &y, w.as_deref().unwrap_or(&unit));
        for (got, want) in fit.coefficient_vec().iter().zip(&want) {
            ensure((got - want).abs() <= 1e-8 * want.abs().max(1.0), || {
                format!("problem {case}: coefficient {got} vs normal equations {want}")
            })?;
        }
    }
    Ok(())
}

fn probit_problem(stream: &mut RngStream) -> (DesignMatrix, Vec<f64>) {
    let n = 40 + stream.index(41);
    let b0 = -0.5 + stream.uniform();
    let b1 = 0.3 + 0.7 * stream.uniform();
    let x: Vec<f64> = (0..n).map(|_| stream.normal(0.0, 1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| stream.bernoulli(std_normal_cdf(b0 + b1 * v)))
        .collect();
    let d = DesignMatrix::from_columns([("one", vec![1.0; n]), ("x", x)]).unwrap();
    (d, y)
}

/// Maximizes the two-parameter log-likelihood by repeatedly refined grids.
fn grid_mle(x: &DesignMatrix, y: &[f64]) -> [f64; 2] {
    let mut center = [0.0, 0.0];
    let mut half = 4.0;
    let steps = 20;
    for _ in 0..40 {
        let mut best = (f64::NEG_INFINITY, center);
        for i in 0..=steps {
            for j in 0..=steps {
                let b = [
                    center[0] - half + 2.0 * half * i as f64 / steps as f64,
                    center[1] - half + 2.0 * half * j as f64 / steps as f64,
                ];
                let ll = probit_log_likelihood(x, y, &b);
                if ll > best.0 {
                    best = (ll, b);
                }
            }
        }
        center = best.1;
        half *= 0.5;
    }
    center
}

pub fn probit_grid_oracle() -> Check {
    let mut stream = RngStream::new(2024, 2, 0);
    for case in 0..10 {
        let (x, y) = probit_problem(&mut stream);
        let fit = fit_probit(&x, &y).map_err(|e| e.to_string())?;
        ensure(fit.converged, || {
            format!("problem {case}: probit did not converge")
        })?;
        let want = grid_mle(&x, &y);
        for (got, want) in fit.coefficient_vec().iter().zip(want) {
            ensure((got - want).abs() < 1e-4, || {
                format!("problem {case}: coefficient {got} vs grid MLE {want}")
            })?;
        }
    }
    Ok(())
}

fn gradient_matches(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Check {
    let h = 1e-6;
    let analytic = probit_score(x, y, beta);
    for j in 0..beta.len() {
        let mut up = beta.to_vec();
        let mut down = beta.to_vec();
        up[j] += h;
        down[j] -= h;
        let fd =
            (probit_log_likelihood(x, y, &up) - probit_log_likelihood(x, y, &down)) / (2.0 * h);
        let scale = analytic[j].abs().max(fd.abs()).max(1.0);
        ensure((analytic[j] - fd).abs() <= 1e-4 * scale, || {
            format!(
                "component {j}: analytic {} vs finite difference {fd}",
                analytic[j]
            )
        })?;
    }
    Ok(())
}

/// At the fitted coefficients (where the score vanishes) and at perturbed
/// points where it does not.
pub fn probit_gradient_check() -> Check {
    let mut stream = RngStream::new(2024, 3, 0);
    for case in 0..10 {
        let (x, y) = probit_problem(&mut stream);
        let fit = fit_probit(&x, &y).map_err(|e| e.to_string())?;
        let beta = fit.coefficient_vec();
        gradient_matches(&x, &y, &beta).map_err(|e| format!("problem {case} at MLE: {e}"))?;
        let moved: Vec<f64> = beta.iter().map(|b| b + stream.normal(0.0, 0.5)).collect();
        gradient_matches(&x, &y, &moved).map_err(|e| format!("problem {case} off MLE: {e}"))?;
    }
    Ok(())
}

pub fn tv_data(seed: u64, n: usize) -> ColumnTable {
    let mut stream = RngStream::new(seed, 99, 0);
    let gamma = 0.1 + 0.4 * stream.uniform();
    let theta = 0.5 * stream.uniform();
    simulate_dataset(gamma, theta, n, &mut stream)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / a.len() as f64
}

pub fn residual_mean_and_purging() -> Check {
    for seed in 0..25 {
        let mut t = tv_data(seed, 150 + 20 * seed as usize);
        let mut stream = RngStream::new(seed, 7, 0);
        // A second confounder per period, one of them binary.
        let extra1: Vec<f64> = (0..t.n_rows()).map(|_| stream.normal(2.0, 3.0)).collect();
        let extra2: Vec<f64> = (0..t.n_rows()).map(|_| stream.bernoulli(0.3)).collect();
        t.push_column("c1b", extra1).unwrap();
        t.push_column("c2b", extra2).unwrap();
        let base = vec!["c1".to_string(), "c1b".to_string()];
        let post = vec!["c2".to_string(), "c2b".to_string()];
        let plan =
            ResidualizationPlan::two_period(&base, &post, "a1").map_err(|e| e.to_string())?;
        let out = residualize(&t, &plan).map_err(|e| e.to_string())?.table;
        for c in base.iter().chain(&post) {
            let r = out.column(&residual_name(c)).unwrap();
            ensure(mean(r).abs() < 1e-8, || {
                format!("seed {seed}: mean of {c} residual is {}", mean(r))
            })?;
        }
        for c in &post {
            let r = out.column(&residual_name(c)).unwrap();
            for p in ["c1", "c1b", "a1"] {
                let cov = covariance(r, out.column(p).unwrap());
                ensure(cov.abs() < 1e-8, || {
                    format!("seed {seed}: cov({c} residual, {p}) = {cov}")
                })?;
            }
        }
    }
    Ok(())
}

fn all_reports(t: &ColumnTable, spec: &TimeVaryingSpec) -> Result<Vec<EffectReport>, String> {
    TimeVaryingMethod::ALL
        .iter()
        .map(|m| {
            m.estimate(t, spec)
                .map_err(|e| format!("{}: {e}", m.name()))
        })
        .collect()
}

pub fn report_identities() -> Check {
    let spec = TimeVaryingSpec::simulation();
    for seed in 0..20 {
        let t = tv_data(seed, 200 + 10 * seed as usize);
        for r in all_reports(&t, &spec)? {
            let (dte, p0, p1) = (
                r.dte().unwrap(),
                r.pte_given_a1_0().unwrap(),
                r.pte_given_a1_1().unwrap(),
            );
            ensure(r.cte().unwrap() == dte + p1, || {
                format!("{}: CTE != DTE + PTE(1,1)", r.method)
            })?;
            ensure(r.ine().unwrap() == p1 - p0, || {
                format!("{}: INE != PTE(1,1) - PTE(0,1)", r.method)
            })?;
        }
    }
    Ok(())
}

pub fn confounder_affine_invariance() -> Check {
    let spec = TimeVaryingSpec::simulation();
    for seed in 0..10 {
        let t = tv_data(seed, 300);
        let moved = t
            .map_column("c1", |v| 3.0 - 2.0 * v)
            .and_then(|t| t.map_column("c2", |v| 0.5 * v + 7.0))
            .map_err(|e| e.to_string())?;
        let before = all_reports(&t, &spec)?;
        let after = all_reports(&moved, &spec)?;
        for (a, b) in before.iter().zip(&after) {
            for (x, y) in a.values().iter().zip(b.values()) {
                ensure((x - y).abs() < 1e-8, || {
                    format!("seed {seed}, {}: effect moved from {x} to {y}", a.method)
                })?;
            }
        }
    }
    Ok(())
}

pub fn noiseless_recovery() -> Check {
    let spec = TimeVaryingSpec::simulation();
    for seed in 0..10 {
        let mut t = tv_data(seed, 250);
        let (a1, a2) = (
            t.column("a1").unwrap().to_vec(),
            t.column("a2").unwrap().to_vec(),
        );
        let y: Vec<f64> = (0..t.n_rows())
            .map(|i| 1.0 + 0.3 * a1[i] + 0.2 * a2[i] + 0.1 * a1[i] * a2[i])
            .collect();
        t.set_column("y", y).unwrap();
        let want = [0.3, 0.2, 0.3, 0.6, 0.1];
        for r in all_reports(&t, &spec)? {
            for (got, want) in r.values().iter().zip(want) {
                ensure((got - want).abs() < 1e-8, || {
                    format!("seed {seed}, {}: {got} vs {want}", r.method)
                })?;
            }
        }

        let mut stream = RngStream::new(seed, 8, 0);
        let mut m = simulate_mediation_dataset(&MediationParams::default(), 250, &mut stream);
        let (d, med) = (
            m.column("d").unwrap().to_vec(),
            m.column("m").unwrap().to_vec(),
        );
        let y: Vec<f64> = (0..m.n_rows())
            .map(|i| 0.5 + 0.2 * d[i] + 0.3 * med[i] + 0.1 * d[i] * med[i])
            .collect();
        m.set_column("y", y).unwrap();
        let spec = MediationSpec::simulation(1.5);
        let reports = [
            estimate_mediation_rwr(&m, &spec, false),
            estimate_mediation_rwr(&m, &spec, true),
            estimate_mediation_g(&m, &spec),
        ];
        for r in reports {
            let r = r.map_err(|e| e.to_string())?;
            let cde = r.cde().unwrap();
            ensure((cde - 0.35).abs() < 1e-8, || {
                format!("seed {seed}, {}: CDE {cde}", r.method)
            })?;
        }
    }
    Ok(())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

pub fn bootstrap_thread_determinism() -> Check {
    let t = tv_data(3, 300);
    let spec = TimeVaryingSpec::simulation();
    let est = |d: &ColumnTable| TimeVaryingMethod::RwrInteract.estimate(d, &spec);
    let run = || bootstrap_iid(&t, est, 40, 17, PValueRule::Normal).unwrap();
    let (one, many) = (in_pool(1, run), in_pool(4, run));
    ensure(
        one.replicates == many.replicates && one.se == many.se && one.p_value == many.p_value,
        || "iid bootstrap differs between 1 and 4 threads".into(),
    )?;

    let mut t = t;
    let ids: Vec<f64> = (0..t.n_rows()).map(|i| (i / 3) as f64).collect();
    t.push_column("cluster", ids).unwrap();
    let run = || bootstrap_block(&t, "cluster", est, 40, 17, PValueRule::Sign).unwrap();
    let (one, many) = (in_pool(1, run), in_pool(4, run));
    ensure(
        one.replicates == many.replicates && one.se == many.se && one.p_value == many.p_value,
        || "block bootstrap differs between 1 and 4 threads".into(),
    )
}

pub fn simulation_thread_determinism() -> Check {
    let sc = Scenario::new(0.4, 0.3, 200, 12, 31).with_id(7);
    let one = in_pool(1, || run_scenario(&sc).unwrap());
    let many = in_pool(4, || run_scenario(&sc).unwrap());
    ensure(one == many, || {
        "simulation summary differs between 1 and 4 threads".into()
    })
}

/// Every replicate is a concatenation of whole clusters, and the estimator
/// only ever sees whole clusters.
pub fn block_cluster_integrity() -> Check {
    let mut stream = RngStream::new(2024, 4, 0);
    for case in 0..100 {
        let n = 5 + stream.index(60);
        let k = 2 + stream.index(n.min(12) - 1);
        let ids: Vec<f64> = (0..n).map(|_| stream.index(k) as f64).collect();
        if cluster_rows(&ids).len() < 2 {
            continue;
        }
        let rowid: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let t = ColumnTable::from_columns([("id", ids.clone()), ("row", rowid)]).unwrap();
        let clusters = cluster_rows(&ids);
        for b in 0..5 {
            let rows = block_indices(&clusters, case, b);
            let mut pos = 0;
            while pos < rows.len() {
                let c = clusters.iter().find(|c| c[0] == rows[pos]).ok_or_else(|| {
                    format!("case {case}: replicate {b} starts a block mid-cluster")
                })?;
                ensure(rows.get(pos..pos + c.len()) == Some(c.as_slice()), || {
                    format!("case {case}: replicate {b} splits a cluster")
                })?;
                pos += c.len();
            }
        }

        let violations = AtomicUsize::new(0);
        let sizes: Vec<(f64, usize)> = clusters.iter().map(|c| (ids[c[0]], c.len())).collect();
        let est = |d: &ColumnTable| -> rwr_core::Result<Vec<f64>> {
            let got = d.column("id")?;
            for &(id, size) in &sizes {
                if got.iter().filter(|&&v| v == id).count() % size != 0 {
                    violations.fetch_add(1, Ordering::Relaxed);
                    return Err(Error::InvalidArgument("split cluster".into()));
                }
            }
            Ok(vec![mean(d.column("row")?)])
        };
        bootstrap_block(&t, "id", est, 20, case, PValueRule::Normal).map_err(|e| e.to_string())?;
        ensure(violations.load(Ordering::Relaxed) == 0, || {
            format!("case {case}: estimator saw a split cluster")
        })?;
    }
    Ok(())
}

/// `(estimate, truth)` for the mediation generator without moderation at a large n.
pub fn mediation_cde_large_n() -> Result<(f64, f64), String> {
    let p = MediationParams::default();
    let mut stream = RngStream::new(4242, 50, 0);
    let data = simulate_mediation_dataset(&p, 100_000, &mut stream);
    let r = estimate_mediation_rwr(&data, &MediationSpec::simulation(0.5), true)
        .map_err(|e| e.to_string())?;
    Ok((r.cde().unwrap(), p.true_cde(0.5)))
}

/// Number of replications (of 200, n = 10,000, moderation on) in which the
/// g estimator's CDE error exceeds regression-with-residuals'.
pub fn mediation_moderation_wins() -> Result<usize, String> {
    use rwr_core::montecarlo::Moderation;
    let p = MediationParams::default().with_moderation(Moderation::DEFAULT);
    let spec = MediationSpec::simulation(0.5);
    let truth = p.true_cde(0.5);
    let wins: Vec<bool> = (0..200u64)
        .map(|r| {
            let mut stream = RngStream::new(4242, 51, r);
            let data = simulate_mediation_dataset(&p, 10_000, &mut stream);
            let g = estimate_mediation_g(&data, &spec)
                .map_err(|e| e.to_string())?
                .cde()
                .unwrap();
            let rwr = estimate_mediation_rwr(&data, &spec, true)
                .map_err(|e| e.to_string())?
                .cde()
                .unwrap();
            Ok((g - truth).abs() > (rwr - truth).abs())
        })
        .collect::<Result<_, String>>()?;
    Ok(wins.into_iter().filter(|&w| w).count())
}
