//! End-to-end acceptance report: one PASS/FAIL line per criterion, non-zero
//! exit if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::process::Command;
use std::time::Instant;

use serde_json::Value;

type Outcome = Result<String, String>;
type Named<T> = (&'static str, fn() -> T);
/// `cells[estimator][scenario] = (bias, sd, rmse)`.
type Cells = Vec<Vec<(f64, f64, f64)>>;

const ESTIMATORS: [&str; 5] = ["conventional", "iptw", "g", "rwr", "rwr-interact"];

/// Reference bias, SD and RMSE per estimator (rows) and scenario (columns).
const TABLE1: [[[f64; 5]; 3]; 5] = [
    [
        [-0.150, -0.200, -0.252, -0.299, -0.351],
        [0.134, 0.137, 0.141, 0.145, 0.151],
        [0.201, 0.242, 0.288, 0.332, 0.382],
    ],
    [
        [-0.001, 0.002, 0.010, 0.035, 0.085],
        [0.135, 0.147, 0.176, 0.228, 0.296],
        [0.135, 0.147, 0.176, 0.230, 0.308],
    ],
    [
        [0.000, 0.000, -0.001, 0.002, 0.000],
        [0.134, 0.139, 0.145, 0.152, 0.163],
        [0.134, 0.139, 0.145, 0.152, 0.163],
    ],
    [
        [0.000, 0.000, -0.001, 0.002, 0.000],
        [0.134, 0.139, 0.145, 0.151, 0.161],
        [0.134, 0.139, 0.145, 0.151, 0.161],
    ],
    [
        [0.000, 0.000, -0.001, 0.002, -0.001],
        [0.134, 0.140, 0.146, 0.154, 0.164],
        [0.134, 0.140, 0.146, 0.154, 0.164],
    ],
];

const TABLE2_RWR_BIAS: [f64; 5] = [-0.037, -0.076, -0.115, -0.151, -0.192];

fn rwr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rwr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate_table(k: &str) -> Result<Cells, String> {
    let out = rwr(&[
        "simulate", "--table", k, "--reps", "10000", "--n", "500", "--format", "json",
    ]);
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let scenarios = v["scenarios"].as_array().ok_or("missing scenarios")?;
    Ok(ESTIMATORS
        .iter()
        .map(|name| {
            scenarios
                .iter()
                .map(|s| {
                    let e = s["estimators"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .find(|e| e["estimator"] == *name)
                        .unwrap();
                    (
                        e["bias"].as_f64().unwrap(),
                        e["sd"].as_f64().unwrap(),
                        e["rmse"].as_f64().unwrap(),
                    )
                })
                .collect()
        })
        .collect())
}

fn criterion_1() -> Outcome {
    let cells = simulate_table("1")?;
    let gammas = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut misses = Vec::new();
    for (e, name) in ESTIMATORS.iter().enumerate() {
        for (s, gamma) in gammas.iter().enumerate() {
            let (bias, sd, rmse) = cells[e][s];
            let checks = [
                ("bias", bias, TABLE1[e][0][s], 0.010),
                ("SD", sd, TABLE1[e][1][s], 0.010),
                ("RMSE", rmse, TABLE1[e][2][s], 0.015),
            ];
            for (stat, got, want, tol) in checks {
                if (got - want).abs() > tol {
                    misses.push(format!(
                        "{name} {stat} at gamma {gamma}: {got:.3} vs {want:.3}"
                    ));
                }
            }
        }
    }
    if misses.is_empty() {
        Ok("all 75 cells within tolerance".into())
    } else {
        Err(format!(
            "{} of 75 cells outside tolerance: {}",
            misses.len(),
            misses.join("; ")
        ))
    }
}

fn criterion_2() -> Outcome {
    let cells = simulate_table("2")?;
    let mut misses = Vec::new();
    for s in 0..5 {
        let rwr_bias = cells[3][s].0;
        if (rwr_bias - TABLE2_RWR_BIAS[s]).abs() > 0.015 {
            misses.push(format!(
                "rwr bias {rwr_bias:.3} vs {:.3}",
                TABLE2_RWR_BIAS[s]
            ));
        }
        let inter = cells[4][s];
        if inter.0.abs() > 0.010 {
            misses.push(format!("rwr-interact bias {:.3}", inter.0));
        }
        let best = (0..5).map(|e| cells[e][s].2).fold(f64::INFINITY, f64::min);
        if inter.2 > best + 0.005 {
            misses.push(format!(
                "rwr-interact RMSE {:.3} vs minimum {best:.3}",
                inter.2
            ));
        }
    }
    let rwr: Vec<String> = (0..5).map(|s| format!("{:.3}", cells[3][s].0)).collect();
    if misses.is_empty() {
        Ok(format!(
            "rwr bias ({}), rwr-interact unbiased with lowest RMSE",
            rwr.join(", ")
        ))
    } else {
        Err(misses.join("; "))
    }
}

fn criterion_3() -> Outcome {
    let (est, truth) = support::mediation_cde_large_n()?;
    let wins = support::mediation_moderation_wins()?;
    let detail =
        format!("CDE(1,0.5) {est:.4} vs {truth:.4}; g worse in {wins}/200 moderated replications");
    if (est - truth).abs() <= 0.02 && wins >= 190 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn all(checks: &[Named<support::Check>]) -> Outcome {
    for (name, check) in checks {
        check().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(checks.iter().map(|c| c.0).collect::<Vec<_>>().join(", "))
}

fn criterion_4() -> Outcome {
    all(&[
        (
            "least squares vs normal equations",
            support::least_squares_oracle,
        ),
        ("probit vs grid MLE", support::probit_grid_oracle),
        (
            "probit gradient vs finite differences",
            support::probit_gradient_check,
        ),
    ])
}

fn criterion_5() -> Outcome {
    all(&[
        (
            "residual centering and purging",
            support::residual_mean_and_purging,
        ),
        ("report identities", support::report_identities),
        (
            "affine confounder invariance",
            support::confounder_affine_invariance,
        ),
        ("noiseless recovery", support::noiseless_recovery),
        (
            "bootstrap thread determinism",
            support::bootstrap_thread_determinism,
        ),
        (
            "simulation thread determinism",
            support::simulation_thread_determinism,
        ),
        ("block cluster integrity", support::block_cluster_integrity),
    ])
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("data.csv");
    let path = path.to_str().unwrap();
    let start = Instant::now();
    let gen = rwr(&[
        "gen-data", "--kind", "tv", "--gamma", "0.4", "--theta", "0.3", "--n", "5000", "--seed",
        "2", "--out", path,
    ]);
    if !gen.status.success() {
        return Err(String::from_utf8_lossy(&gen.stderr).into_owned());
    }
    let est = rwr(&[
        "estimate-tv",
        "--data",
        path,
        "--outcome",
        "y",
        "--a1",
        "a1",
        "--a2",
        "a2",
        "--c1",
        "c1",
        "--c2",
        "c2",
        "--method",
        "rwr-interact",
        "--boot",
        "200",
        "--seed",
        "9",
    ]);
    let secs = start.elapsed().as_secs_f64();
    if !est.status.success() {
        return Err(String::from_utf8_lossy(&est.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&est.stdout);
    let row: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("CTE,"))
        .ok_or("no CTE row")?
        .split(',')
        .collect();
    let cte: f64 = row[1].parse().map_err(|_| "bad estimate")?;
    let se: f64 = row[2].parse().map_err(|_| "bad se")?;
    let detail = format!("{secs:.1}s, CTE {cte:.4} with bootstrap SE {se:.4}");
    if secs < 30.0 && (cte - 0.5).abs() <= 3.0 * se {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Named<Outcome>; 6] = [
        ("Table 1 reproduction", criterion_1),
        ("Table 2 reproduction", criterion_2),
        ("synthetic mediation", criterion_3),
        ("solver oracles", criterion_4),
        ("property suite", criterion_5),
        ("end-to-end bootstrap", criterion_6),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.0}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.0}s] {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
