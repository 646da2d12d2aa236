use std::fmt::Write as _;

use rwr_core::estimators::EffectReport;
use rwr_core::montecarlo::{ScenarioSummary, Table};
use rwr_core::TimeVaryingMethod;
use serde::Serialize;

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.10 {
        "†"
    } else {
        ""
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt3(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "".into())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows are grouped by estimator, then by scenario.
pub fn simulation_csv(grid: &[ScenarioSummary]) -> String {
    let mut out = String::from("estimator,gamma,theta,bias,sd,rmse,reps_used\n");
    for method in methods(grid) {
        for s in grid {
            if let Some(e) = s.get(method) {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    method.name(),
                    s.gamma,
                    s.theta,
                    e.bias,
                    opt(e.sd),
                    e.rmse,
                    e.reps_used
                )
                .unwrap();
            }
        }
    }
    out
}

fn methods(grid: &[ScenarioSummary]) -> Vec<TimeVaryingMethod> {
    grid.first()
        .map(|s| s.estimators.iter().map(|e| e.estimator).collect())
        .unwrap_or_default()
}

pub fn simulation_markdown(grid: &[ScenarioSummary], table: Option<Table>) -> String {
    let mut out = String::new();
    let varying = match table {
        Some(Table::Moderation) => "θ",
        _ => "γ",
    };
    let header: Vec<String> = grid
        .iter()
        .map(|s| match table {
            Some(Table::Moderation) => format!("θ = {}", s.theta),
            Some(Table::Confounding) => format!("γ = {}", s.gamma),
            None => format!("γ = {}, θ = {}", s.gamma, s.theta),
        })
        .collect();
    if let Some(s) = grid.first() {
        writeln!(
            out,
            "Estimates of the cumulative effect (truth 0.5), n = {}, {} replications, varying {varying}.\n",
            s.n, s.reps
        )
        .unwrap();
    }
    writeln!(out, "| Estimator | Statistic | {} |", header.join(" | ")).unwrap();
    writeln!(out, "|---|---|{}", "---:|".repeat(header.len())).unwrap();
    for method in methods(grid) {
        let stats = ["Bias", "SD", "RMSE"];
        for (i, stat) in stats.into_iter().enumerate() {
            let name = if i == 0 { method.name() } else { "" };
            let cells: Vec<String> = grid
                .iter()
                .map(|s| {
                    let e = s
                        .get(method)
                        .expect("every scenario runs the same estimators");
                    match i {
                        0 => format!("{:.3}", e.bias),
                        1 => opt3(e.sd),
                        _ => format!("{:.3}", e.rmse),
                    }
                })
                .collect();
            writeln!(out, "| {name} | {stat} | {} |", cells.join(" | ")).unwrap();
        }
    }
    out
}

#[derive(Serialize)]
struct SimulationJson<'a> {
    table: Option<u8>,
    scenarios: &'a [ScenarioSummary],
}

pub fn simulation_json(grid: &[ScenarioSummary], table: Option<Table>) -> String {
    let doc = SimulationJson {
        table: table.map(Table::number),
        scenarios: grid,
    };
    serde_json::to_string_pretty(&doc).expect("summaries serialize") + "\n"
}

pub fn report_csv(report: &EffectReport) -> String {
    let mut out = String::from("estimand,estimate,se,p_value\n");
    for e in &report.effects {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(&e.label),
            e.estimate,
            opt(e.se),
            opt(e.p_value)
        )
        .unwrap();
    }
    out
}

pub fn report_json(report: &EffectReport) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
}

pub fn report_markdown(report: &EffectReport) -> String {
    let mut out = String::new();
    writeln!(out, "Method: {}\n", report.method).unwrap();
    writeln!(out, "| Effect | Estimate | SE | p |").unwrap();
    writeln!(out, "|---|---:|---:|---:|").unwrap();
    for e in &report.effects {
        let mark = e.p_value.map(stars).unwrap_or("");
        writeln!(
            out,
            "| {} | {:.3}{mark} | {} | {} |",
            e.label,
            e.estimate,
            opt3(e.se),
            opt3(e.p_value)
        )
        .unwrap();
    }
    if report.effects.iter().any(|e| e.p_value.is_some()) {
        out.push_str("\n† p < 0.10, * p < 0.05, ** p < 0.01, *** p < 0.001\n");
    }
    let lines = diagnostic_lines(report);
    if !lines.is_empty() {
        out.push_str("\n### Diagnostics\n\n");
        for l in lines {
            writeln!(out, "- {l}").unwrap();
        }
    }
    out
}

/// Dropped columns, probit convergence, weights, moderation and warnings.
pub fn diagnostic_lines(report: &EffectReport) -> Vec<String> {
    let d = &report.diagnostics;
    let mut lines = Vec::new();
    for c in &d.dropped_columns {
        lines.push(format!("dropped column {c}"));
    }
    for p in &d.probit {
        lines.push(format!(
            "probit {}: converged={} iterations={}{}",
            p.model,
            p.converged,
            p.iterations,
            if p.at_boundary {
                " (fitted probabilities at the boundary)"
            } else {
                ""
            }
        ));
    }
    if let Some(w) = &d.weights {
        lines.push(format!(
            "weights: min={:.4} max={:.4} mean={:.4} sd={:.4} trimmed={}",
            w.min, w.max, w.mean, w.sd, w.trimmed
        ));
    }
    for (k, v) in &d.moderation {
        lines.push(format!("moderation {k} = {v:.4}"));
    }
    for w in &d.warnings {
        lines.push(format!("warning: {w}"));
    }
    lines
}
