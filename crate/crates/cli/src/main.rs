mod args;
mod output;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use rwr_core::bootstrap::{bootstrap_block, bootstrap_iid, PValueRule};
use rwr_core::dataset::validate_treatment_column;
use rwr_core::design::FirstStage;
use rwr_core::estimators::{
    estimate_conventional, estimate_g, estimate_iptw, estimate_mediation_g, estimate_mediation_rwr,
    estimate_rwr, EffectReport, IptwOptions, RwrOptions,
};
use rwr_core::montecarlo::{
    run_scenario, run_table, simulate_dataset, simulate_mediation_dataset, MediationParams,
    Moderation, Scenario, Table,
};
use rwr_core::numerics::RngStream;
use rwr_core::{
    ColumnTable, Error, MediationSpec, TimeVaryingMethod, TimeVaryingSpec, TreatmentKind,
};

use args::{
    BootstrapArgs, Cli, Command, DataKind, EstimateMedArgs, EstimateTvArgs, FirstStageArg, Format,
    GenDataArgs, MedMethod, OutputArgs, PValue, SimulateArgs, TvMethod,
};

const QUICK_REPS: usize = 500;
const DEFAULT_REPS: usize = 10_000;

/// A problem with the flags or with how they map onto the data.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::UnknownColumn(_)
                | Error::SchemaMismatch { .. }
                | Error::EmptyColumnName
                | Error::Treatment { .. }
                | Error::InvalidPlan(_)
                | Error::Inadmissible(_)
                | Error::UnknownMethod(_)
                | Error::InvalidSpec(_)
                | Error::InvalidArgument(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::GenData(a) => gen_data(a),
        Command::EstimateTv(a) => estimate_tv(a),
        Command::EstimateMed(a) => estimate_med(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn tv_method(m: TvMethod) -> TimeVaryingMethod {
    match m {
        TvMethod::Conventional => TimeVaryingMethod::Conventional,
        TvMethod::Iptw => TimeVaryingMethod::Iptw,
        TvMethod::G => TimeVaryingMethod::G,
        TvMethod::Rwr => TimeVaryingMethod::Rwr,
        TvMethod::RwrInteract => TimeVaryingMethod::RwrInteract,
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let reps = match (a.reps, a.quick) {
        (Some(r), _) => r,
        (None, true) => QUICK_REPS,
        (None, false) => DEFAULT_REPS,
    };
    if reps == 0 {
        return Err(config("--reps must be at least 1"));
    }
    if a.n < 10 {
        return Err(config("--n must be at least 10"));
    }
    let estimators: Vec<TimeVaryingMethod> = if a.estimators.is_empty() {
        TimeVaryingMethod::ALL.to_vec()
    } else {
        a.estimators.iter().copied().map(tv_method).collect()
    };
    let (table, grid) = match (a.table, a.gamma, a.theta) {
        (Some(k), _, _) => {
            let table = Table::from_number(k).map_err(|e| config(e.to_string()))?;
            let seed = a.seed.unwrap_or(table.default_seed());
            let grid = if estimators.len() == TimeVaryingMethod::ALL.len() {
                run_table(table, seed, reps, a.n)?
            } else {
                table
                    .scenarios(seed, reps, a.n)
                    .into_iter()
                    .map(|s| run_scenario(&s.with_estimators(estimators.clone())))
                    .collect::<rwr_core::Result<_>>()?
            };
            (Some(table), grid)
        }
        (None, Some(gamma), Some(theta)) => {
            let sc = Scenario::new(gamma, theta, a.n, reps, a.seed.unwrap_or(1))
                .with_estimators(estimators);
            (None, vec![run_scenario(&sc)?])
        }
        _ => {
            return Err(config(
                "simulate needs either --table or both --gamma and --theta",
            ))
        }
    };
    let text = match a.output.format {
        Format::Csv => output::simulation_csv(&grid),
        Format::Json => output::simulation_json(&grid, table),
        Format::Markdown => output::simulation_markdown(&grid, table),
    };
    write_output(a.output.out.as_deref(), &text)
}

fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    if a.n == 0 {
        return Err(config("--n must be at least 1"));
    }
    let mut stream = RngStream::new(a.seed, 0, 0);
    let table = match a.kind {
        DataKind::Tv => {
            if a.moderation {
                return Err(config("--moderation applies to --kind med only"));
            }
            let full = simulate_dataset(a.gamma, a.theta, a.n, &mut stream);
            if a.include_latent {
                full
            } else {
                ColumnTable::from_columns(
                    full.iter()
                        .filter(|(name, _)| *name != "u")
                        .map(|(name, col)| (name.to_string(), col.to_vec())),
                )?
            }
        }
        DataKind::Med => {
            if a.include_latent {
                return Err(config("--include-latent applies to --kind tv only"));
            }
            let mut params = MediationParams::default();
            if a.moderation {
                params = params.with_moderation(Moderation::DEFAULT);
            }
            simulate_mediation_dataset(&params, a.n, &mut stream)
        }
    };
    write_output(a.out.as_deref(), &table.to_csv_string())
}

fn pvalue_rule(p: PValue) -> PValueRule {
    match p {
        PValue::Normal => PValueRule::Normal,
        PValue::Sign => PValueRule::Sign,
    }
}

fn with_bootstrap<F>(
    table: &ColumnTable,
    b: &BootstrapArgs,
    estimator: F,
) -> anyhow::Result<EffectReport>
where
    F: Fn(&ColumnTable) -> rwr_core::Result<EffectReport> + Sync,
{
    if b.boot == 0 {
        if b.cluster.is_some() {
            return Err(config("--cluster requires --boot"));
        }
        return Ok(estimator(table)?);
    }
    if b.boot < 2 {
        return Err(config("--boot needs at least 2 replicates"));
    }
    let rule = pvalue_rule(b.pvalue);
    let result = match &b.cluster {
        Some(col) => bootstrap_block(table, col, &estimator, b.boot, b.seed, rule)?,
        None => bootstrap_iid(table, &estimator, b.boot, b.seed, rule)?,
    };
    Ok(result.into_report())
}

fn emit_report(report: &EffectReport, out: &OutputArgs) -> anyhow::Result<()> {
    let text = match out.format {
        Format::Csv => {
            for line in output::diagnostic_lines(report) {
                eprintln!("{line}");
            }
            output::report_csv(report)
        }
        Format::Json => output::report_json(report),
        Format::Markdown => output::report_markdown(report),
    };
    write_output(out.out.as_deref(), &text)
}

fn load(path: &Path) -> anyhow::Result<ColumnTable> {
    ColumnTable::read_csv(path, None).with_context(|| format!("reading {}", path.display()))
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn estimate_tv(a: EstimateTvArgs) -> anyhow::Result<()> {
    let method = tv_method(a.method);
    if a.trim_quantile.is_some() && method != TimeVaryingMethod::Iptw {
        return Err(config("--trim-quantile applies to --method iptw only"));
    }
    if let Some(q) = a.trim_quantile {
        if !(q > 0.0 && q < 0.5) {
            return Err(config("--trim-quantile must be in (0, 0.5)"));
        }
    }
    if a.saturated && method != TimeVaryingMethod::RwrInteract {
        return Err(config("--saturated applies to --method rwr-interact only"));
    }
    let is_rwr = matches!(
        method,
        TimeVaryingMethod::Rwr | TimeVaryingMethod::RwrInteract
    );
    if a.first_stage != FirstStageArg::Linear && !is_rwr {
        return Err(config("--first-stage applies to the rwr methods only"));
    }
    if method == TimeVaryingMethod::Iptw && a.continuous {
        return Err(config(
            "iptw requires binary 0/1 treatments; drop --continuous or pick another method",
        ));
    }

    let table = load(&a.data)?;
    let kind = if a.continuous {
        TreatmentKind::Continuous
    } else {
        TreatmentKind::Binary
    };
    let spec =
        TimeVaryingSpec::new(&a.outcome, &a.a1, &a.a2, &strs(&a.c1), &strs(&a.c2)).with_kind(kind);
    if method == TimeVaryingMethod::Iptw {
        for t in [&a.a1, &a.a2] {
            if let Err(e) = validate_treatment_column(&table, t, TreatmentKind::Binary) {
                if matches!(e, Error::Treatment { .. }) {
                    bail!(ConfigError(format!(
                        "iptw requires binary 0/1 treatments: {e}"
                    )));
                }
                return Err(e.into());
            }
        }
    }
    spec.validate(&table)?;

    let iptw = IptwOptions {
        trim_quantile: a.trim_quantile,
        ..IptwOptions::default()
    };
    let rwr = RwrOptions {
        interactions: method == TimeVaryingMethod::RwrInteract,
        saturated: a.saturated,
        first_stage: match a.first_stage {
            FirstStageArg::Linear => FirstStage::Linear,
            FirstStageArg::Probit => FirstStage::ProbitForBinary,
        },
    };
    let estimator = |t: &ColumnTable| match method {
        TimeVaryingMethod::Conventional => estimate_conventional(t, &spec),
        TimeVaryingMethod::Iptw => estimate_iptw(t, &spec, &iptw),
        TimeVaryingMethod::G => estimate_g(t, &spec),
        TimeVaryingMethod::Rwr | TimeVaryingMethod::RwrInteract => estimate_rwr(t, &spec, &rwr),
    };
    let report = with_bootstrap(&table, &a.bootstrap, estimator)?;
    emit_report(&report, &a.output)
}

fn estimate_med(a: EstimateMedArgs) -> anyhow::Result<()> {
    if !a.cde_at.is_finite() {
        return Err(config("--cde-at must be a finite number"));
    }
    let table = load(&a.data)?;
    let kind = if a.continuous {
        TreatmentKind::Continuous
    } else {
        TreatmentKind::Binary
    };
    let spec = MediationSpec::new(
        &a.outcome,
        &a.treatment,
        &a.mediator,
        &strs(&a.x),
        &strs(&a.z),
        a.cde_at,
    )
    .with_kind(kind);
    spec.validate(&table)?;
    let method = a.method;
    let estimator = |t: &ColumnTable| match method {
        MedMethod::Rwr => estimate_mediation_rwr(t, &spec, false),
        MedMethod::RwrInteract => estimate_mediation_rwr(t, &spec, true),
        MedMethod::G => estimate_mediation_g(t, &spec),
    };
    let report = with_bootstrap(&table, &a.bootstrap, estimator)?;
    emit_report(&report, &a.output)
}
