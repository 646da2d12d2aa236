//! Simulation of the two-period and mediation data-generating processes and
//! a replication harness that scores the time-varying estimators against the
//! known cumulative effect.

mod dgp;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;

pub use dgp::{
    simulate_dataset, simulate_mediation_dataset, MediationParams, Moderation, TRUE_CTE,
};

use crate::error::{Error, Result};
use crate::estimators::{TimeVaryingMethod, TimeVaryingSpec};
use crate::numerics::RngStream;

/// Default seeds for the two standard simulation grids.
pub const TABLE1_SEED: u64 = 8_675_309;
pub const TABLE2_SEED: u64 = 90_210;

/// One cell of a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub gamma: f64,
    pub theta: f64,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub scenario_id: u64,
    pub estimators: Vec<TimeVaryingMethod>,
}

impl Scenario {
    pub fn new(gamma: f64, theta: f64, n: usize, reps: usize, master_seed: u64) -> Self {
        Self {
            gamma,
            theta,
            n,
            reps,
            master_seed,
            scenario_id: 0,
            estimators: TimeVaryingMethod::ALL.to_vec(),
        }
    }

    pub fn with_id(mut self, scenario_id: u64) -> Self {
        self.scenario_id = scenario_id;
        self
    }

    pub fn with_estimators(mut self, estimators: Vec<TimeVaryingMethod>) -> Self {
        self.estimators = estimators;
        self
    }
}

/// Performance of one estimator over the replications of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: TimeVaryingMethod,
    pub bias: f64,
    /// `None` with fewer than two successful replications.
    pub sd: Option<f64>,
    pub rmse: f64,
    pub reps_used: usize,
    pub failures: usize,
    /// Mean treatment-by-residual coefficients, for estimators that report them.
    pub mean_moderation: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub gamma: f64,
    pub theta: f64,
    pub n: usize,
    pub reps: usize,
    pub estimators: Vec<EstimatorSummary>,
}

impl ScenarioSummary {
    pub fn get(&self, method: TimeVaryingMethod) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == method)
    }
}

struct Draw {
    cte: f64,
    moderation: IndexMap<String, f64>,
}

/// Runs every replication of `scenario`. Replication `r` draws its data from
/// stream `(master_seed, scenario_id, r)` and all estimators see the same
/// data, so results do not depend on the thread count.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioSummary> {
    if scenario.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if scenario.estimators.is_empty() {
        return Err(Error::InvalidArgument("no estimators selected".into()));
    }
    let spec = TimeVaryingSpec::simulation();
    let draws: Vec<Vec<Option<Draw>>> = (0..scenario.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = RngStream::new(scenario.master_seed, scenario.scenario_id, r);
            let data = simulate_dataset(scenario.gamma, scenario.theta, scenario.n, &mut stream);
            scenario
                .estimators
                .iter()
                .map(|m| {
                    let report = m.estimate(&data, &spec).ok()?;
                    Some(Draw {
                        cte: report.cte()?,
                        moderation: report.diagnostics.moderation,
                    })
                })
                .collect()
        })
        .collect();

    let estimators = scenario
        .estimators
        .iter()
        .enumerate()
        .map(|(j, &estimator)| summarize(estimator, draws.iter().map(|row| row[j].as_ref())))
        .collect();
    Ok(ScenarioSummary {
        gamma: scenario.gamma,
        theta: scenario.theta,
        n: scenario.n,
        reps: scenario.reps,
        estimators,
    })
}

fn summarize<'a>(
    estimator: TimeVaryingMethod,
    draws: impl Iterator<Item = Option<&'a Draw>>,
) -> EstimatorSummary {
    let mut ok = Vec::new();
    let mut failures = 0;
    for d in draws {
        match d {
            Some(d) if d.cte.is_finite() => ok.push(d),
            _ => failures += 1,
        }
    }
    let k = ok.len();
    if k == 0 {
        return EstimatorSummary {
            estimator,
            bias: f64::NAN,
            sd: None,
            rmse: f64::NAN,
            reps_used: 0,
            failures,
            mean_moderation: IndexMap::new(),
        };
    }
    let kf = k as f64;
    let mean = ok.iter().map(|d| d.cte).sum::<f64>() / kf;
    let sd = (k >= 2).then(|| {
        let ss: f64 = ok.iter().map(|d| (d.cte - mean).powi(2)).sum();
        (ss / (kf - 1.0)).sqrt()
    });
    let mse = ok.iter().map(|d| (d.cte - TRUE_CTE).powi(2)).sum::<f64>() / kf;

    let mut mean_moderation: IndexMap<String, f64> = IndexMap::new();
    for d in &ok {
        for (name, v) in &d.moderation {
            *mean_moderation.entry(name.clone()).or_insert(0.0) += v / kf;
        }
    }
    EstimatorSummary {
        estimator,
        bias: mean - TRUE_CTE,
        sd,
        rmse: mse.sqrt(),
        reps_used: k,
        failures,
        mean_moderation,
    }
}

/// The two standard grids: confounding strength varied without moderation,
/// and moderation strength varied under fixed confounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Table {
    Confounding,
    Moderation,
}

impl Table {
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Table::Confounding),
            2 => Ok(Table::Moderation),
            _ => Err(Error::InvalidArgument(format!(
                "unknown table {k}; expected 1 or 2"
            ))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Table::Confounding => 1,
            Table::Moderation => 2,
        }
    }

    pub fn default_seed(self) -> u64 {
        match self {
            Table::Confounding => TABLE1_SEED,
            Table::Moderation => TABLE2_SEED,
        }
    }

    /// `(gamma, theta)` for each column, in order.
    pub fn cells(self) -> [(f64, f64); 5] {
        let steps = [0.1, 0.2, 0.3, 0.4, 0.5];
        match self {
            Table::Confounding => steps.map(|g| (g, 0.0)),
            Table::Moderation => steps.map(|t| (0.4, t)),
        }
    }

    pub fn scenarios(self, master_seed: u64, reps: usize, n: usize) -> Vec<Scenario> {
        self.cells()
            .into_iter()
            .enumerate()
            .map(|(k, (g, t))| {
                let id = 10 * self.number() as u64 + k as u64 + 1;
                Scenario::new(g, t, n, reps, master_seed).with_id(id)
            })
            .collect()
    }
}

pub fn run_table(
    table: Table,
    master_seed: u64,
    reps: usize,
    n: usize,
) -> Result<Vec<ScenarioSummary>> {
    table
        .scenarios(master_seed, reps, n)
        .iter()
        .map(run_scenario)
        .collect()
}
