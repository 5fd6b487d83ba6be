//! Simulation mode: replay a fully labeled dataset through the synchronous
//! engine with the true labels as oracle, over several seeded runs.
//!
//! Run `r` uses seed `master_seed + r` for both the prior draw and the engine,
//! so any run can be reproduced on its own. Priors occupy the first screening
//! positions and count as screened unless `exclude_priors_from_metrics` is set,
//! in which case curves and metrics cover only the records screened after the
//! priors, against the relevant records not used as priors.

mod metrics;
pub mod synthetic;

use std::fmt::Write;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::engine::{EngineError, LabelEvent, ProjectState, Settings, StopSpec};
use crate::rng::{ProjectRng, PRIOR_STREAM};

pub use metrics::{recall_curve, records_to_reach, rrf, screened_at, wss, MetricError, RunMetrics, Summary};

/// Version of the results document layout.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SimulationError {
    #[error("dataset is not fully labeled")]
    NotFullyLabeled,
    #[error("dataset has {available} {class} records, the simulation needs more than the {needed} used as priors")]
    TooFewOfClass {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid simulation settings: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub settings: Settings,
    pub n_runs: usize,
    pub n_prior_included: usize,
    pub n_prior_excluded: usize,
    pub master_seed: u64,
    pub exclude_priors_from_metrics: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            settings: Settings::default(),
            n_runs: 15,
            n_prior_included: 1,
            n_prior_excluded: 1,
            master_seed: 0,
            exclude_priors_from_metrics: false,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_runs == 0 {
            return Err(SimulationError::InvalidSpec("n_runs must be at least 1".into()));
        }
        if self.n_prior_included == 0 || self.n_prior_excluded == 0 {
            return Err(SimulationError::InvalidSpec(
                "at least one relevant and one irrelevant prior are required".into(),
            ));
        }
        if self.settings.stopping != StopSpec::None {
            return Err(SimulationError::InvalidSpec("simulations screen to exhaustion; stopping must be none".into()));
        }
        self.settings.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub prior_included: Vec<usize>,
    pub prior_excluded: Vec<usize>,
    pub events: Vec<LabelEvent>,
    /// `recall[k - 1]` after `k` records, over the records the metrics count.
    pub recall: Vec<f64>,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub wss_85: Option<Summary>,
    pub wss_95: Option<Summary>,
    pub wss_100: Option<Summary>,
    pub rrf_5: Option<Summary>,
    pub rrf_10: Option<Summary>,
}

impl Aggregate {
    pub fn of(runs: &[RunResult]) -> Self {
        let pick = |f: fn(&RunMetrics) -> Option<f64>| Summary::of(runs.iter().filter_map(|r| f(&r.metrics)));
        Aggregate {
            wss_85: pick(|m| m.wss_85),
            wss_95: pick(|m| m.wss_95),
            wss_100: pick(|m| m.wss_100),
            rrf_5: pick(|m| Some(m.rrf_5)),
            rrf_10: pick(|m| Some(m.rrf_10)),
        }
    }
}

/// The results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub schema_version: u32,
    pub spec: SimulationSpec,
    pub dataset_fingerprint: String,
    /// Records and relevant records in the dataset.
    pub n_records: usize,
    pub n_relevant: usize,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
    /// Plot-data CSV, relative to the results document.
    pub plot_data: Option<String>,
}

impl SimulationResult {
    /// Serialized with fixed key order; equal results give equal bytes.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("results serialize");
        out.push(b'\n');
        out
    }
}

fn draw_priors(dataset: &Dataset, spec: &SimulationSpec, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ProjectRng::new(seed, PRIOR_STREAM);
    let (relevant, irrelevant): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset.records()[i].label == Some(Label::Relevant));
    let mut pick = |pool: &[usize], k: usize| {
        let mut ids: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
        ids.sort_unstable();
        ids
    };
    let included = pick(&relevant, spec.n_prior_included);
    let excluded = pick(&irrelevant, spec.n_prior_excluded);
    (included, excluded)
}

/// One run: draw priors, then label every presented record with its true label
/// until the pool is exhausted.
pub fn run_once(dataset: &Arc<Dataset>, spec: &SimulationSpec, run: usize) -> Result<RunResult, SimulationError> {
    let seed = spec.master_seed.wrapping_add(run as u64);
    let (prior_included, prior_excluded) = draw_priors(dataset, spec, seed);
    let settings = Settings {
        seed,
        ..spec.settings.clone()
    };
    let mut state = ProjectState::init_project(Arc::clone(dataset), settings, &prior_included, &prior_excluded)?;
    loop {
        let presented = match state.next_record() {
            Ok(p) => p,
            Err(EngineError::PoolExhausted) => break,
            Err(e) => return Err(e.into()),
        };
        let truth = dataset.records()[presented.row_id].label.expect("dataset is fully labeled");
        state.submit_label_sync(presented.row_id, truth)?;
    }
    let events = state.events().to_vec();
    let n_relevant = dataset.n_relevant();
    let recall = if spec.exclude_priors_from_metrics {
        let screened = events[state.n_priors()..].iter().map(|e| e.label);
        recall_curve(screened, n_relevant - prior_included.len())
    } else {
        recall_curve(events.iter().map(|e| e.label), n_relevant)
    }
    .expect("checked that relevant records remain");
    let metrics = RunMetrics::from_curve(&recall);
    Ok(RunResult {
        run,
        seed,
        prior_included,
        prior_excluded,
        events,
        recall,
        metrics,
    })
}

/// Runs every simulation in parallel on the current rayon pool. The result
/// does not depend on the number of threads.
pub fn run_simulation(dataset: Arc<Dataset>, spec: &SimulationSpec) -> Result<SimulationResult, SimulationError> {
    spec.validate()?;
    if !dataset.is_fully_labeled() {
        return Err(SimulationError::NotFullyLabeled);
    }
    let n_relevant = dataset.n_relevant();
    let n_irrelevant = dataset.len() - n_relevant;
    if n_relevant <= spec.n_prior_included {
        return Err(SimulationError::TooFewOfClass {
            class: "relevant",
            needed: spec.n_prior_included,
            available: n_relevant,
        });
    }
    if n_irrelevant <= spec.n_prior_excluded {
        return Err(SimulationError::TooFewOfClass {
            class: "irrelevant",
            needed: spec.n_prior_excluded,
            available: n_irrelevant,
        });
    }
    let runs = (0..spec.n_runs)
        .into_par_iter()
        .map(|r| run_once(&dataset, spec, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimulationResult {
        schema_version: RESULTS_SCHEMA_VERSION,
        spec: spec.clone(),
        dataset_fingerprint: dataset.fingerprint().to_owned(),
        n_records: dataset.len(),
        n_relevant,
        aggregate: Aggregate::of(&runs),
        runs,
        plot_data: None,
    })
}

pub const PLOT_HEADER: &str = "run,k,fraction_screened,recall";
pub const BASELINE_RUN: &str = "random_baseline";

/// Long-format recall curves, one row per run and screened count, followed
/// by the random-screening baseline `recall = k / N`.
pub fn emit_plot_data(result: &SimulationResult) -> Vec<u8> {
    let mut out = String::new();
    writeln!(out, "{PLOT_HEADER}").unwrap();
    for run in &result.runs {
        let n = run.recall.len();
        for (i, r) in run.recall.iter().enumerate() {
            let k = i + 1;
            writeln!(out, "{},{k},{:?},{r:?}", run.run, k as f64 / n as f64).unwrap();
        }
    }
    let n = result.runs.first().map_or(0, |r| r.recall.len());
    for k in 1..=n {
        let f = k as f64 / n as f64;
        writeln!(out, "{BASELINE_RUN},{k},{f:?},{f:?}").unwrap();
    }
    out.into_bytes()
}

/// Parses plot data back into `(run, curve)` pairs, baseline excluded.
pub fn parse_plot_data(bytes: &[u8]) -> Result<Vec<(usize, Vec<f64>)>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some(PLOT_HEADER) {
        return Err(format!("expected header {PLOT_HEADER:?}"));
    }
    let mut runs: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |what: &str| format!("line {}: {what}", i + 2);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        if fields[0] == BASELINE_RUN {
            continue;
        }
        let run: usize = fields[0].parse().map_err(|_| bad("bad run"))?;
        let k: usize = fields[1].parse().map_err(|_| bad("bad k"))?;
        let recall: f64 = fields[3].parse().map_err(|_| bad("bad recall"))?;
        match runs.last_mut() {
            Some((r, curve)) if *r == run => {
                if k != curve.len() + 1 {
                    return Err(bad("k is not consecutive"));
                }
                curve.push(recall);
            }
            _ => {
                if k != 1 {
                    return Err(bad("curve does not start at k = 1"));
                }
                runs.push((run, vec![recall]));
            }
        }
    }
    Ok(runs)
}
