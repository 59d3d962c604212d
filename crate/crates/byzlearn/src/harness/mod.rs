//! Experiment configuration, seeded multi-trial execution, trace
//! persistence, and analysis orchestration. The configuration file is a
//! single JSON document with `graph`, `scenario`, `model`, `adversary`,
//! `run`, and `analysis` sections; outputs are flat CSVs plus a JSON
//! analysis report, all byte-stable for a fixed config.

mod cli;

pub use cli::cli;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    extract_transition_matrix, phi_product, psi_reconstruction_residual, q_statistic,
    source_window_check, AnalysisError, RowSourceWitness, TransitionMatrix,
};
use crate::observation::{
    check_global_identifiability, h_value, IdentifiabilityReport, LikelihoodModel,
    ObservationError, StateSpace,
};
use crate::protocol::{AdversaryStrategy, ProtocolError, RoundRecord, World};
use crate::topology::{DirectedGraph, Scenario, TopologyError};

pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;
pub const DEFAULT_TRIALS: usize = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("trial {trial}: {source}")]
    Trial { trial: usize, source: ProtocolError },
    #[error("trial {trial}: {source}")]
    TrialAnalysis { trial: usize, source: AnalysisError },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphConfig {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub faulty: Vec<usize>,
    pub fault_bound: usize,
    pub states: Vec<String>,
    pub true_state: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentModelConfig {
    pub signals: usize,
    /// Row-major: one row per signal, one column per state.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub agents: Vec<AgentModelConfig>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

fn default_indegree_cap() -> usize {
    crate::protocol::DEFAULT_INDEGREE_CAP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: usize,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Cap on reduced-graph enumeration in analysis and assumption checks.
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_indegree_cap")]
    pub indegree_cap: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowCheckConfig {
    /// Window end rounds.
    pub ends: Vec<usize>,
    /// Window length in rounds.
    pub window: usize,
    /// Uniform lower bound rows must keep on a source component.
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub identifiability: bool,
    #[serde(default)]
    pub extract_matrices: bool,
    #[serde(default)]
    pub psi_reconstruction: bool,
    #[serde(default)]
    pub window_check: Option<WindowCheckConfig>,
    #[serde(default)]
    pub q_statistic_at: Vec<usize>,
    #[serde(default)]
    pub keep_round_records: bool,
}

impl AnalysisConfig {
    pub fn needs_extraction(&self) -> bool {
        self.extract_matrices
            || self.psi_reconstruction
            || self.window_check.is_some()
            || !self.q_statistic_at.is_empty()
    }

    pub fn any_enabled(&self) -> bool {
        self.identifiability || self.needs_extraction() || self.keep_round_records
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub scenario: ScenarioConfig,
    pub model: ModelConfig,
    /// Strategies keyed by faulty agent index (JSON object keys are
    /// strings). Faulty agents without an entry behave conformantly.
    #[serde(default)]
    pub adversary: BTreeMap<String, AdversaryStrategy>,
    pub run: RunConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    pub fn build_graph(&self) -> Result<DirectedGraph, HarnessError> {
        DirectedGraph::new(self.graph.n, self.graph.edges.iter().copied()).map_err(|e| {
            HarnessError::Invalid {
                field: "graph",
                message: e.to_string(),
            }
        })
    }

    pub fn build_scenario(&self) -> Result<Scenario, HarnessError> {
        let graph = self.build_graph()?;
        Scenario::new(
            graph,
            self.scenario.faulty.iter().copied(),
            self.scenario.fault_bound,
            self.scenario.states.len(),
        )
        .map_err(|e| HarnessError::Invalid {
            field: "scenario.fault_bound",
            message: e.to_string(),
        })
    }

    pub fn build_states(&self) -> Result<StateSpace, HarnessError> {
        StateSpace::new(
            self.scenario.states.iter().cloned(),
            self.scenario.true_state,
        )
        .map_err(|e| HarnessError::Invalid {
            field: "scenario.states",
            message: e.to_string(),
        })
    }

    pub fn build_model(&self) -> Result<LikelihoodModel, HarnessError> {
        for (i, agent) in self.model.agents.iter().enumerate() {
            if agent.matrix.len() != agent.signals {
                return Err(HarnessError::Invalid {
                    field: "model.agents",
                    message: format!(
                        "agent {i}: declared {} signals but matrix has {} rows",
                        agent.signals,
                        agent.matrix.len()
                    ),
                });
            }
        }
        let matrices = self.model.agents.iter().map(|a| a.matrix.clone()).collect();
        Ok(LikelihoodModel::new(self.scenario.states.len(), matrices)?)
    }

    pub fn build_strategies(&self) -> Result<BTreeMap<usize, AdversaryStrategy>, HarnessError> {
        let mut out = BTreeMap::new();
        for (key, strategy) in &self.adversary {
            let agent: usize = key.parse().map_err(|_| HarnessError::Invalid {
                field: "adversary",
                message: format!("key {key:?} is not an agent index"),
            })?;
            if !self.scenario.faulty.contains(&agent) {
                return Err(HarnessError::Invalid {
                    field: "adversary",
                    message: format!("agent {agent} has a strategy but is not in scenario.faulty"),
                });
            }
            out.insert(agent, strategy.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.run.horizon == 0 {
            return Err(HarnessError::Invalid {
                field: "run.horizon",
                message: "horizon must be at least 1".into(),
            });
        }
        if self.run.trials == 0 {
            return Err(HarnessError::Invalid {
                field: "run.trials",
                message: "trial count must be at least 1".into(),
            });
        }
        self.build_scenario()?;
        self.build_states()?;
        let model = self.build_model()?;
        if model.agent_count() != self.graph.n {
            return Err(HarnessError::Invalid {
                field: "model.agents",
                message: format!(
                    "model covers {} agents but graph has {}",
                    model.agent_count(),
                    self.graph.n
                ),
            });
        }
        self.build_strategies()?;
        Ok(())
    }
}

/// Load and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    config.validate()?;
    Ok(config)
}

/// Everything recorded for one trial. Beliefs and signals cover the
/// non-faulty agents, in ascending id order, one entry per round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialData {
    pub beliefs: Vec<Vec<Vec<f64>>>,
    pub signals: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<TransitionMatrix>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<RoundRecord>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub trial: usize,
    pub rounds: usize,
    pub max_row_sum_error: f64,
    pub max_residual: f64,
    pub min_entry: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiReconstructionStats {
    pub trial: usize,
    pub theta: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowCheckReport {
    pub trial: usize,
    pub t_end: usize,
    pub window: usize,
    pub threshold: f64,
    pub all_rows_clear: bool,
    pub rows: Vec<RowSourceWitness>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QStatisticReport {
    pub trial: usize,
    pub theta: usize,
    /// Per requested round, the per-agent statistic values.
    pub values: BTreeMap<usize, Vec<f64>>,
}

/// Structured analysis output, keyed by check name, then trial / round /
/// agent inside each entry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_extraction: Option<Vec<ExtractionStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_reconstruction: Option<Vec<PsiReconstructionStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_check: Option<Vec<WindowCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_statistic: Option<Vec<QStatisticReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_consistent: Option<bool>,
}

/// A completed experiment: config snapshot, per-trial data, and any
/// analysis results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub config: ExperimentConfig,
    pub honest_agents: Vec<usize>,
    pub trials: Vec<TrialData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
    pub wall_ms: u128,
}

/// Run every trial of the configured experiment and the enabled analyses.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Trace, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let scenario = config.build_scenario()?;
    let states = config.build_states()?;
    let model = config.build_model()?;
    let strategies = config.build_strategies()?;
    let honest_agents = scenario.kept_nodes();
    let extraction_needed = config.analysis.needs_extraction();

    let mut trials = Vec::with_capacity(config.run.trials);
    for trial in 0..config.run.trials {
        let mut world = World::with_indegree_cap(
            scenario.clone(),
            states.clone(),
            model.clone(),
            strategies.clone(),
            config.run.seed,
            trial as u64,
            config.run.indegree_cap,
        )
        .map_err(|source| HarnessError::Trial { trial, source })?;

        let mut beliefs = Vec::with_capacity(config.run.horizon);
        let mut signals = Vec::with_capacity(config.run.horizon);
        let mut matrices = extraction_needed.then(Vec::new);
        let mut records = config.analysis.keep_round_records.then(Vec::new);
        for _ in 0..config.run.horizon {
            let record = world
                .step_round()
                .map_err(|source| HarnessError::Trial { trial, source })?;
            beliefs.push(record.honest.iter().map(|r| r.belief.clone()).collect());
            signals.push(record.honest.iter().map(|r| r.signal).collect());
            if let Some(mats) = matrices.as_mut() {
                mats.push(
                    extract_transition_matrix(&record)
                        .map_err(|source| HarnessError::TrialAnalysis { trial, source })?,
                );
            }
            if let Some(recs) = records.as_mut() {
                recs.push(record);
            }
        }
        trials.push(TrialData {
            beliefs,
            signals,
            matrices,
            records,
        });
    }

    let analysis = if config.analysis.any_enabled() {
        Some(run_analyses(
            config,
            &scenario,
            &states,
            &model,
            &honest_agents,
            &trials,
        )?)
    } else {
        None
    };

    Ok(Trace {
        config: config.clone(),
        honest_agents,
        trials,
        analysis,
        wall_ms: started.elapsed().as_millis(),
    })
}

/// Per-round log-likelihood ratios of `theta` against the true state for
/// every honest agent, from the recorded signals.
pub fn log_likelihood_ratios(
    model: &LikelihoodModel,
    honest_agents: &[usize],
    signals: &[Vec<usize>],
    theta: usize,
    theta_star: usize,
) -> Vec<Vec<f64>> {
    signals
        .iter()
        .map(|round| {
            honest_agents
                .iter()
                .zip(round)
                .map(|(&agent, &signal)| {
                    model.log_likelihood(agent, signal, theta)
                        - model.log_likelihood(agent, signal, theta_star)
                })
                .collect()
        })
        .collect()
}

fn psi_series(beliefs: &[Vec<Vec<f64>>], theta: usize, theta_star: usize) -> Vec<Vec<f64>> {
    beliefs
        .iter()
        .map(|round| {
            round
                .iter()
                .map(|belief| belief[theta] - belief[theta_star])
                .collect()
        })
        .collect()
}

fn run_analyses(
    config: &ExperimentConfig,
    scenario: &Scenario,
    states: &StateSpace,
    model: &LikelihoodModel,
    honest_agents: &[usize],
    trials: &[TrialData],
) -> Result<AnalysisReport, HarnessError> {
    let mut report = AnalysisReport::default();
    let theta_star = states.true_index();

    if config.analysis.identifiability {
        report.identifiability = Some(check_global_identifiability(
            model,
            scenario,
            states,
            config.run.cap,
        )?);
    }

    if config.analysis.needs_extraction() {
        let mut stats = Vec::new();
        for (trial, data) in trials.iter().enumerate() {
            let mats = data.matrices.as_ref().expect("extraction enabled");
            stats.push(ExtractionStats {
                trial,
                rounds: mats.len(),
                max_row_sum_error: mats
                    .iter()
                    .map(TransitionMatrix::max_row_sum_error)
                    .fold(0.0, f64::max),
                max_residual: mats.iter().map(|m| m.residual).fold(0.0, f64::max),
                min_entry: mats
                    .iter()
                    .map(TransitionMatrix::min_entry)
                    .fold(f64::INFINITY, f64::min),
            });
        }
        report.matrix_extraction = Some(stats);
    }

    if config.analysis.psi_reconstruction {
        let mut stats = Vec::new();
        for (trial, data) in trials.iter().enumerate() {
            let mats = data.matrices.as_ref().expect("extraction enabled");
            for theta in 0..states.count() {
                if theta == theta_star {
                    continue;
                }
                let l =
                    log_likelihood_ratios(model, honest_agents, &data.signals, theta, theta_star);
                let psi = psi_series(&data.beliefs, theta, theta_star);
                let max_residual = psi_reconstruction_residual(&l, mats, &psi)
                    .map_err(|source| HarnessError::TrialAnalysis { trial, source })?;
                stats.push(PsiReconstructionStats {
                    trial,
                    theta,
                    max_residual,
                });
            }
        }
        report.psi_reconstruction = Some(stats);
    }

    if let Some(window_cfg) = &config.analysis.window_check {
        let (graphs, _exhaustive) =
            crate::topology::enumerate_reduced_graphs(scenario, config.run.cap)?;
        let mut reports = Vec::new();
        for (trial, data) in trials.iter().enumerate() {
            let mats = data.matrices.as_ref().expect("extraction enabled");
            for &t_end in &window_cfg.ends {
                let start = t_end.saturating_sub(window_cfg.window - 1).max(1);
                let phi = phi_product(mats, t_end, start)
                    .map_err(|source| HarnessError::TrialAnalysis { trial, source })?;
                let rows = source_window_check(&phi, &graphs, window_cfg.threshold)
                    .map_err(|source| HarnessError::TrialAnalysis { trial, source })?;
                reports.push(WindowCheckReport {
                    trial,
                    t_end,
                    window: window_cfg.window,
                    threshold: window_cfg.threshold,
                    all_rows_clear: rows.iter().all(|r| r.clears_threshold),
                    rows,
                });
            }
        }
        report.window_check = Some(reports);
    }

    if !config.analysis.q_statistic_at.is_empty() {
        let mut reports = Vec::new();
        for (trial, data) in trials.iter().enumerate() {
            let mats = data.matrices.as_ref().expect("extraction enabled");
            for theta in 0..states.count() {
                if theta == theta_star {
                    continue;
                }
                let l =
                    log_likelihood_ratios(model, honest_agents, &data.signals, theta, theta_star);
                let h: Vec<f64> = honest_agents
                    .iter()
                    .map(|&agent| h_value(model, agent, theta, theta_star))
                    .collect();
                let values = q_statistic(&l, &h, mats, &config.analysis.q_statistic_at)
                    .map_err(|source| HarnessError::TrialAnalysis { trial, source })?;
                reports.push(QStatisticReport {
                    trial,
                    theta,
                    values,
                });
            }
        }
        report.q_statistic = Some(reports);
    }

    Ok(report)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Render beliefs.csv: one row per (trial, round, agent, state) holding
/// the posterior probability.
pub fn render_beliefs_csv(trace: &Trace) -> String {
    let mut out = String::from("trial,t,agent,state,mu\n");
    for (trial, data) in trace.trials.iter().enumerate() {
        for (k, round) in data.beliefs.iter().enumerate() {
            for (pos, belief) in round.iter().enumerate() {
                let agent = trace.honest_agents[pos];
                for (state, &log_mu) in belief.iter().enumerate() {
                    let mu = log_mu.exp();
                    out.push_str(&format!("{trial},{},{agent},{state},{mu}\n", k + 1));
                }
            }
        }
    }
    out
}

/// Render psi.csv: one row per (trial, round, agent, non-true state)
/// holding the belief log-ratio against the true state.
pub fn render_psi_csv(trace: &Trace, theta_star: usize) -> String {
    let mut out = String::from("trial,t,agent,theta,psi\n");
    for (trial, data) in trace.trials.iter().enumerate() {
        for (k, round) in data.beliefs.iter().enumerate() {
            for (pos, belief) in round.iter().enumerate() {
                let agent = trace.honest_agents[pos];
                for state in 0..belief.len() {
                    if state == theta_star {
                        continue;
                    }
                    let psi = belief[state] - belief[theta_star];
                    out.push_str(&format!("{trial},{},{agent},{state},{psi}\n", k + 1));
                }
            }
        }
    }
    out
}

/// Persist a trace: beliefs.csv, psi.csv, a config snapshot, and the
/// analysis report when analyses ran. Byte-stable across reruns of the
/// same config.
pub fn write_trace(trace: &Trace, out_dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let theta_star = trace.config.scenario.true_state;
    write_file(dir, "beliefs.csv", &render_beliefs_csv(trace))?;
    write_file(dir, "psi.csv", &render_psi_csv(trace, theta_star))?;
    let config_json = serde_json::to_string_pretty(&trace.config).expect("config serializes");
    write_file(dir, "config.json", &(config_json + "\n"))?;
    if let Some(analysis) = &trace.analysis {
        let analysis_json = serde_json::to_string_pretty(analysis).expect("report serializes");
        write_file(dir, "analysis.json", &(analysis_json + "\n"))?;
    }
    Ok(())
}
