//! World states, per-agent signal models, likelihood and KL computations,
//! the C0/C1 bounding constants, and the global-identifiability checker.
//!
//! All likelihood arithmetic is done in natural-log space; cumulative
//! products of likelihoods are stored as cumulative log sums.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{
    enumerate_reduced_graphs, ReducedGraph, Scenario, SourceComponent, TopologyError,
};

/// Smallest admissible likelihood entry; enforces full support and bounds
/// every log-ratio.
pub const MIN_LIKELIHOOD: f64 = 1e-12;
/// Tolerance on column sums of a likelihood matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// A summed KL divergence at or below this is treated as zero when
/// testing identifiability.
pub const KL_POSITIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error("state space needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("true state index {index} out of range for {count} states")]
    TrueStateOutOfRange { index: usize, count: usize },
    #[error("agent {agent}: signal space must be nonempty")]
    EmptySignalSpace { agent: usize },
    #[error("agent {agent}: row {row} has {got} entries, expected {expected} states")]
    RowWidthMismatch {
        agent: usize,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error(
        "agent {agent}: likelihood({signal}|state {state}) = {value} below minimum {MIN_LIKELIHOOD}"
    )]
    EntryTooSmall {
        agent: usize,
        signal: usize,
        state: usize,
        value: f64,
    },
    #[error("agent {agent}: likelihood entry is not finite")]
    NonFiniteEntry { agent: usize },
    #[error("agent {agent}: column for state {state} sums to {sum}, expected 1")]
    ColumnSumOff {
        agent: usize,
        state: usize,
        sum: f64,
    },
    #[error("agent index {agent} out of range for {count} agents")]
    AgentOutOfRange { agent: usize, count: usize },
    #[error("state index {state} out of range for {count} states")]
    StateOutOfRange { state: usize, count: usize },
    #[error("component list must be nonempty")]
    NoComponents,
    #[error("model has {model} state columns but scenario declares {scenario}")]
    StateCountMismatch { model: usize, scenario: usize },
    #[error("model covers {model} agents but graph has {graph} nodes")]
    AgentCountMismatch { model: usize, graph: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// The finite set of candidate world states and which one is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    labels: Vec<String>,
    true_index: usize,
}

impl StateSpace {
    pub fn new(
        labels: impl IntoIterator<Item = impl Into<String>>,
        true_index: usize,
    ) -> Result<Self, ObservationError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(ObservationError::TooFewStates(labels.len()));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(ObservationError::DuplicateLabel(label.clone()));
            }
        }
        if true_index >= labels.len() {
            return Err(ObservationError::TrueStateOutOfRange {
                index: true_index,
                count: labels.len(),
            });
        }
        Ok(Self { labels, true_index })
    }

    /// Convenience constructor with labels "s0", "s1", ...
    pub fn indexed(count: usize, true_index: usize) -> Result<Self, ObservationError> {
        Self::new((0..count).map(|i| format!("s{i}")), true_index)
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }
}

/// Per-agent finite signal models: `matrix[signal][state]` is the
/// probability of observing `signal` when the world state is `state`.
/// Every column is a full-support distribution over the agent's signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    state_count: usize,
    agents: Vec<Vec<Vec<f64>>>,
}

impl LikelihoodModel {
    pub fn new(state_count: usize, agents: Vec<Vec<Vec<f64>>>) -> Result<Self, ObservationError> {
        for (agent, matrix) in agents.iter().enumerate() {
            if matrix.is_empty() {
                return Err(ObservationError::EmptySignalSpace { agent });
            }
            for (row, entries) in matrix.iter().enumerate() {
                if entries.len() != state_count {
                    return Err(ObservationError::RowWidthMismatch {
                        agent,
                        row,
                        got: entries.len(),
                        expected: state_count,
                    });
                }
            }
            for state in 0..state_count {
                let mut sum = 0.0;
                for (signal, row) in matrix.iter().enumerate() {
                    let value = row[state];
                    if !value.is_finite() {
                        return Err(ObservationError::NonFiniteEntry { agent });
                    }
                    if value < MIN_LIKELIHOOD {
                        return Err(ObservationError::EntryTooSmall {
                            agent,
                            signal,
                            state,
                            value,
                        });
                    }
                    sum += value;
                }
                if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                    return Err(ObservationError::ColumnSumOff { agent, state, sum });
                }
            }
        }
        Ok(Self {
            state_count,
            agents,
        })
    }

    /// One shared signal matrix for `agent_count` identical agents.
    pub fn uniform_agents(
        agent_count: usize,
        state_count: usize,
        matrix: Vec<Vec<f64>>,
    ) -> Result<Self, ObservationError> {
        Self::new(state_count, vec![matrix; agent_count])
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn signal_count(&self, agent: usize) -> usize {
        self.agents[agent].len()
    }

    pub fn likelihood(&self, agent: usize, signal: usize, state: usize) -> f64 {
        self.agents[agent][signal][state]
    }

    pub fn log_likelihood(&self, agent: usize, signal: usize, state: usize) -> f64 {
        self.agents[agent][signal][state].ln()
    }

    fn check_agent(&self, agent: usize) -> Result<(), ObservationError> {
        if agent >= self.agents.len() {
            return Err(ObservationError::AgentOutOfRange {
                agent,
                count: self.agents.len(),
            });
        }
        Ok(())
    }

    fn check_state(&self, state: usize) -> Result<(), ObservationError> {
        if state >= self.state_count {
            return Err(ObservationError::StateOutOfRange {
                state,
                count: self.state_count,
            });
        }
        Ok(())
    }
}

/// Draw one signal for `agent` from its distribution under the true state.
pub fn sample_signal<R: Rng>(
    model: &LikelihoodModel,
    agent: usize,
    states: &StateSpace,
    rng: &mut R,
) -> usize {
    let theta_star = states.true_index();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = model.signal_count(agent) - 1;
    for signal in 0..last {
        acc += model.likelihood(agent, signal, theta_star);
        if u < acc {
            return signal;
        }
    }
    last
}

/// KL divergence between agent's signal distributions under two states:
/// sum over signals of l(w|a) * ln(l(w|a)/l(w|b)). Finite by full support.
pub fn kl_divergence(model: &LikelihoodModel, agent: usize, state_a: usize, state_b: usize) -> f64 {
    let mut total = 0.0;
    for signal in 0..model.signal_count(agent) {
        let p = model.likelihood(agent, signal, state_a);
        let q = model.likelihood(agent, signal, state_b);
        total += p * (p / q).ln();
    }
    total
}

/// Expected one-round log-likelihood ratio of `state` against the true
/// state, under the true state: always non-positive, and zero exactly
/// when the two columns coincide.
pub fn h_value(model: &LikelihoodModel, agent: usize, state: usize, theta_star: usize) -> f64 {
    -kl_divergence(model, agent, theta_star, state)
}

/// Worst-case magnitude of a single log-likelihood ratio over all agents,
/// ordered state pairs, and signals. Non-negative and finite.
pub fn compute_c0(model: &LikelihoodModel) -> f64 {
    let mut min_ratio = f64::INFINITY;
    for agent in 0..model.agent_count() {
        for a in 0..model.state_count() {
            for b in 0..model.state_count() {
                if a == b {
                    continue;
                }
                for signal in 0..model.signal_count(agent) {
                    let ratio = (model.likelihood(agent, signal, a)
                        / model.likelihood(agent, signal, b))
                    .ln();
                    min_ratio = min_ratio.min(ratio);
                }
            }
        }
    }
    if min_ratio.is_finite() {
        -min_ratio
    } else {
        // single-state or degenerate model: no ordered pair exists
        0.0
    }
}

fn component_kl_sum(
    model: &LikelihoodModel,
    component: &SourceComponent,
    theta_star: usize,
    state: usize,
) -> f64 {
    component
        .members
        .iter()
        .map(|&agent| kl_divergence(model, agent, theta_star, state))
        .sum()
}

/// Worst-case identifiability margin: the minimum over the supplied
/// source components and states other than the true one of the summed KL
/// divergence within the component. Strictly positive iff every supplied
/// component can collectively distinguish the true state.
pub fn compute_c1(
    model: &LikelihoodModel,
    components: &[SourceComponent],
    states: &StateSpace,
) -> Result<f64, ObservationError> {
    if components.is_empty() {
        return Err(ObservationError::NoComponents);
    }
    let theta_star = states.true_index();
    let mut best = f64::INFINITY;
    for component in components {
        for state in 0..states.count() {
            if state == theta_star {
                continue;
            }
            best = best.min(component_kl_sum(model, component, theta_star, state));
        }
    }
    Ok(best)
}

/// Strict variant minimizing over all ordered state pairs rather than
/// holding the true state fixed; useful for comparing margins when the
/// true state is not pinned.
pub fn compute_c1_strict(
    model: &LikelihoodModel,
    components: &[SourceComponent],
    state_count: usize,
) -> Result<f64, ObservationError> {
    if components.is_empty() {
        return Err(ObservationError::NoComponents);
    }
    let mut best = f64::INFINITY;
    for component in components {
        for a in 0..state_count {
            for b in 0..state_count {
                if a == b {
                    continue;
                }
                let sum: f64 = component
                    .members
                    .iter()
                    .map(|&agent| kl_divergence(model, agent, a, b))
                    .sum();
                best = best.min(sum);
            }
        }
    }
    Ok(best)
}

/// A concrete identifiability violation: a reduced graph, one of its
/// source components, and a state the component cannot tell apart from
/// the true one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiabilityWitness {
    pub graph: ReducedGraph,
    pub component: SourceComponent,
    pub state: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub holds: bool,
    pub witness: Option<IdentifiabilityWitness>,
    /// True iff the whole reduced-graph family was inspected under the cap.
    pub exhaustive: bool,
    pub graphs_checked: usize,
}

/// Check that every source component of every reduced graph (up to the
/// enumeration cap) has strictly positive summed KL divergence against
/// each non-true state. Stops at the first violation with a witness.
pub fn check_global_identifiability(
    model: &LikelihoodModel,
    scenario: &Scenario,
    states: &StateSpace,
    cap: usize,
) -> Result<IdentifiabilityReport, ObservationError> {
    if model.state_count() != scenario.state_count() {
        return Err(ObservationError::StateCountMismatch {
            model: model.state_count(),
            scenario: scenario.state_count(),
        });
    }
    if model.agent_count() != scenario.graph.node_count() {
        return Err(ObservationError::AgentCountMismatch {
            model: model.agent_count(),
            graph: scenario.graph.node_count(),
        });
    }
    let (graphs, exhaustive) = enumerate_reduced_graphs(scenario, cap)?;
    let theta_star = states.true_index();
    let mut checked = 0;
    for graph in graphs {
        checked += 1;
        for component in graph.source_components() {
            for state in 0..states.count() {
                if state == theta_star {
                    continue;
                }
                if component_kl_sum(model, &component, theta_star, state) <= KL_POSITIVITY_TOL {
                    return Ok(IdentifiabilityReport {
                        holds: false,
                        witness: Some(IdentifiabilityWitness {
                            graph,
                            component,
                            state,
                        }),
                        exhaustive,
                        graphs_checked: checked,
                    });
                }
            }
        }
    }
    Ok(IdentifiabilityReport {
        holds: true,
        witness: None,
        exhaustive,
        graphs_checked: checked,
    })
}

/// Ordered signal observations of one agent together with the cumulative
/// log-likelihood vector they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHistory {
    agent: usize,
    signals: Vec<usize>,
    cumulative: Vec<f64>,
}

impl SignalHistory {
    pub fn new(agent: usize, state_count: usize) -> Self {
        Self {
            agent,
            signals: Vec::new(),
            cumulative: vec![0.0; state_count],
        }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn signals(&self) -> &[usize] {
        &self.signals
    }

    /// Cumulative log-likelihood of the full history per state.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn push(&mut self, model: &LikelihoodModel, signal: usize) {
        for (state, acc) in self.cumulative.iter_mut().enumerate() {
            *acc += model.log_likelihood(self.agent, signal, state);
        }
        self.signals.push(signal);
    }

    /// Recompute the cumulative vector from the stored history.
    pub fn recompute(&self, model: &LikelihoodModel) -> Vec<f64> {
        let mut out = vec![0.0; self.cumulative.len()];
        for &signal in &self.signals {
            for (state, acc) in out.iter_mut().enumerate() {
                *acc += model.log_likelihood(self.agent, signal, state);
            }
        }
        out
    }
}

/// Validate that state/agent indices are in range before analysis entry
/// points dereference them.
pub fn validate_indices(
    model: &LikelihoodModel,
    agent: usize,
    states: &[usize],
) -> Result<(), ObservationError> {
    model.check_agent(agent)?;
    for &s in states {
        model.check_state(s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::DirectedGraph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn binary_informative() -> Vec<Vec<f64>> {
        vec![vec![0.7, 0.3], vec![0.3, 0.7]]
    }

    fn binary_uninformative() -> Vec<Vec<f64>> {
        vec![vec![0.5, 0.5], vec![0.5, 0.5]]
    }

    #[test]
    fn load_rejects_tiny_entries() {
        let m = vec![vec![1.0 - 0.5e-13, 0.3], vec![0.5e-13, 0.7]];
        assert!(matches!(
            LikelihoodModel::new(2, vec![m]),
            Err(ObservationError::EntryTooSmall { .. })
        ));
    }

    #[test]
    fn load_rejects_bad_column_sum() {
        let m = vec![vec![0.7, 0.3], vec![0.2, 0.7]];
        assert!(matches!(
            LikelihoodModel::new(2, vec![m]),
            Err(ObservationError::ColumnSumOff {
                agent: 0,
                state: 0,
                ..
            })
        ));
    }

    #[test]
    fn sampling_near_point_mass() {
        let m = vec![
            vec![1.0 - 2e-12, 1.0 - 2e-12],
            vec![1e-12, 1e-12],
            vec![1e-12, 1e-12],
        ];
        let model = LikelihoodModel::new(2, vec![m]).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let hits = (0..10_000)
            .filter(|_| sample_signal(&model, 0, &states, &mut rng) == 0)
            .count();
        assert!(hits >= 9_990);
    }

    #[test]
    fn sampling_fair_binary_pinned_seed() {
        let m = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let model = LikelihoodModel::new(2, vec![m]).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let ones: usize = (0..10_000)
            .map(|_| sample_signal(&model, 0, &states, &mut rng))
            .sum();
        let mean = ones as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "mean = {mean}");
        // frozen draw count for seed 42
        assert_eq!(ones, 5028);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let model = LikelihoodModel::uniform_agents(1, 2, binary_informative()).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..256)
                .map(|_| sample_signal(&model, 0, &states, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn kl_of_identical_columns_is_zero() {
        let model = LikelihoodModel::uniform_agents(1, 2, binary_uninformative()).unwrap();
        assert_eq!(kl_divergence(&model, 0, 0, 1), 0.0);
    }

    #[test]
    fn kl_binary_hand_value() {
        let model = LikelihoodModel::uniform_agents(1, 2, binary_informative()).unwrap();
        // 0.7 ln(7/3) + 0.3 ln(3/7) = 0.4 ln(7/3)
        let expected = 0.4 * (7.0f64 / 3.0).ln();
        assert!((kl_divergence(&model, 0, 0, 1) - expected).abs() < 1e-12);
        assert!((expected - 0.338_919_144_154_881_5).abs() < 1e-12);
    }

    #[test]
    fn kl_positive_for_distinct_columns() {
        let m = vec![vec![0.6, 0.5], vec![0.4, 0.5]];
        let model = LikelihoodModel::new(2, vec![m]).unwrap();
        assert!(kl_divergence(&model, 0, 0, 1) > 0.0);
        assert!(kl_divergence(&model, 0, 1, 0) > 0.0);
    }

    #[test]
    fn h_value_is_negated_kl_and_bounded_by_c0() {
        let model = LikelihoodModel::uniform_agents(3, 2, binary_informative()).unwrap();
        assert_eq!(h_value(&model, 0, 0, 0), 0.0);
        let expected = -0.4 * (7.0f64 / 3.0).ln();
        assert!((h_value(&model, 1, 1, 0) - expected).abs() < 1e-12);
        let c0 = compute_c0(&model);
        for agent in 0..3 {
            for state in 0..2 {
                let h = h_value(&model, agent, state, 0);
                assert!(h <= 1e-15 && h >= -c0 - 1e-15);
            }
        }
    }

    #[test]
    fn c0_hand_values() {
        let flat = LikelihoodModel::uniform_agents(2, 2, binary_uninformative()).unwrap();
        assert_eq!(compute_c0(&flat), 0.0);
        let sharp = LikelihoodModel::uniform_agents(1, 2, binary_informative()).unwrap();
        assert!((compute_c0(&sharp) - (7.0f64 / 3.0).ln()).abs() < 1e-12);
        // clamped entries bound every ratio by ln(1/MIN_LIKELIHOOD)
        let extreme = vec![vec![1.0 - 2e-12, 1e-12], vec![1e-12, 1.0 - 2e-12]];
        let model = LikelihoodModel::new(2, vec![extreme]).unwrap();
        assert!(compute_c0(&model) <= (1.0 / MIN_LIKELIHOOD).ln() + 1e-9);
    }

    #[test]
    fn c1_single_component_and_violation() {
        let states = StateSpace::indexed(2, 0).unwrap();
        let model = LikelihoodModel::uniform_agents(1, 2, binary_informative()).unwrap();
        let only = vec![SourceComponent { members: vec![0] }];
        let c1 = compute_c1(&model, &only, &states).unwrap();
        assert!((c1 - kl_divergence(&model, 0, 0, 1)).abs() < 1e-12);
        assert!(c1 > 0.0);

        let blind = LikelihoodModel::uniform_agents(1, 2, binary_uninformative()).unwrap();
        assert_eq!(compute_c1(&blind, &only, &states).unwrap(), 0.0);

        // one all-blind component added to informative ones drags the
        // margin to zero
        let mixed_model =
            LikelihoodModel::new(2, vec![binary_informative(), binary_uninformative()]).unwrap();
        let informative_only = vec![SourceComponent { members: vec![0] }];
        assert!(compute_c1(&mixed_model, &informative_only, &states).unwrap() > 0.0);
        let with_blind = vec![
            SourceComponent { members: vec![0] },
            SourceComponent { members: vec![1] },
        ];
        assert_eq!(compute_c1(&mixed_model, &with_blind, &states).unwrap(), 0.0);

        assert!(matches!(
            compute_c1(&model, &[], &states),
            Err(ObservationError::NoComponents)
        ));
    }

    #[test]
    fn c1_matches_exhaustive_oracle_over_two_components() {
        // agents 0,1 share one model; agent 2 is sharper
        let model = LikelihoodModel::new(
            2,
            vec![
                binary_informative(),
                binary_informative(),
                vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            ],
        )
        .unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let comps = vec![
            SourceComponent {
                members: vec![0, 1],
            },
            SourceComponent { members: vec![2] },
        ];
        // independent oracle: direct min over the finite set
        let mut oracle = f64::INFINITY;
        for comp in &comps {
            let sum: f64 = comp
                .members
                .iter()
                .map(|&a| kl_divergence(&model, a, 0, 1))
                .sum();
            oracle = oracle.min(sum);
        }
        let got = compute_c1(&model, &comps, &states).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        // the strict variant can only be <= the fixed-true-state one
        assert!(compute_c1_strict(&model, &comps, 2).unwrap() <= got + 1e-15);
    }

    #[test]
    fn identifiability_holds_on_strongly_connected_informative_graph() {
        let g = DirectedGraph::complete(3).unwrap();
        let s = Scenario::new(g, [], 0, 2).unwrap();
        let model = LikelihoodModel::uniform_agents(3, 2, binary_informative()).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let report = check_global_identifiability(&model, &s, &states, 1000).unwrap();
        assert!(report.holds);
        assert!(report.exhaustive);
        assert_eq!(report.graphs_checked, 1);
    }

    #[test]
    fn identifiability_fails_with_witness_on_blind_source() {
        // chain 0 -> 1: the only source component is {0}, which is blind
        let g = DirectedGraph::new(2, [(0, 1)]).unwrap();
        let s = Scenario::new(g, [], 0, 2).unwrap();
        let model =
            LikelihoodModel::new(2, vec![binary_uninformative(), binary_informative()]).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let report = check_global_identifiability(&model, &s, &states, 1000).unwrap();
        assert!(!report.holds);
        let witness = report.witness.unwrap();
        assert_eq!(witness.component.members, vec![0]);
        assert_eq!(witness.state, 1);
    }

    #[test]
    fn identifiability_exhaustive_over_sixty_four_reductions() {
        let g = DirectedGraph::complete(4).unwrap();
        let s = Scenario::new(g, [3], 1, 2).unwrap();
        let model = LikelihoodModel::uniform_agents(4, 2, binary_informative()).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let report = check_global_identifiability(&model, &s, &states, 1000).unwrap();
        assert!(report.holds);
        assert!(report.exhaustive);
        assert_eq!(report.graphs_checked, 64);
    }

    #[test]
    fn signal_history_incremental_matches_recompute() {
        let model = LikelihoodModel::uniform_agents(1, 2, binary_informative()).unwrap();
        let states = StateSpace::indexed(2, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut history = SignalHistory::new(0, 2);
        for _ in 0..10_000 {
            let signal = sample_signal(&model, 0, &states, &mut rng);
            history.push(&model, signal);
        }
        let fresh = history.recompute(&model);
        for (inc, re) in history.cumulative().iter().zip(&fresh) {
            assert!((inc - re).abs() < 1e-10);
        }
    }
}
