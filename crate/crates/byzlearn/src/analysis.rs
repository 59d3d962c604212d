//! Post-hoc verification over recorded traces: extract the equivalent
//! row-stochastic transition matrix of each round, form backward window
//! products, check that every row keeps uniform mass on some source
//! component of a reduced graph, and reconstruct belief log-ratios from
//! per-round signal likelihood ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::min_norm_convex_weights;
use crate::protocol::RoundRecord;
use crate::topology::{ReducedGraph, SourceComponent};

/// Tolerance used when decomposing an aggregated point over the honest
/// members of its input subset.
pub const DECOMPOSITION_TOL: f64 = 1e-7;
/// Row-sum tolerance for extracted and product matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Entries this far below zero are clamped; anything lower is an error.
pub const ENTRY_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(
        "round {round}, agent {agent}: aggregated point admits no decomposition over \
         non-faulty senders; a subset exceeded the fault bound"
    )]
    AdversaryCountViolation { round: usize, agent: usize },
    #[error("round {round}, agent {agent}: sender {sender} missing from the received record")]
    SenderMissing {
        round: usize,
        agent: usize,
        sender: usize,
    },
    #[error("round {round}, agent {agent}: extracted row sums to {sum}")]
    RowNotStochastic {
        round: usize,
        agent: usize,
        sum: f64,
    },
    #[error("no transition matrix available for round {0}")]
    MissingRound(usize),
    #[error("invalid window: t = {t}, r = {r} (need 1 <= r <= t+1)")]
    BadWindow { t: usize, r: usize },
    #[error("agent orderings disagree between inputs")]
    AgentsMismatch,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

/// The round-t row-stochastic matrix equivalent to one recorded round:
/// row i holds the weights with which agent i's aggregation mixed the
/// previous-round beliefs of the non-faulty agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub t: usize,
    /// Original agent ids backing the rows/columns, ascending.
    pub agents: Vec<usize>,
    pub entries: Vec<Vec<f64>>,
    /// Max per-coordinate error of reproducing the recorded aggregates
    /// from previous beliefs through this matrix.
    pub residual: f64,
}

impl TransitionMatrix {
    pub fn max_row_sum_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Backward product `A[t] A[t-1] ... A[r]`, with `r = t+1` denoting the
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMatrix {
    pub t: usize,
    pub r: usize,
    pub agents: Vec<usize>,
    pub entries: Vec<Vec<f64>>,
}

/// Series of one agent's belief log-ratio between two states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTrace {
    pub agent: usize,
    pub theta: usize,
    pub theta_star: usize,
    /// values[k] is the log-ratio after round k+1.
    pub values: Vec<f64>,
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    out[i][j] += aik * b[k][j];
                }
            }
        }
    }
    out
}

/// Extract the equivalent transition matrix from one round record. Each
/// aggregated point is decomposed over the previous beliefs of the
/// non-faulty members of its subset (minimum-norm weights, so extraction
/// is deterministic even when the decomposition is not unique), and the
/// decompositions are averaged together with the agent's own value.
pub fn extract_transition_matrix(rec: &RoundRecord) -> Result<TransitionMatrix, AnalysisError> {
    if rec.honest.is_empty() {
        return Err(AnalysisError::EmptyInput(
            "round record has no honest agents",
        ));
    }
    let agents: Vec<usize> = rec.honest.iter().map(|r| r.agent).collect();
    let pos_of = |id: usize| agents.binary_search(&id).ok();
    let n = agents.len();
    // previous beliefs are exactly the honest broadcast values
    let prev: Vec<&[f64]> = rec.honest.iter().map(|r| r.sent.as_slice()).collect();

    let mut entries = Vec::with_capacity(n);
    let mut residual = 0.0f64;
    for (row_pos, agent_rec) in rec.honest.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[row_pos] += 1.0; // the own-value term of the average
        for agg in &agent_rec.aggregation {
            // non-faulty members of the subset, with their broadcast values
            let mut member_pos = Vec::new();
            let mut member_points: Vec<&[f64]> = Vec::new();
            for &sender in &agg.subset_senders {
                if let Some(pos) = pos_of(sender) {
                    member_pos.push(pos);
                    if sender == agent_rec.agent {
                        member_points.push(&agent_rec.sent);
                    } else {
                        let vector = agent_rec
                            .received
                            .iter()
                            .find(|(s, _)| *s == sender)
                            .map(|(_, v)| v.as_slice())
                            .ok_or(AnalysisError::SenderMissing {
                                round: rec.t,
                                agent: agent_rec.agent,
                                sender,
                            })?;
                        member_points.push(vector);
                    }
                }
            }
            let weights =
                min_norm_convex_weights(&member_points, &agg.result.point, DECOMPOSITION_TOL)
                    .ok_or(AnalysisError::AdversaryCountViolation {
                        round: rec.t,
                        agent: agent_rec.agent,
                    })?;
            for (&pos, &w) in member_pos.iter().zip(&weights) {
                row[pos] += w;
            }
        }
        let denom = (1 + agent_rec.aggregation.len()) as f64;
        for value in row.iter_mut() {
            *value /= denom;
            if *value < 0.0 {
                if *value < -ENTRY_CLAMP {
                    return Err(AnalysisError::RowNotStochastic {
                        round: rec.t,
                        agent: agent_rec.agent,
                        sum: *value,
                    });
                }
                *value = 0.0;
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(AnalysisError::RowNotStochastic {
                round: rec.t,
                agent: agent_rec.agent,
                sum,
            });
        }

        // defining postcondition: the row reproduces the aggregate
        for c in 0..agent_rec.eta.len() {
            let recon: f64 = row.iter().zip(&prev).map(|(&w, p)| w * p[c]).sum();
            residual = residual.max((recon - agent_rec.eta[c]).abs());
        }
        entries.push(row);
    }

    Ok(TransitionMatrix {
        t: rec.t,
        agents,
        entries,
        residual,
    })
}

/// Extract every round of a recorded trial, in order.
pub fn extract_trial(records: &[RoundRecord]) -> Result<Vec<TransitionMatrix>, AnalysisError> {
    records.iter().map(extract_transition_matrix).collect()
}

fn find_matrix(
    mats: &[TransitionMatrix],
    round: usize,
) -> Result<&TransitionMatrix, AnalysisError> {
    mats.iter()
        .find(|m| m.t == round)
        .ok_or(AnalysisError::MissingRound(round))
}

/// Backward product over a window of extracted matrices, honoring the
/// conventions `phi(t, t+1) = identity` and `phi(t, t) = A[t]`.
pub fn phi_product(
    mats: &[TransitionMatrix],
    t: usize,
    r: usize,
) -> Result<ProductMatrix, AnalysisError> {
    if r == 0 || r > t + 1 {
        return Err(AnalysisError::BadWindow { t, r });
    }
    let reference = if r == t + 1 {
        mats.first()
            .ok_or(AnalysisError::EmptyInput("no matrices supplied"))?
    } else {
        find_matrix(mats, t)?
    };
    let agents = reference.agents.clone();
    let n = agents.len();
    let mut product = identity(n);
    if r <= t {
        for round in (r..=t).rev() {
            let a = find_matrix(mats, round)?;
            if a.agents != agents {
                return Err(AnalysisError::AgentsMismatch);
            }
            product = matmul(&product, &a.entries);
        }
    }
    Ok(ProductMatrix {
        t,
        r,
        agents,
        entries: product,
    })
}

/// The largest constant beta such that the matrix dominates beta times
/// some supplied reduced graph's adjacency structure (self-loops always
/// included), together with the first graph attaining it. Zero means no
/// supplied graph is compatible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaWitness {
    pub beta: f64,
    pub graph_index: usize,
}

pub fn empirical_beta(
    a: &TransitionMatrix,
    reduced_graphs: &[ReducedGraph],
) -> Result<BetaWitness, AnalysisError> {
    if reduced_graphs.is_empty() {
        return Err(AnalysisError::EmptyInput("no reduced graphs supplied"));
    }
    let mut best = BetaWitness {
        beta: 0.0,
        graph_index: 0,
    };
    for (graph_index, graph) in reduced_graphs.iter().enumerate() {
        if graph.kept_nodes() != a.agents.as_slice() {
            return Err(AnalysisError::AgentsMismatch);
        }
        let pos_of = |id: usize| {
            a.agents
                .binary_search(&id)
                .expect("kept node present in matrix agents")
        };
        let mut low = f64::INFINITY;
        for i in 0..a.agents.len() {
            low = low.min(a.entries[i][i]);
        }
        for &(src, dst) in graph.kept_edges() {
            low = low.min(a.entries[pos_of(dst)][pos_of(src)]);
        }
        if low > best.beta {
            best = BetaWitness {
                beta: low,
                graph_index,
            };
        }
    }
    best.beta = best.beta.max(0.0);
    Ok(best)
}

/// Best source-component witness for one matrix row: the component whose
/// members all receive at least `min_entry` mass in that row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowSourceWitness {
    pub agent: usize,
    pub graph_index: usize,
    pub component: SourceComponent,
    pub min_entry: f64,
    pub clears_threshold: bool,
}

/// For each row of a window product, search the supplied reduced graphs
/// for a source component on which the row keeps uniformly large mass.
/// Reports the max-min witness per row and whether it clears `threshold`.
pub fn source_window_check(
    phi: &ProductMatrix,
    reduced_graphs: &[ReducedGraph],
    threshold: f64,
) -> Result<Vec<RowSourceWitness>, AnalysisError> {
    if reduced_graphs.is_empty() {
        return Err(AnalysisError::EmptyInput("no reduced graphs supplied"));
    }
    let components: Vec<Vec<SourceComponent>> = reduced_graphs
        .iter()
        .map(|g| {
            if g.kept_nodes() != phi.agents.as_slice() {
                Err(AnalysisError::AgentsMismatch)
            } else {
                Ok(g.source_components())
            }
        })
        .collect::<Result<_, _>>()?;
    let pos_of = |id: usize| {
        phi.agents
            .binary_search(&id)
            .expect("component member present in matrix agents")
    };

    let mut out = Vec::with_capacity(phi.agents.len());
    for (row_pos, &agent) in phi.agents.iter().enumerate() {
        let mut best: Option<RowSourceWitness> = None;
        for (graph_index, comps) in components.iter().enumerate() {
            for component in comps {
                let min_entry = component
                    .members
                    .iter()
                    .map(|&j| phi.entries[row_pos][pos_of(j)])
                    .fold(f64::INFINITY, f64::min);
                let better = best.as_ref().is_none_or(|b| min_entry > b.min_entry);
                if better {
                    best = Some(RowSourceWitness {
                        agent,
                        graph_index,
                        component: component.clone(),
                        min_entry,
                        clears_threshold: min_entry >= threshold,
                    });
                }
            }
        }
        out.push(best.expect("at least one reduced graph with a source component"));
    }
    Ok(out)
}

/// Belief log-ratio series of one honest agent from a recorded belief
/// trajectory (`beliefs[k][agent_pos]` is the log-belief after round k+1).
pub fn psi_trace(
    beliefs: &[Vec<Vec<f64>>],
    agents: &[usize],
    agent: usize,
    theta: usize,
    theta_star: usize,
) -> Result<PsiTrace, AnalysisError> {
    let pos = agents
        .binary_search(&agent)
        .map_err(|_| AnalysisError::AgentsMismatch)?;
    let values = beliefs
        .iter()
        .map(|round| round[pos][theta] - round[pos][theta_star])
        .collect();
    Ok(PsiTrace {
        agent,
        theta,
        theta_star,
        values,
    })
}

fn prefix_log_ratios(l_ratios: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut prefix = Vec::with_capacity(l_ratios.len());
    let mut acc = vec![0.0; l_ratios.first().map_or(0, Vec::len)];
    for round in l_ratios {
        for (a, &l) in acc.iter_mut().zip(round) {
            *a += l;
        }
        prefix.push(acc.clone());
    }
    prefix
}

/// Reconstruct every agent's log-ratio at every round from per-round
/// signal log-likelihood ratios pushed through the extracted window
/// products, and report the worst deviation from the measured series.
///
/// `l_ratios[k][j]` is agent j's round-(k+1) log-likelihood ratio of
/// `theta` against the true state; `psi_measured[k][j]` the measured
/// log-ratio after round k+1.
pub fn psi_reconstruction_residual(
    l_ratios: &[Vec<f64>],
    mats: &[TransitionMatrix],
    psi_measured: &[Vec<f64>],
) -> Result<f64, AnalysisError> {
    let horizon = l_ratios.len();
    if horizon == 0 {
        return Err(AnalysisError::EmptyInput("no rounds supplied"));
    }
    if psi_measured.len() != horizon {
        return Err(AnalysisError::AgentsMismatch);
    }
    let n = l_ratios[0].len();
    let prefix = prefix_log_ratios(l_ratios);

    let mut worst = 0.0f64;
    for t in 1..=horizon {
        let mut acc = vec![0.0; n];
        let mut phi = identity(n);
        for r in (1..=t).rev() {
            // phi currently equals the backward product ending at r+1
            for i in 0..n {
                let mut dot = 0.0;
                for j in 0..n {
                    dot += phi[i][j] * prefix[r - 1][j];
                }
                acc[i] += dot;
            }
            if r > 1 {
                let a = find_matrix(mats, r)?;
                phi = matmul(&phi, &a.entries);
            }
        }
        for i in 0..n {
            worst = worst.max((acc[i] - psi_measured[t - 1][i]).abs());
        }
    }
    Ok(worst)
}

/// Centered law-of-large-numbers statistic per agent at the requested
/// rounds: the accumulated gap between pushed-through likelihood ratios
/// and their expected drift, scaled by 1/t^2. Decays toward zero when
/// the averaged signal streams obey their models.
pub fn q_statistic(
    l_ratios: &[Vec<f64>],
    h_values: &[f64],
    mats: &[TransitionMatrix],
    ts: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>, AnalysisError> {
    let horizon = l_ratios.len();
    if horizon == 0 {
        return Err(AnalysisError::EmptyInput("no rounds supplied"));
    }
    let n = l_ratios[0].len();
    if h_values.len() != n {
        return Err(AnalysisError::AgentsMismatch);
    }
    let prefix = prefix_log_ratios(l_ratios);

    let mut out = BTreeMap::new();
    for &t in ts {
        if t == 0 || t > horizon {
            return Err(AnalysisError::MissingRound(t));
        }
        let mut acc = vec![0.0; n];
        let mut phi = identity(n);
        for r in (1..=t).rev() {
            for i in 0..n {
                let mut dot = 0.0;
                for j in 0..n {
                    dot += phi[i][j] * (prefix[r - 1][j] - r as f64 * h_values[j]);
                }
                acc[i] += dot;
            }
            if r > 1 {
                let a = find_matrix(mats, r)?;
                phi = matmul(&phi, &a.entries);
            }
        }
        let scale = (t * t) as f64;
        out.insert(t, acc.iter().map(|&q| q.abs() / scale).collect());
    }
    Ok(out)
}
