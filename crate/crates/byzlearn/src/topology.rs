//! Directed communication graphs, strongly connected components, source
//! components, and the reduced-graph family obtained by deleting faulty
//! agents and bounded sets of incoming links.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge ({src}, {dst}) out of range for graph with {n} nodes")]
    EdgeOutOfRange { src: usize, dst: usize, n: usize },
    #[error("self-loop on node {0} (self-influence is implicit and must not be listed)")]
    SelfLoop(usize),
    #[error("faulty node {0} is not a node of the graph")]
    FaultyOutOfRange(usize),
    #[error("faulty set has {actual} members, exceeding fault_bound {bound}")]
    FaultBoundExceeded { actual: usize, bound: usize },
    #[error("state_count must be positive")]
    ZeroStates,
    #[error("enumeration cap must be positive")]
    ZeroCap,
    #[error("reduced-graph count overflows 128-bit arithmetic")]
    CountOverflow,
}

/// A simple directed graph on nodes `0..n`. Self-loops are rejected: an
/// agent always has access to its own value, so self-influence is never
/// represented as an explicit link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (src, dst) in edges {
            if src >= node_count || dst >= node_count {
                return Err(TopologyError::EdgeOutOfRange {
                    src,
                    dst,
                    n: node_count,
                });
            }
            if src == dst {
                return Err(TopologyError::SelfLoop(src));
            }
            set.insert((src, dst));
        }
        Ok(Self {
            node_count,
            edges: set.into_iter().collect(),
        })
    }

    /// Complete digraph: every ordered pair of distinct nodes is a link.
    pub fn complete(node_count: usize) -> Result<Self, TopologyError> {
        let edges = (0..node_count).flat_map(|u| {
            (0..node_count)
                .filter(move |&v| v != u)
                .map(move |v| (u, v))
        });
        Self::new(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.binary_search(&(src, dst)).is_ok()
    }

    /// Nodes with a link into `dst`, ascending.
    pub fn in_neighbors(&self, dst: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, d)| d == dst)
            .map(|&(s, _)| s)
            .collect()
    }

    /// Nodes `src` links to, ascending.
    pub fn out_neighbors(&self, src: usize) -> Vec<usize> {
        // edges are sorted by (src, dst), so the slice for `src` is contiguous
        let lo = self.edges.partition_point(|&(s, _)| s < src);
        let hi = self.edges.partition_point(|&(s, _)| s <= src);
        self.edges[lo..hi].iter().map(|&(_, d)| d).collect()
    }
}

/// One execution setup: the graph, the (fixed) set of faulty agents, the
/// fault bound `f` known to every agent, and the number of world states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: DirectedGraph,
    faulty_set: BTreeSet<usize>,
    fault_bound: usize,
    state_count: usize,
}

impl Scenario {
    pub fn new(
        graph: DirectedGraph,
        faulty_set: impl IntoIterator<Item = usize>,
        fault_bound: usize,
        state_count: usize,
    ) -> Result<Self, TopologyError> {
        let faulty_set: BTreeSet<usize> = faulty_set.into_iter().collect();
        for &v in &faulty_set {
            if v >= graph.node_count() {
                return Err(TopologyError::FaultyOutOfRange(v));
            }
        }
        if faulty_set.len() > fault_bound {
            return Err(TopologyError::FaultBoundExceeded {
                actual: faulty_set.len(),
                bound: fault_bound,
            });
        }
        if state_count == 0 {
            return Err(TopologyError::ZeroStates);
        }
        Ok(Self {
            graph,
            faulty_set,
            fault_bound,
            state_count,
        })
    }

    pub fn faulty_set(&self) -> &BTreeSet<usize> {
        &self.faulty_set
    }

    pub fn is_faulty(&self, node: usize) -> bool {
        self.faulty_set.contains(&node)
    }

    pub fn fault_bound(&self) -> usize {
        self.fault_bound
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// Non-faulty nodes, ascending.
    pub fn kept_nodes(&self) -> Vec<usize> {
        (0..self.graph.node_count())
            .filter(|v| !self.faulty_set.contains(v))
            .collect()
    }

    /// Maximum number of incoming links that may be additionally removed
    /// per kept node when forming a reduced graph.
    pub fn removal_budget(&self) -> usize {
        self.state_count * self.fault_bound
    }
}

/// A member of the reduced-graph family: faulty nodes and their incident
/// links deleted, plus up to `m*f` further incoming links removed per
/// kept node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedGraph {
    kept_nodes: Vec<usize>,
    kept_edges: Vec<(usize, usize)>,
}

impl ReducedGraph {
    pub fn kept_nodes(&self) -> &[usize] {
        &self.kept_nodes
    }

    pub fn kept_edges(&self) -> &[(usize, usize)] {
        &self.kept_edges
    }

    pub fn source_components(&self) -> Vec<SourceComponent> {
        source_components_of(&self.kept_nodes, &self.kept_edges)
    }
}

/// A strongly connected set of agents with no incoming link from outside
/// the set. Members are stored ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceComponent {
    pub members: Vec<usize>,
}

/// Maximal strongly connected components of `g`, each sorted ascending,
/// ordered by smallest member.
pub fn strongly_connected_components(g: &DirectedGraph) -> Vec<Vec<usize>> {
    let nodes: Vec<usize> = (0..g.node_count()).collect();
    scc_with_labels(&nodes, g.edges())
}

/// Source components of `g`: the SCCs with in-degree zero in the
/// condensation DAG.
pub fn source_components(g: &DirectedGraph) -> Vec<SourceComponent> {
    let nodes: Vec<usize> = (0..g.node_count()).collect();
    source_components_of(&nodes, g.edges())
}

/// Every kept node of `h` is either in a source component or reachable
/// from one. This holds for any finite digraph, so the check exists as an
/// executable sanity invariant and must return true on well-formed input.
pub fn check_reachability_condition(h: &ReducedGraph) -> bool {
    if h.kept_nodes.is_empty() {
        return true;
    }
    let sources = h.source_components();
    let start: Vec<usize> = sources.iter().flat_map(|c| c.members.clone()).collect();
    let reached = reachable_from(&start, &h.kept_nodes, &h.kept_edges);
    h.kept_nodes.iter().all(|v| reached.contains(v))
}

/// Tarjan over an arbitrary labeled node set. Output components are
/// sorted internally and ordered by smallest member.
fn scc_with_labels(nodes: &[usize], edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let n = nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let index_of = |label: usize| nodes.binary_search(&label).expect("node label present");
    let mut adj = vec![Vec::new(); n];
    for &(src, dst) in edges {
        adj[index_of(src)].push(index_of(dst));
    }

    // Iterative Tarjan to keep deep chains off the call stack.
    let mut order = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut next)) = work.last_mut() {
            if *next == 0 {
                order[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if order[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                if low[v] == order[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(nodes[w]);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
                work.pop();
                if let Some(&mut (parent, _)) = work.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }

    comps.sort_by_key(|c| c[0]);
    comps
}

fn source_components_of(nodes: &[usize], edges: &[(usize, usize)]) -> Vec<SourceComponent> {
    let comps = scc_with_labels(nodes, edges);
    let mut comp_of = std::collections::HashMap::new();
    for (cid, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of.insert(v, cid);
        }
    }
    let mut has_incoming = vec![false; comps.len()];
    for &(src, dst) in edges {
        let cs = comp_of[&src];
        let cd = comp_of[&dst];
        if cs != cd {
            has_incoming[cd] = true;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(cid, _)| !has_incoming[*cid])
        .map(|(_, members)| SourceComponent { members })
        .collect()
}

fn reachable_from(start: &[usize], nodes: &[usize], edges: &[(usize, usize)]) -> BTreeSet<usize> {
    let node_set: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut reached: BTreeSet<usize> = start
        .iter()
        .copied()
        .filter(|v| node_set.contains(v))
        .collect();
    let mut frontier: Vec<usize> = reached.iter().copied().collect();
    while let Some(v) = frontier.pop() {
        for &(src, dst) in edges {
            if src == v && reached.insert(dst) {
                frontier.push(dst);
            }
        }
    }
    reached
}

fn binomial(n: usize, k: usize) -> Result<u128, TopologyError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(TopologyError::CountOverflow)?;
        acc /= (i + 1) as u128;
    }
    Ok(acc)
}

/// Number of removal choices for a node with `in_degree` incoming links
/// and a removal budget: all subsets of size `0..=budget`.
fn node_choice_count(in_degree: usize, budget: usize) -> Result<u128, TopologyError> {
    let mut total: u128 = 0;
    for k in 0..=budget.min(in_degree) {
        total = total
            .checked_add(binomial(in_degree, k)?)
            .ok_or(TopologyError::CountOverflow)?;
    }
    Ok(total)
}

/// Decode a per-node choice rank into the removed-source subset. Choices
/// are ranked by subset size, then lexicographically over the sorted
/// in-source list, so rank 0 removes nothing.
fn unrank_removal(sources: &[usize], budget: usize, mut rank: u128) -> Vec<usize> {
    let d = sources.len();
    let mut size = 0usize;
    loop {
        let count = binomial(d, size).expect("per-node count fits u128");
        if rank < count {
            break;
        }
        rank -= count;
        size += 1;
        debug_assert!(size <= budget.min(d));
    }
    // lexicographic unranking of the `rank`-th size-`size` subset
    let mut subset = Vec::with_capacity(size);
    let mut candidate = 0usize;
    let mut remaining = size;
    while remaining > 0 {
        let tail = binomial(d - candidate - 1, remaining - 1).expect("fits u128");
        if rank < tail {
            subset.push(sources[candidate]);
            remaining -= 1;
        } else {
            rank -= tail;
        }
        candidate += 1;
    }
    subset
}

/// Streaming enumeration of the reduced-graph family of a scenario, in a
/// fixed order: kept nodes are processed ascending with the first node
/// most significant, and each node's removal choices are ranked by size
/// then lexicographically.
pub struct ReducedGraphIter<'a> {
    scenario: &'a Scenario,
    kept: Vec<usize>,
    base_edges: Vec<(usize, usize)>,
    in_sources: Vec<Vec<usize>>,
    radices: Vec<u128>,
    digits: Vec<u128>,
    done: bool,
}

impl<'a> ReducedGraphIter<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, TopologyError> {
        let kept = scenario.kept_nodes();
        let kept_set: BTreeSet<usize> = kept.iter().copied().collect();
        let base_edges: Vec<(usize, usize)> = scenario
            .graph
            .edges()
            .iter()
            .copied()
            .filter(|(s, d)| kept_set.contains(s) && kept_set.contains(d))
            .collect();
        let budget = scenario.removal_budget();
        let mut in_sources = Vec::with_capacity(kept.len());
        let mut radices = Vec::with_capacity(kept.len());
        for &v in &kept {
            let sources: Vec<usize> = base_edges
                .iter()
                .filter(|&&(_, d)| d == v)
                .map(|&(s, _)| s)
                .collect();
            radices.push(node_choice_count(sources.len(), budget)?);
            in_sources.push(sources);
        }
        let digits = vec![0u128; kept.len()];
        Ok(Self {
            scenario,
            kept,
            base_edges,
            in_sources,
            radices,
            digits,
            done: false,
        })
    }

    /// Exact size of the family, without materializing it.
    pub fn total_count(&self) -> Result<u128, TopologyError> {
        let mut total: u128 = 1;
        for &r in &self.radices {
            total = total.checked_mul(r).ok_or(TopologyError::CountOverflow)?;
        }
        Ok(total)
    }

    fn build_current(&self) -> ReducedGraph {
        let budget = self.scenario.removal_budget();
        let mut removed: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (idx, &v) in self.kept.iter().enumerate() {
            for src in unrank_removal(&self.in_sources[idx], budget, self.digits[idx]) {
                removed.insert((src, v));
            }
        }
        let kept_edges = self
            .base_edges
            .iter()
            .copied()
            .filter(|e| !removed.contains(e))
            .collect();
        ReducedGraph {
            kept_nodes: self.kept.clone(),
            kept_edges,
        }
    }
}

impl Iterator for ReducedGraphIter<'_> {
    type Item = ReducedGraph;

    fn next(&mut self) -> Option<ReducedGraph> {
        if self.done {
            return None;
        }
        let current = self.build_current();
        // odometer increment, last node least significant
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < self.radices[pos] {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(current)
    }
}

/// Materialize up to `cap` reduced graphs. The flag is true iff the full
/// family fit under the cap.
pub fn enumerate_reduced_graphs(
    scenario: &Scenario,
    cap: usize,
) -> Result<(Vec<ReducedGraph>, bool), TopologyError> {
    if cap == 0 {
        return Err(TopologyError::ZeroCap);
    }
    let iter = ReducedGraphIter::new(scenario)?;
    let total = iter.total_count();
    let graphs: Vec<ReducedGraph> = iter.take(cap).collect();
    let exhaustive = match total {
        Ok(t) => t <= cap as u128,
        Err(_) => false,
    };
    Ok((graphs, exhaustive))
}

/// Exact size of the reduced-graph family, by the per-node product of
/// binomial sums. Overflow is an error, never a wrap.
pub fn count_reduced_graphs(scenario: &Scenario) -> Result<u128, TopologyError> {
    ReducedGraphIter::new(scenario)?.total_count()
}
