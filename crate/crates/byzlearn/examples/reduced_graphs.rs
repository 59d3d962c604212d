//! Enumerate the reduced-graph family of a scenario.
//!
//! A reduced graph deletes the faulty agents and up to m*f additional
//! incoming links per surviving agent; the family captures every possible
//! effective information flow after Tverberg trimming.

use byzlearn::topology::{
    check_reachability_condition, count_reduced_graphs, enumerate_reduced_graphs, DirectedGraph,
    Scenario,
};

fn main() {
    let graph = DirectedGraph::complete(5).unwrap();
    let scenario = Scenario::new(graph, [4], 1, 2).unwrap();
    println!("complete digraph on 5 agents, faulty set {{4}}, f = 1, m = 2 states");
    println!("removal budget per agent: {}", scenario.removal_budget());

    let count = count_reduced_graphs(&scenario).unwrap();
    println!("reduced graphs in the family: {count}");

    let (graphs, exhaustive) = enumerate_reduced_graphs(&scenario, 10_000).unwrap();
    println!("materialized {} (exhaustive: {exhaustive})", graphs.len());

    // fewest surviving links across the family
    let sparsest = graphs.iter().min_by_key(|h| h.kept_edges().len()).unwrap();
    println!(
        "sparsest member keeps {} of {} base links",
        sparsest.kept_edges().len(),
        graphs[0].kept_edges().len(),
    );

    for (label, h) in [("densest", &graphs[0]), ("sparsest", sparsest)] {
        let sources = h.source_components();
        println!(
            "{label}: source components {:?}, reachability condition: {}",
            sources
                .iter()
                .map(|c| c.members.clone())
                .collect::<Vec<_>>(),
            check_reachability_condition(h),
        );
    }
}
