//! Post-hoc analysis of a recorded run: extract the equivalent
//! row-stochastic matrices, form window products, find per-row source
//! components, measure the empirical dominance constant, reconstruct the
//! belief log-ratios from raw signal likelihoods, and track the centered
//! large-numbers statistic.

use std::collections::BTreeMap;

use byzlearn::analysis::{
    empirical_beta, extract_transition_matrix, phi_product, psi_reconstruction_residual,
    q_statistic, source_window_check,
};
use byzlearn::observation::{h_value, LikelihoodModel, StateSpace};
use byzlearn::protocol::{AdversaryStrategy, World};
use byzlearn::topology::{enumerate_reduced_graphs, DirectedGraph, Scenario};

fn main() {
    let graph = DirectedGraph::complete(5).unwrap();
    let scenario = Scenario::new(graph, [4], 1, 2).unwrap();
    let states = StateSpace::new(["s0", "s1"], 0).unwrap();
    let model =
        LikelihoodModel::uniform_agents(5, 2, vec![vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
    let strategies = BTreeMap::from([(
        4usize,
        AdversaryStrategy::SplitEquivocate {
            theta_bad: 1,
            magnitude: 6.0,
        },
    )]);
    let mut world =
        World::new(scenario.clone(), states, model.clone(), strategies, 321, 0).unwrap();

    let horizon = 200;
    let mut mats = Vec::new();
    let mut l_ratios = Vec::new();
    let mut psi = Vec::new();
    for _ in 0..horizon {
        let record = world.step_round().unwrap();
        l_ratios.push(
            record
                .honest
                .iter()
                .map(|r| {
                    model.log_likelihood(r.agent, r.signal, 1)
                        - model.log_likelihood(r.agent, r.signal, 0)
                })
                .collect::<Vec<f64>>(),
        );
        psi.push(
            record
                .honest
                .iter()
                .map(|r| r.belief[1] - r.belief[0])
                .collect::<Vec<f64>>(),
        );
        mats.push(extract_transition_matrix(&record).unwrap());
    }

    let worst_residual = mats.iter().map(|m| m.residual).fold(0.0, f64::max);
    let worst_row = mats
        .iter()
        .map(|m| m.max_row_sum_error())
        .fold(0.0, f64::max);
    println!(
        "extracted {horizon} matrices over honest agents {:?}",
        mats[0].agents
    );
    println!("  worst aggregation-reconstruction residual: {worst_residual:.2e}");
    println!("  worst row-sum error: {worst_row:.2e}");

    println!("\nround-1 matrix (uniform beliefs decompose to the flat average):");
    for row in &mats[0].entries {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("  [{}]", cells.join(", "));
    }

    let (graphs, _) = enumerate_reduced_graphs(&scenario, 10_000).unwrap();
    let beta = empirical_beta(&mats[0], &graphs).unwrap();
    println!(
        "\nempirical dominance over {} reduced graphs: beta = {:.4} (graph #{})",
        graphs.len(),
        beta.beta,
        beta.graph_index
    );

    let phi = phi_product(&mats, horizon, horizon - 49).unwrap();
    let rows = source_window_check(&phi, &graphs, 1e-4).unwrap();
    println!("\n50-round window product ending at t = {horizon}:");
    for row in rows {
        println!(
            "  agent {} keeps mass >= {:.4} on source component {:?} (clears 1e-4: {})",
            row.agent, row.min_entry, row.component.members, row.clears_threshold
        );
    }

    let residual = psi_reconstruction_residual(&l_ratios, &mats, &psi).unwrap();
    println!("\nlog-ratio reconstruction from raw signals: max residual {residual:.2e}");

    let h: Vec<f64> = mats[0]
        .agents
        .iter()
        .map(|&agent| h_value(&model, agent, 1, 0))
        .collect();
    let q = q_statistic(&l_ratios, &h, &mats, &[50, 100, 200]).unwrap();
    println!("\ncentered statistic per agent:");
    for (t, values) in q {
        let cells: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
        println!("  q({t:>3}) = [{}]", cells.join(", "));
    }
}
