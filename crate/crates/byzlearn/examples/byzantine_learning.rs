//! Run the learning protocol with one equivocating Byzantine agent and
//! watch the honest agents concentrate on the true state anyway.

use std::collections::BTreeMap;

use byzlearn::observation::{LikelihoodModel, StateSpace};
use byzlearn::protocol::{AdversaryStrategy, World};
use byzlearn::topology::{DirectedGraph, Scenario};

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
            magnitude: 8.0,
        },
    )]);
    let mut world = World::new(scenario, states, model, strategies, 2024, 0).unwrap();

    println!("agent 4 equivocates: pushes s1 to even targets, s0 to odd targets");
    println!("round   mu(s0) per honest agent");
    for t in 1..=400 {
        let record = world.step_round().unwrap();
        if t % 50 == 0 || t == 1 {
            let line: Vec<String> = record
                .honest
                .iter()
                .map(|r| format!("{:.4}", r.belief[0].exp()))
                .collect();
            println!("{t:>5}   {}", line.join("  "));
        }
    }
    println!("\nall honest agents concentrate on the true state s0.");
}
