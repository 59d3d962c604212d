//! Compare Byzantine strategies: how much do different attacks slow the
//! honest agents down?

use std::collections::BTreeMap;

use byzlearn::observation::{LikelihoodModel, StateSpace};
use byzlearn::protocol::{AdversaryStrategy, World};
use byzlearn::topology::{DirectedGraph, Scenario};

fn run(strategy: AdversaryStrategy, label: &str) {
    let graph = DirectedGraph::complete(5).unwrap();
    let scenario = Scenario::new(graph, [4], 1, 2).unwrap();
    let states = StateSpace::new(["s0", "s1"], 0).unwrap();
    let model =
        LikelihoodModel::uniform_agents(5, 2, vec![vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
    let strategies = BTreeMap::from([(4usize, strategy)]);
    let mut world = World::new(scenario, states, model, strategies, 99, 0).unwrap();

    let mut first_above = None;
    let mut last = Vec::new();
    for t in 1..=300 {
        let record = world.step_round().unwrap();
        let min_mu = record
            .honest
            .iter()
            .map(|r| r.belief[0].exp())
            .fold(f64::INFINITY, f64::min);
        if first_above.is_none() && min_mu >= 0.99 {
            first_above = Some(t);
        }
        if t == 300 {
            last = record.honest.iter().map(|r| r.belief[0].exp()).collect();
        }
    }
    let reached = first_above
        .map(|t| format!("round {t}"))
        .unwrap_or_else(|| "not within 300 rounds".into());
    let final_mu: Vec<String> = last.iter().map(|m| format!("{m:.4}")).collect();
    println!(
        "{label:<18} all above 0.99 by {reached:<24} final {:?}",
        final_mu
    );
}

fn main() {
    println!("five agents, complete digraph, agent 4 faulty, true state s0\n");
    run(AdversaryStrategy::Conformant, "conformant");
    run(
        AdversaryStrategy::ConstantPush {
            theta_bad: 1,
            magnitude: 6.0,
        },
        "constant_push",
    );
    run(
        AdversaryStrategy::RandomNoise { scale: 5.0 },
        "random_noise",
    );
    run(
        AdversaryStrategy::SplitEquivocate {
            theta_bad: 1,
            magnitude: 6.0,
        },
        "split_equivocate",
    );
}
