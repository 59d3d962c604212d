//! Learning without network-wide consensus capability: two disconnected
//! triangles, each collectively identifiable, still learn the true state
//! even though the network as a whole could never agree on arbitrary
//! inputs.

use std::collections::BTreeMap;

use byzlearn::observation::{LikelihoodModel, StateSpace};
use byzlearn::protocol::World;
use byzlearn::topology::{DirectedGraph, Scenario};

fn main() {
    // triangle {0,1,2} and triangle {3,4,5}, no cross links
    let graph = DirectedGraph::new(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
    let scenario = Scenario::new(graph, [], 0, 2).unwrap();
    let states = StateSpace::new(["s0", "s1"], 0).unwrap();
    // only agents 0 and 3 can sense anything; their neighbors free-ride
    let informative = vec![vec![0.7, 0.3], vec![0.3, 0.7]];
    let blind = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let model = LikelihoodModel::new(
        2,
        vec![
            informative.clone(),
            blind.clone(),
            blind.clone(),
            informative,
            blind.clone(),
            blind,
        ],
    )
    .unwrap();
    let mut world = World::new(scenario, states, model, BTreeMap::new(), 7, 0).unwrap();

    println!("round   triangle 0,1,2          triangle 3,4,5   (mu(s0) each)");
    for t in 1..=600 {
        let record = world.step_round().unwrap();
        if t % 100 == 0 || t == 1 {
            let mu: Vec<String> = record
                .honest
                .iter()
                .map(|r| format!("{:.3}", r.belief[0].exp()))
                .collect();
            println!(
                "{t:>5}   {} {} {}        {} {} {}",
                mu[0], mu[1], mu[2], mu[3], mu[4], mu[5]
            );
        }
    }
    println!("\nboth components learn s0; the blind agents learn it from their sources.");
}
