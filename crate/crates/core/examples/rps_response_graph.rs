//! The alpha-rank response graph of rock-paper-scissors and its stationary
//! distribution.
//!
//! cargo run --example rps_response_graph

use nashmod::game::rock_paper_scissors;
use nashmod::response_graph::{alpha_rank, build_response_graph};

const NAMES: [&str; 3] = ["R", "P", "S"];

fn label(joint: usize) -> String {
    format!("({},{})", NAMES[joint / 3], NAMES[joint % 3])
}

fn main() -> nashmod::Result<()> {
    let game = rock_paper_scissors();
    for (alpha, m) in [(1.0, 5.0), (100.0, 50.0)] {
        let graph = build_response_graph(&game, alpha, m)?;
        println!("alpha = {alpha}, m = {m}");
        for from in 0..graph.num_nodes() {
            let edges: Vec<String> = (0..graph.num_nodes())
                .filter(|&to| to != from && graph.entry(from, to) > 0.0)
                .map(|to| format!("{} {:.4}", label(to), graph.entry(from, to)))
                .collect();
            println!("  {} stay {:.4} -> {}", label(from), graph.entry(from, from), edges.join(", "));
        }
        let (profile, joint) = alpha_rank(&game, alpha, m)?;
        println!("  stationary {:.4?}", joint.probs);
        println!("  marginals  {:.4?} / {:.4?}\n", profile.per_player[0], profile.per_player[1]);
    }
    let expected = 0.25 * (1.0 - (-1.0f64).exp()) / (1.0 - (-5.0f64).exp());
    println!("(R,R) -> (P,R) by hand: {expected:.5}");
    Ok(())
}
