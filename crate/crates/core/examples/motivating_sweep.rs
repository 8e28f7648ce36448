//! Shifts both players' payoffs at one cell of a 2x2 game over a grid and
//! shows that every solver does better on some modified game than on the
//! original. Writes one CSV per solver.
//!
//! cargo run --release --example motivating_sweep -- [out_dir]

use std::path::PathBuf;

use nashmod::harness::{asymmetric_pennies, cmd_sweep, ExperimentConfig};
use nashmod::solvers::SolverKind;

fn main() -> nashmod::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nashmod_sweep"));
    let game = asymmetric_pennies();
    for solver in SolverKind::ALL {
        let config = ExperimentConfig {
            solver,
            out_dir: out_dir.clone(),
            ..ExperimentConfig::default()
        };
        let s = cmd_sweep(&config, "asymmetric_pennies", &game)?;
        println!(
            "{:10} unmodified {:.4}  best {:.4} at ({:+.1}, {:+.1})",
            s.solver, s.unmodified_nash_conv, s.min_nash_conv, s.argmin_delta1, s.argmin_delta2
        );
    }
    println!("grids written to {}", out_dir.display());
    Ok(())
}
