//! Finite-difference gradient checks of every layer and the PPO loss.
//!
//! cargo run --release --example grad_check

fn main() -> nashmod::Result<()> {
    for (name, report) in nashmod::harness::grad_check_suite(0)? {
        println!(
            "{name:26} max rel error {:.2e}  ({} entries, worst {}[{}])",
            report.max_rel_error, report.entries_checked, report.worst.0, report.worst.1
        );
    }
    Ok(())
}
