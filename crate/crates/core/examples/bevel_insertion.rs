//! Straight 60 mm insertion into a preset phantom; the bevel alone bends
//! the needle. Prints the tip every 5 mm.
//!
//! `cargo run --release --example bevel_insertion -- [preset]`

use needle_sim::scenario::{insertion_script, Scenario};
use needle_sim::trace::run_script;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "ph2".into());
    let scenario = Scenario::from_preset(&name)?;
    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let trace = run_script(&sim, &mut state, &insertion_script(1e-3, 61))?;

    println!("{:>10} {:>10} {:>10} {:>9} {:>6}", "depth mm", "tip x mm", "tip y mm", "head deg", "iters");
    for r in trace.records.iter().filter(|r| r.inserted && r.step % 5 == 1) {
        println!(
            "{:>10.1} {:>10.3} {:>10.4} {:>9.3} {:>6}",
            r.depth * 1e3,
            r.tip.x * 1e3,
            r.tip.y * 1e3,
            r.tip.heading.to_degrees(),
            r.report.iterations
        );
    }
    println!(
        "{} constraint points, all steps converged: {}",
        state.constraints.len(),
        trace.all_converged()
    );
    Ok(())
}
