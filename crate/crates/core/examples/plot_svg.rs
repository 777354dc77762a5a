//! Renders the final state of a scenario run as an SVG drawing.
//!
//! `cargo run --example plot_svg -- [scenario.toml] [out.svg]`

use needle_sim::plot::{render_svg, PlotOptions};
use needle_sim::scenario::Scenario;
use needle_sim::trace::run_script;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/ph2_steer.toml").into());
    let out = args.next().unwrap_or_else(|| "needle.svg".into());

    let scenario = Scenario::load(&path)?;
    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let trace = run_script(&sim, &mut state, &scenario.script)?;
    let svg = render_svg(trace.last().ok_or("empty script")?, &scenario.layers, &PlotOptions::default());
    std::fs::write(&out, svg)?;
    println!("wrote {out} ({} steps)", trace.records.len());
    Ok(())
}
