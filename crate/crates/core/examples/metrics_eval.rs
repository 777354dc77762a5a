//! Compares a simulated insertion with a measured shape and prints tip
//! error, in-plane error statistics and the error-to-deflection percentage.

use needle_sim::ground_truth::GroundTruth;
use needle_sim::metrics::{report_csv, summarize, ErrorReport};
use needle_sim::scenario::Scenario;
use needle_sim::trace::run_script;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let scenario = Scenario::load(format!("{data}/scenarios/gel.toml"))?;
    let truth = GroundTruth::load(format!("{data}/ground_truth/gel_40mm.csv"))?;

    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let trace = run_script(&sim, &mut state, &scenario.script)?;
    let simulated = trace.last().ok_or("empty script")?.in_tissue_points();

    let report = ErrorReport::evaluate(&scenario.name, &simulated, &truth.points, None)?;
    print!("{}", report_csv(std::slice::from_ref(&report))?);
    let summary = summarize(&[report])?;
    println!(
        "TE {:.3} mm, median IPE {:.3} mm, EDP {}",
        summary.tip_error * 1e3,
        summary.median_pooled * 1e3,
        summary.edp.map_or("undefined".into(), |e| format!("{e:.1} %"))
    );
    Ok(())
}
