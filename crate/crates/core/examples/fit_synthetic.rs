//! Recovers tissue parameters from a synthetic measurement: simulate with
//! known parameters, start the fit from a perturbed guess, compare.
//!
//! `cargo run --release --example fit_synthetic`

use needle_sim::ground_truth::GroundTruth;
use needle_sim::scenario::Scenario;
use needle_sim::trace::run_script;
use needle_sim::tuning::{fit_parameters, simulate_case, FitCase, FitOptions, Parameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/gel.toml"))?;
    let truth_params = Parameters::of(&scenario);
    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let trace = run_script(&sim, &mut state, &scenario.script)?;
    let measured = GroundTruth::new("synthetic", trace.last().ok_or("empty script")?.in_tissue_points())?;
    let cases = [FitCase {
        scenario,
        ground_truth: measured,
    }];

    let guess = Parameters {
        layers: truth_params.layers.iter().map(|&(mu, a)| (mu * 1.5, a * 0.5)).collect(),
        bevel: truth_params.bevel * 1.4,
    };
    let fit = fit_parameters(
        &cases,
        &FitOptions {
            initial: Some(guess.clone()),
            ..FitOptions::default()
        },
    )?;
    let report = simulate_case(&cases[0], &fit.parameters)?;
    for (name, p) in [("true", &truth_params), ("guess", &guess), ("fitted", &fit.parameters)] {
        let (mu, alpha) = p.layers[0];
        println!("{name:>7}: mu {:>10.1} Pa, alpha {alpha:>7.4}, b {:.4} mm", mu, p.bevel * 1e3);
    }
    println!(
        "{} evaluations, objective {:.3e} m, mean IPE {:.2e} mm",
        fit.evaluations,
        fit.objective,
        report.mean_ipe * 1e3
    );
    Ok(())
}
