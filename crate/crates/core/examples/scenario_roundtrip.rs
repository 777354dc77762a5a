//! Loads a scenario file, prints it back in canonical form and checks that
//! the canonical text parses to the same scenario.
//!
//! `cargo run --example scenario_roundtrip -- [path-or-preset]`

use needle_sim::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = std::env::args().nth(1);
    let scenario = match arg.as_deref() {
        None => Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenarios/gel.toml"))?,
        Some(a) if a.ends_with(".toml") => Scenario::load(a)?,
        Some(name) => Scenario::from_preset(name)?,
    };
    let text = scenario.to_toml();
    print!("{text}");
    let back = Scenario::from_toml(&text)?;
    assert_eq!(back, scenario);
    eprintln!(
        "{}: {} layers, {} script steps, round trip exact",
        scenario.name,
        scenario.layers.len(),
        scenario.script.len()
    );
    Ok(())
}
