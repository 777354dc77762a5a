//! Steering with lateral inputs: the base is moved sideways during
//! insertion, then a node outside the tissue is held like a needle guide.

use needle_sim::scenario::Scenario;
use needle_sim::{ControlInput, VInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::from_preset("ph1")?;
    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let advance = ControlInput::advance(1e-3);

    for _ in 0..20 {
        sim.step(&mut state, &[advance])?;
    }
    println!("straight 20 mm: tip y = {:.3} mm", state.tip_pose().y * 1e3);

    for i in 1..=10 {
        let offset = -0.2e-3 * f64::from(i);
        sim.step(&mut state, &[ControlInput::base(offset, 0.0), advance])?;
        println!(
            "base {:>5.1} mm -> depth {:>4.1} mm, tip y {:>7.3} mm",
            offset * 1e3,
            state.depth() * 1e3,
            state.tip_pose().y * 1e3
        );
    }

    // hold node 120 (30 mm behind the tip) at its current lateral position
    let y = state.polyline[120].y;
    let guide = ControlInput::V(VInput::Node {
        index: 120,
        deflection: Some(y),
        slope: None,
    });
    sim.step(&mut state, &[guide])?;
    for _ in 0..10 {
        sim.step(&mut state, &[advance])?;
    }
    println!(
        "with guide at node 120: depth {:.1} mm, tip y {:.3} mm, converged {}",
        state.depth() * 1e3,
        state.tip_pose().y * 1e3,
        state.report.converged
    );
    Ok(())
}
