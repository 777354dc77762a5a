//! Tangent stiffness of the fitted tissue parameter sets as the tissue is
//! compressed, plus the friction factor of the full force law.

use needle_sim::presets::TABLE;
use needle_sim::tissue::{friction_factor, tangent_stiffness};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stretches = [1.0, 0.9, 0.75, 0.5, 0.25];
    print!("{:<10}{:>6}", "set", "layer");
    for l in stretches {
        print!("{:>14}", format!("k({l})"));
    }
    println!();
    for set in &TABLE {
        for (i, &(mu, alpha)) in set.layers.iter().enumerate() {
            print!("{:<10}{:>6}", set.label, i + 1);
            for l in stretches {
                print!("{:>14.4e}", tangent_stiffness(l, mu, alpha)?);
            }
            println!();
        }
    }
    println!();
    for gamma in [0.0, 0.3, 0.6] {
        let row: Vec<String> = [0.0, 0.1, 0.5, 1.0]
            .iter()
            .map(|&s| format!("{:.4}", friction_factor(gamma, s)))
            .collect();
        println!("friction factor gamma={gamma}: slopes 0, 0.1, 0.5, 1 -> {}", row.join(", "));
    }
    Ok(())
}
