//! Long needle resting on linear springs with a force at its free end,
//! against the semi-infinite beam-on-elastic-foundation solution.

use needle_sim::fem::{self, BeamMesh, BeamProperties, FoundationPatch, NodalLoad};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let props = BeamProperties::hollow_tube(80e9, 1.27e-3, 1.0e-3)?;
    let ei = props.flexural_rigidity();
    let k = 3.0 * 2e5; // unit-stretch stiffness of a 200 kPa gel
    let p = 0.05;
    let beta = (k / (4.0 * ei)).powf(0.25);
    println!("characteristic length {:.2} mm", 1e3 / beta);

    let mesh = BeamMesh::new(0.0, 1e-3, 150)?;
    let springs: Vec<FoundationPatch> = (0..150)
        .map(|element| FoundationPatch {
            element,
            stiffness: k,
            reference: 0.0,
        })
        .collect();
    let load = NodalLoad {
        node: 0,
        force: p,
        moment: 0.0,
    };
    let dofs = fem::solve(&fem::assemble(&mesh, &props, &springs, &[], &[load])?)?.dofs;

    println!("{:>8} {:>12} {:>12}", "x (mm)", "FEM (um)", "exact (um)");
    for node in (0..=60).step_by(5) {
        let x = node as f64 * 1e-3;
        let exact = 2.0 * p * beta / k * (-beta * x).exp() * (beta * x).cos();
        println!("{:>8.0} {:>12.4} {:>12.4}", x * 1e3, dofs[2 * node] * 1e6, exact * 1e6);
    }
    Ok(())
}
