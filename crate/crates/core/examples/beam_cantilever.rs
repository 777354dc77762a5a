//! Cantilevered needle under a tip load and a uniform load, compared with
//! the closed-form beam solutions while the mesh is refined.

use needle_sim::fem::{self, BeamMesh, BeamProperties, EssentialBc, NodalLoad};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let props = BeamProperties::hollow_tube(80e9, 1.27e-3, 1.0e-3)?;
    let ei = props.flexural_rigidity();
    let (l, p, q) = (0.150, 0.5, 20.0);
    println!("EI = {ei:.4e} N m^2");
    println!("{:>6} {:>14} {:>14} {:>14}", "elems", "tip (mm)", "tip rel err", "mid-elem err");
    for n in [5, 10, 20, 40, 150] {
        let h = l / n as f64;
        let mesh = BeamMesh::new(0.0, h, n)?;
        let clamp = [EssentialBc::clamp(0, 0.0, 0.0)];

        let tip_load = [NodalLoad {
            node: n,
            force: p,
            moment: 0.0,
        }];
        let tip = fem::solve(&fem::assemble(&mesh, &props, &[], &clamp, &tip_load)?)?.dofs[2 * n];
        let exact_tip = p * l.powi(3) / (3.0 * ei);

        // consistent nodal loads of a uniform line load
        let mut loads: Vec<NodalLoad> = (0..=n)
            .map(|node| NodalLoad {
                node,
                ..Default::default()
            })
            .collect();
        for e in 0..n {
            loads[e].force += q * h / 2.0;
            loads[e].moment += q * h * h / 12.0;
            loads[e + 1].force += q * h / 2.0;
            loads[e + 1].moment -= q * h * h / 12.0;
        }
        let dofs = fem::solve(&fem::assemble(&mesh, &props, &[], &clamp, &loads)?)?.dofs;
        let mut worst = 0.0_f64;
        for e in 0..n {
            let x = (e as f64 + 0.5) * h;
            let exact = q * x * x * (6.0 * l * l - 4.0 * l * x + x * x) / (24.0 * ei);
            worst = worst.max((fem::evaluate(&mesh, &dofs, x)?.0 - exact).abs());
        }
        println!(
            "{n:>6} {:>14.6} {:>14.2e} {:>14.2e}",
            tip * 1e3,
            (tip / exact_tip - 1.0).abs(),
            worst
        );
    }
    Ok(())
}
