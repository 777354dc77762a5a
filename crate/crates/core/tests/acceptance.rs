//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::Point2;
use needle_sim::fem::{self, BeamMesh, BeamProperties, EssentialBc, FoundationPatch, NodalLoad};
use needle_sim::ground_truth::GroundTruth;
use needle_sim::metrics::{self, ErrorReport};
use needle_sim::scenario::{insertion_script, Scenario};
use needle_sim::tissue::{force_density, tangent_stiffness, ForceMode};
use needle_sim::trace::run_script;
use needle_sim::tuning::{fit_parameters, simulate_case, FitCase, FitOptions, Parameters};
use needle_sim::{Boundary, ControlInput, OgdenLayer, Pose2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed < limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn beam_oracle() -> Outcome {
    let t = Instant::now();
    let props = BeamProperties::hollow_tube(YOUNGS, OUTER, INNER).unwrap();
    let ei = flexural_rigidity();
    let mesh = BeamMesh::new(0.0, 1e-3, 150).unwrap();
    let p = 1.0;
    let load = NodalLoad {
        node: 150,
        force: p,
        moment: 0.0,
    };
    let sys = fem::assemble(&mesh, &props, &[], &[EssentialBc::clamp(0, 0.0, 0.0)], &[load]).unwrap();
    let tip = fem::solve(&sys).unwrap().dofs[300];
    let rel = (tip / (p * LENGTH.powi(3) / (3.0 * ei)) - 1.0).abs();

    let q = 10.0;
    let mut errors = Vec::new();
    for n in [10usize, 20, 40] {
        let h = LENGTH / n as f64;
        let mesh = BeamMesh::new(0.0, h, n).unwrap();
        let mut loads: Vec<NodalLoad> = (0..=n)
            .map(|node| NodalLoad {
                node,
                ..NodalLoad::default()
            })
            .collect();
        for e in 0..n {
            loads[e].force += q * h / 2.0;
            loads[e].moment += q * h * h / 12.0;
            loads[e + 1].force += q * h / 2.0;
            loads[e + 1].moment -= q * h * h / 12.0;
        }
        let sys = fem::assemble(&mesh, &props, &[], &[EssentialBc::clamp(0, 0.0, 0.0)], &loads).unwrap();
        let dofs = fem::solve(&sys).unwrap().dofs;
        let worst = (0..n)
            .map(|e| {
                let x = (e as f64 + 0.5) * h;
                (fem::evaluate(&mesh, &dofs, x).unwrap().0 - cantilever_uniform(q, ei, LENGTH, x)).abs()
            })
            .fold(0.0, f64::max);
        errors.push(worst);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let detail = format!("tip rel err {rel:.1e} (<= 1e-9), uniform-load orders {orders:.2?}");
    if rel > 1e-9 || orders.iter().any(|o| (o - 4.0).abs() > 0.15) {
        return Err(detail);
    }
    within(t.elapsed(), Duration::from_secs(1), detail)
}

fn winkler_oracle() -> Outcome {
    let t = Instant::now();
    let props = BeamProperties::hollow_tube(YOUNGS, OUTER, INNER).unwrap();
    let ei = flexural_rigidity();
    let (k, p) = (6e5, 0.05);
    let mesh = BeamMesh::new(0.0, 1e-3, 150).unwrap();
    let patches: Vec<FoundationPatch> = (0..150)
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
    let sys = fem::assemble(&mesh, &props, &patches, &[], &[load]).unwrap();
    let dofs = fem::solve(&sys).unwrap().dofs;
    let peak = winkler_end_load(p, k, ei, 0.0);
    let worst = (0..=150)
        .map(|n| (dofs[2 * n] - winkler_end_load(p, k, ei, n as f64 * 1e-3)).abs())
        .fold(0.0, f64::max)
        / peak;
    let length = (4.0 * ei / k).powf(0.25);
    let detail = format!(
        "max pointwise err {:.3}% of peak (< 1%), characteristic length {:.1} mm",
        worst * 100.0,
        length * 1e3
    );
    if worst >= 0.01 {
        return Err(detail);
    }
    within(t.elapsed(), Duration::from_secs(1), detail)
}

fn constitutive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_unit = 0.0_f64;
    let mut min_k = f64::INFINITY;
    let mut reductions = 0;
    for _ in 0..20_000 {
        let alpha = rng.random_range(-3.0..=3.0);
        let mu = 10f64.powf(rng.random_range(2.0..=9.0));
        let k1 = tangent_stiffness(1.0, mu, alpha).unwrap();
        worst_unit = worst_unit.max((k1 - 3.0 * mu).abs() / (3.0 * mu));
        let lambda = rng.random_range(0.05..=1.0);
        let k = tangent_stiffness(lambda, mu, alpha).unwrap();
        if !(k > 0.0 && k.is_finite()) {
            return Err(format!("k({lambda}, {mu}, {alpha}) = {k}"));
        }
        min_k = min_k.min(k / mu);

        let mut layer = OgdenLayer::new("t", mu, alpha, Boundary::vertical(0.0));
        layer.gamma = rng.random_range(0.0..1.0);
        let u = rng.random_range(-0.03..0.03);
        let slope = rng.random_range(-1.0..1.0);
        let plain = force_density(u, slope, &layer, ForceMode::Approximate).unwrap();
        if force_density(u, 0.0, &layer, ForceMode::Full).unwrap() != plain {
            return Err(format!("slope 0 does not reduce at u={u}"));
        }
        layer.gamma = 0.0;
        if force_density(u, slope, &layer, ForceMode::Full).unwrap() != plain {
            return Err(format!("gamma 0 does not reduce at u={u}"));
        }
        reductions += 2;
    }
    let detail = format!(
        "max |k(1)/3mu - 1| = {worst_unit:.1e}, min k/mu = {min_k:.3}, {reductions} exact reductions"
    );
    if worst_unit > 1e-12 {
        return Err(detail);
    }
    Ok(detail)
}

const BEVEL: f64 = 0.085e-3;

fn mirror_symmetry() -> Outcome {
    let t = Instant::now();
    let (_, up, a) = insert(&gel_scenario(2e5, 1.0, BEVEL), 51);
    let (_, down, b) = insert(&gel_scenario(2e5, 1.0, -BEVEL), 51);
    let elapsed = t.elapsed();
    let (u, v) = (frame_c_dofs(&up), frame_c_dofs(&down));
    let worst = u.iter().step_by(2).zip(v.iter().step_by(2)).map(|(p, q)| (p + q).abs()).fold(0.0, f64::max);
    let tip = u[u.len() - 2];
    let detail = format!(
        "depth {:.1} mm, tip defl {:.3} mm, max |u(b)+u(-b)| = {worst:.1e} m",
        up.depth() * 1e3,
        tip * 1e3
    );
    if worst > 1e-9 || tip.abs() < 1e-5 || !(a.all_converged() && b.all_converged()) {
        return Err(detail);
    }
    within(elapsed, Duration::from_secs(5), detail)
}

fn straightness() -> Outcome {
    let (_, state, trace) = insert(&gel_scenario(2e5, 1.0, 0.0), 51);
    let worst = frame_c_dofs(&state).iter().step_by(2).map(|u| u.abs()).fold(0.0, f64::max);
    let detail = format!("max |u| = {worst:.1e} m after {:.0} mm", state.depth() * 1e3);
    if worst > 1e-9 || !trace.all_converged() {
        return Err(detail);
    }
    Ok(detail)
}

fn bookkeeping() -> Outcome {
    let mut steps = 0;
    for seed in 0..1000 {
        steps += bookkeeping_case(seed)?;
    }
    Ok(format!("1000 scripts, {steps} steps match the replay oracle"))
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let (ns, nt) = (rng.random_range(2..80), rng.random_range(2..80));
        let sim = random_curve(&mut rng, ns);
        let truth = random_curve(&mut rng, nt);
        let k = rng.random_range(2..120);
        let r = ErrorReport::evaluate("pair", &sim, &truth, Some(k)).map_err(|e| e.to_string())?;
        let (te, ipe, edp) = brute_metrics(&sim, &truth, k);
        worst = worst.max((r.tip_error - te).abs());
        for (a, b) in r.ipe.iter().zip(&ipe) {
            worst = worst.max((a - b).abs());
        }
        match (r.edp, edp) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs() / b.max(1.0)),
            (None, None) => {}
            other => return Err(format!("pair {i}: edp {other:?}")),
        }
        if r.ipe.len() != k {
            return Err(format!("pair {i}: {} samples, expected {k}", r.ipe.len()));
        }
    }
    let example = metrics::edp(0.5e-3, &[Point2::new(0.0, 0.0), Point2::new(0.1, 5e-3)]).unwrap_or(f64::NAN);
    let detail = format!("max deviation {worst:.1e} over 100 pairs, EDP(0.5 mm, 5 mm) = {example}%");
    if worst > 1e-12 || (example - 10.0).abs() > 1e-12 {
        return Err(detail);
    }
    Ok(detail)
}

fn tuning() -> Outcome {
    let t = Instant::now();
    let mut cases = Vec::new();
    for (heading, steps) in [(0.0_f64, 55), (10f64.to_radians(), 45)] {
        let mut s = Scenario::from_preset("ph2").unwrap();
        s.pose = Pose2::new(-0.151 * heading.cos(), -0.151 * heading.sin(), heading);
        s.script = insertion_script(1e-3, steps);
        let sim = s.simulator().unwrap();
        let mut state = s.initial_state(&sim);
        let trace = run_script(&sim, &mut state, &s.script).map_err(|e| e.to_string())?;
        let truth = GroundTruth::new("synthetic", trace.last().unwrap().in_tissue_points()).map_err(|e| e.to_string())?;
        cases.push(FitCase {
            scenario: s,
            ground_truth: truth,
        });
    }
    let target = Parameters::of(&cases[0].scenario);

    let mut lines = Vec::new();
    let mut ok = true;
    for factor in [1.5, 0.5] {
        let seed = Parameters {
            layers: target.layers.iter().map(|&(mu, alpha)| (mu * factor, alpha * factor)).collect(),
            bevel: target.bevel * factor,
        };
        let fit = fit_parameters(
            &cases,
            &FitOptions {
                initial: Some(seed),
                ..FitOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let mut ipe = 0.0;
        for case in &cases {
            ipe += simulate_case(case, &fit.parameters)?.mean_ipe;
        }
        ipe /= cases.len() as f64;
        ok &= ipe < 0.05e-3;
        lines.push(format!(
            "seed x{factor}: mean IPE {:.2e} mm, b {:.4} mm, {} evals",
            ipe * 1e3,
            fit.parameters.bevel * 1e3,
            fit.evaluations
        ));
    }
    let detail = lines.join("; ");
    if !ok {
        return Err(detail);
    }
    within(t.elapsed(), Duration::from_secs(600), detail)
}

fn performance() -> Outcome {
    let s = Scenario::from_preset("ph2").unwrap();
    let sim = s.simulator().unwrap();
    let mut state = s.initial_state(&sim);
    run_script(&sim, &mut state, &insertion_script(1e-3, 61)).map_err(|e| e.to_string())?;
    let steps = 300;
    let step = [ControlInput::advance(0.002e-3)];
    let t = Instant::now();
    for _ in 0..steps {
        sim.step(&mut state, &step).map_err(|e| e.to_string())?;
    }
    let hz = f64::from(steps) / t.elapsed().as_secs_f64();
    let detail = format!(
        "{hz:.0} steps/s at {:.1} mm inserted, 150 mm needle, h = 1 mm (>= 50)",
        state.depth() * 1e3
    );
    if hz < 50.0 {
        return Err(detail);
    }
    Ok(detail)
}

fn determinism() -> Outcome {
    let mut s = Scenario::from_preset("ph1").unwrap();
    s.script = insertion_script(1e-3, 30);
    s.script.push(vec![ControlInput::base(0.4e-3, 0.01), ControlInput::advance(2.5e-3)]);
    s.script.extend(insertion_script(0.75e-3, 12));
    s.script.push(vec![ControlInput::advance(-3e-3)]);
    let run = || {
        let sim = s.simulator().unwrap();
        let mut state = s.initial_state(&sim);
        run_script(&sim, &mut state, &s.script).map(|t| t.to_ndjson())
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    let detail = format!("{} records, {} bytes", a.lines().count(), a.len());
    if a.as_bytes() != b.as_bytes() {
        return Err(detail);
    }
    Ok(detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("beam oracle", beam_oracle),
        ("winkler oracle", winkler_oracle),
        ("constitutive identities", constitutive),
        ("bevel mirror symmetry", mirror_symmetry),
        ("zero-bevel straightness", straightness),
        ("constraint bookkeeping", bookkeeping),
        ("metrics oracle", metrics_oracle),
        ("tuning self-consistency", tuning),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
