use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use needle_sim::ground_truth::GroundTruth;
use needle_sim::metrics::{report_csv, ErrorReport};
use needle_sim::plot::{render_svg, PlotOptions};
use needle_sim::scenario::{load_script, Scenario};
use needle_sim::trace::{SimTrace, TraceRecord};
use needle_sim::tuning::{fit_parameters, load_manifest, simulate_case};

use crate::args::{EvalArgs, RunArgs, TuneArgs};

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

/// `.toml` paths and existing files are loaded, anything else is a preset name.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if spec.ends_with(".toml") || path.is_file() {
        Scenario::load(path).with_context(|| format!("loading scenario {spec}"))
    } else {
        Scenario::from_preset(spec).with_context(|| format!("loading scenario {spec}"))
    }
}

fn prepare(scenario: &str, script: Option<&Path>) -> Result<Scenario> {
    let mut s = load_scenario(scenario)?;
    if let Some(path) = script {
        if !s.script.is_empty() {
            info!("{}: embedded script replaced by {}", s.name, path.display());
        }
        s.script = load_script(path).with_context(|| format!("loading script {}", path.display()))?;
    }
    Ok(s)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Runs every step; on a simulation error the steps so far are still returned.
fn simulate(scenario: &Scenario) -> Result<(SimTrace, TraceRecord, Option<anyhow::Error>)> {
    let sim = scenario.simulator()?;
    let mut state = scenario.initial_state(&sim);
    let mut trace = SimTrace::default();
    for (i, inputs) in scenario.script.iter().enumerate() {
        if let Err(e) = sim.step(&mut state, inputs) {
            let err = anyhow::Error::new(e).context(format!("script step {}", i + 1));
            return Ok((trace, TraceRecord::capture(&state, &[]), Some(err)));
        }
        trace.records.push(TraceRecord::capture(&state, inputs));
    }
    let last = TraceRecord::capture(&state, scenario.script.last().map_or(&[][..], |v| v));
    Ok((trace, last, None))
}

pub fn run(args: &RunArgs) -> Result<Outcome> {
    let mut scenario = prepare(&args.scenario, args.script.as_deref())?;
    if let Some(n) = args.max_iterations {
        scenario.solver.max_iterations = n;
    }
    let (trace, last, failure) = simulate(&scenario)?;

    write_output(args.out.as_deref(), &trace.to_ndjson())?;
    if let Some(path) = &args.plot {
        let svg = render_svg(&last, &scenario.layers, &PlotOptions::default());
        fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let flagged = trace.records.iter().filter(|r| !r.report.converged).count();
    eprintln!(
        "{}: {} steps, depth {:.3} mm, tip ({:.3}, {:.3}) mm, {} not converged",
        scenario.name,
        trace.records.len(),
        last.depth * 1e3,
        last.tip.x * 1e3,
        last.tip.y * 1e3,
        flagged
    );
    Ok(if flagged == 0 {
        Outcome::Converged
    } else {
        Outcome::NotConverged
    })
}

pub fn eval(args: &EvalArgs) -> Result<Outcome> {
    let n = args.gt.len();
    let sources = if !args.trace.is_empty() {
        args.trace.len()
    } else {
        args.scenario.len()
    };
    if sources == 0 {
        bail!("eval needs --trace or --scenario");
    }
    if sources != n && !(args.trace.is_empty() && sources == 1) {
        bail!("{n} --gt files but {sources} simulated shapes");
    }

    let mut reports = Vec::with_capacity(n);
    let mut flagged = false;
    for (i, gt_path) in args.gt.iter().enumerate() {
        let truth = GroundTruth::load(gt_path)?;
        let record = if let Some(path) = args.trace.get(i) {
            let trace = SimTrace::load(path).with_context(|| format!("loading trace {}", path.display()))?;
            trace
                .last()
                .cloned()
                .with_context(|| format!("trace {} is empty", path.display()))?
        } else {
            let spec = args.scenario.get(i).unwrap_or(&args.scenario[0]);
            let scenario = prepare(spec, args.script.as_deref())?;
            let (trace, last, failure) = simulate(&scenario)?;
            if let Some(e) = failure {
                return Err(e);
            }
            flagged |= !trace.all_converged();
            last
        };
        flagged |= !record.report.converged;
        let simulated = record.in_tissue_points();
        if simulated.len() < 2 {
            bail!("simulated needle for {} is not in tissue", gt_path.display());
        }
        let report = ErrorReport::evaluate(&truth.label, &simulated, &truth.points, args.samples)?;
        if report.edp.is_none() {
            warn!("{}: measured shape has no lateral deflection, EDP undefined", truth.label);
        }
        reports.push(report);
    }
    write_output(args.out.as_deref(), &report_csv(&reports)?)?;
    Ok(if flagged {
        Outcome::NotConverged
    } else {
        Outcome::Converged
    })
}

pub fn tune(args: &TuneArgs) -> Result<Outcome> {
    let (cases, mut options) = load_manifest(&args.manifest)?;
    if let Some(m) = args.max_evaluations {
        options.max_evaluations = m;
    }
    if let Some(r) = args.restarts {
        options.restarts = r;
    }
    let fit = fit_parameters(&cases, &options)?;

    for case in &cases {
        match simulate_case(case, &fit.parameters) {
            Ok(r) => eprintln!(
                "{}: TE {:.4} mm, mean IPE {:.4} mm",
                case.ground_truth.label,
                r.tip_error * 1e3,
                r.mean_ipe * 1e3
            ),
            Err(e) => eprintln!("{}: {e}", case.ground_truth.label),
        }
    }
    eprintln!(
        "objective {:.4e} m after {} evaluations ({})",
        fit.objective,
        fit.evaluations,
        if fit.converged { "converged" } else { "evaluation budget reached" }
    );

    let mut fitted = fit.parameters.apply(&cases[0].scenario);
    fitted.script.clear();
    let header = format!(
        "# fitted to {} case(s) from {}\n# objective {:e} m, {} evaluations\n",
        cases.len(),
        args.manifest.display(),
        fit.objective,
        fit.evaluations
    );
    write_output(args.out.as_deref(), &(header + &fitted.to_toml()))?;
    Ok(if fit.converged {
        Outcome::Converged
    } else {
        Outcome::NotConverged
    })
}
