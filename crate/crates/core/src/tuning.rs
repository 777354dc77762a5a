//! Fitting tissue parameters and the bevel offset to measured needle shapes.
//!
//! The search runs Nelder-Mead over `log10 μ` and `α` of every layer plus the
//! bevel offset in millimetres, minimising the mean in-plane error over all
//! cases. Points outside the bounds are projected onto the box before the
//! simulation runs, so every reported parameter set lies inside the bounds.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ground_truth::{GroundTruth, GroundTruthError};
use crate::metrics::ErrorReport;
use crate::scenario::{Scenario, ScenarioError};
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no (scenario, ground truth) pairs to fit")]
    NoCases,
    #[error("case {case} has {got} layers, case 0 has {expected}")]
    LayerMismatch { case: usize, expected: usize, got: usize },
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("initial {name} = {value} lies outside [{lo}, {hi}]")]
    OutOfBounds { name: String, value: f64, lo: f64, hi: f64 },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    GroundTruth(#[from] GroundTruthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Shear modulus range (Pa).
    pub mu: (f64, f64),
    pub alpha: (f64, f64),
    /// Bevel offset range (m).
    pub bevel: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            mu: (1e2, 1e9),
            alpha: (-3.0, 3.0),
            bevel: (0.0, 0.5e-3),
        }
    }
}

impl Bounds {
    fn validate(&self) -> Result<(), FitError> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !(ok(self.mu) && self.mu.0 > 0.0) {
            return Err(FitError::Bounds(format!("mu {:?}", self.mu)));
        }
        if !ok(self.alpha) {
            return Err(FitError::Bounds(format!("alpha {:?}", self.alpha)));
        }
        if !(ok(self.bevel) && self.bevel.0 >= 0.0) {
            return Err(FitError::Bounds(format!("bevel {:?}", self.bevel)));
        }
        Ok(())
    }
}

/// Per-layer `(μ, α)` and the bevel offset, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<(f64, f64)>,
    pub bevel: f64,
}

impl Parameters {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            layers: scenario.layers.iter().map(|l| (l.mu, l.alpha)).collect(),
            bevel: scenario.bevel.offset,
        }
    }

    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.clone();
        for (l, &(mu, alpha)) in s.layers.iter_mut().zip(&self.layers) {
            l.mu = mu;
            l.alpha = alpha;
        }
        s.bevel.offset = self.bevel;
        s
    }

    fn encode(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.layers.iter().flat_map(|&(mu, a)| [mu.log10(), a]).collect();
        x.push(self.bevel * 1e3);
        x
    }

    fn decode(x: &[f64], bounds: &Bounds) -> Self {
        let n = (x.len() - 1) / 2;
        let layers = (0..n)
            .map(|i| {
                let log_mu = x[2 * i].clamp(bounds.mu.0.log10(), bounds.mu.1.log10());
                (
                    10f64.powf(log_mu).clamp(bounds.mu.0, bounds.mu.1),
                    x[2 * i + 1].clamp(bounds.alpha.0, bounds.alpha.1),
                )
            })
            .collect();
        Self {
            layers,
            bevel: (x[x.len() - 1] * 1e-3).clamp(bounds.bevel.0, bounds.bevel.1),
        }
    }

    fn check(&self, bounds: &Bounds) -> Result<(), FitError> {
        let within = |name: String, v: f64, (lo, hi): (f64, f64)| {
            if v >= lo && v <= hi {
                Ok(())
            } else {
                Err(FitError::OutOfBounds { name, value: v, lo, hi })
            }
        };
        for (i, &(mu, alpha)) in self.layers.iter().enumerate() {
            within(format!("layers[{i}].mu"), mu, bounds.mu)?;
            within(format!("layers[{i}].alpha"), alpha, bounds.alpha)?;
        }
        within("bevel".into(), self.bevel, bounds.bevel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitCase {
    pub scenario: Scenario,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub bounds: Bounds,
    /// Starting point; defaults to the parameters of the first case.
    pub initial: Option<Parameters>,
    pub restarts: usize,
    pub max_evaluations: usize,
    /// Stop a restart when the simplex objective spread falls below this (m).
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            initial: None,
            restarts: 3,
            max_evaluations: 600,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Parameters,
    /// Mean in-plane error (m).
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration; never increases.
    pub history: Vec<f64>,
}

/// Mean in-plane error of one case, `+∞` when the run fails.
pub fn case_error(case: &FitCase, parameters: &Parameters) -> f64 {
    match simulate_case(case, parameters) {
        Ok(report) => report.mean_ipe,
        Err(e) => {
            warn!("objective evaluation failed for {:?}: {e}", case.scenario.name);
            f64::INFINITY
        }
    }
}

/// Runs the case script with `parameters` and compares the in-tissue part of
/// the needle with the measured shape.
pub fn simulate_case(case: &FitCase, parameters: &Parameters) -> Result<ErrorReport, String> {
    let scenario = parameters.apply(&case.scenario);
    let sim = scenario.simulator().map_err(|e| e.to_string())?;
    let mut state = scenario.initial_state(&sim);
    for inputs in &scenario.script {
        sim.step(&mut state, inputs).map_err(|e| e.to_string())?;
    }
    let curve = state.inserted_polyline();
    ErrorReport::evaluate(&case.scenario.name, &curve, &case.ground_truth.points, None).map_err(|e| e.to_string())
}

/// Mean of the per-case errors, evaluated in parallel and summed in case
/// order.
pub fn objective(cases: &[FitCase], parameters: &Parameters) -> f64 {
    let errors: Vec<f64> = cases.par_iter().map(|c| case_error(c, parameters)).collect();
    errors.iter().sum::<f64>() / errors.len() as f64
}

pub fn fit_parameters(cases: &[FitCase], options: &FitOptions) -> Result<FitResult, FitError> {
    let first = cases.first().ok_or(FitError::NoCases)?;
    let layers = first.scenario.layers.len();
    for (i, c) in cases.iter().enumerate() {
        if c.scenario.layers.len() != layers {
            return Err(FitError::LayerMismatch {
                case: i,
                expected: layers,
                got: c.scenario.layers.len(),
            });
        }
    }
    options.bounds.validate()?;
    let initial = options.initial.clone().unwrap_or_else(|| Parameters::of(&first.scenario));
    if initial.layers.len() != layers {
        return Err(FitError::LayerMismatch {
            case: 0,
            expected: layers,
            got: initial.layers.len(),
        });
    }
    initial.check(&options.bounds)?;

    let bounds = options.bounds;
    let mut f = |x: &[f64]| objective(cases, &Parameters::decode(x, &bounds));
    let mut step: Vec<f64> = (0..layers).flat_map(|_| [0.5, 0.25]).collect();
    step.push(0.25 * (bounds.bevel.1 - bounds.bevel.0).max(1e-6) * 1e3);

    let nm = NelderMeadOptions {
        max_evaluations: options.max_evaluations,
        f_tolerance: options.tolerance,
        ..NelderMeadOptions::default()
    };
    let mut x = initial.encode();
    let mut total = Minimum {
        x: x.clone(),
        f: f64::INFINITY,
        iterations: 0,
        evaluations: 0,
        converged: false,
        history: Vec::new(),
    };
    for restart in 0..options.restarts.max(1) {
        let scale = 0.5f64.powi(restart as i32);
        let steps: Vec<f64> = step.iter().map(|s| s * scale).collect();
        let m = nelder_mead(&mut f, &x, &steps, &nm);
        info!(
            "restart {restart}: objective {:.4e} m after {} evaluations",
            m.f, m.evaluations
        );
        total.iterations += m.iterations;
        total.evaluations += m.evaluations;
        for h in &m.history {
            let best = total.history.last().copied().unwrap_or(f64::INFINITY).min(*h);
            total.history.push(best);
        }
        if m.f <= total.f {
            total.x = m.x.clone();
            total.f = m.f;
            total.converged = m.converged;
        }
        x = total.x.clone();
    }

    Ok(FitResult {
        parameters: Parameters::decode(&total.x, &bounds),
        objective: total.f,
        iterations: total.iterations,
        evaluations: total.evaluations,
        converged: total.converged,
        history: total.history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Converged when the spread of simplex values is at most this.
    pub f_tolerance: f64,
    /// Also converged when every vertex lies this close to the best one.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 1000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Downhill simplex minimisation with the standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½). NaN counts as `+∞`.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    options: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if step[i] != 0.0 { step[i] } else { 1e-3 };
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        history.push(best);

        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= options.x_tolerance || (worst.is_finite() && worst - best <= options.f_tolerance) {
            converged = true;
            break;
        }
        if evaluations >= options.max_evaluations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst_x = simplex[n].0.clone();
        let reflected = lerp(&centroid, &worst_x, -1.0);
        let fr = eval(&reflected, &mut evaluations);

        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst_x, -2.0);
            let fe = eval(&expanded, &mut evaluations);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[n].1 {
                let c = lerp(&centroid, &reflected, 0.5);
                let v = eval(&c, &mut evaluations);
                (c, v)
            } else {
                let c = lerp(&centroid, &worst_x, 0.5);
                let v = eval(&c, &mut evaluations);
                (c, v)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (contracted, fc);
            } else {
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = lerp(&best_x, &vertex.0, 0.5);
                    let v = eval(&x, &mut evaluations);
                    *vertex = (x, v);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        iterations,
        evaluations,
        converged,
        history,
    }
}

/// Fit dataset description.
///
/// ```toml
/// [[case]]
/// scenario = "insertion1.toml"
/// ground_truth = "insertion1.csv"
///
/// [bounds]
/// mu = ["100 Pa", "1 GPa"]
/// alpha = [-3.0, 3.0]
/// bevel = ["0 mm", "0.5 mm"]
///
/// [options]
/// restarts = 3
/// max_evaluations = 600
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    case: Vec<RawCase>,
    bounds: Option<RawBounds>,
    options: Option<RawOptions>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    scenario: PathBuf,
    ground_truth: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    mu: Option<(String, String)>,
    alpha: Option<(f64, f64)>,
    bevel: Option<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    restarts: Option<usize>,
    max_evaluations: Option<usize>,
    tolerance: Option<String>,
}

/// Loads a manifest into fit cases and options.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(Vec<FitCase>, FitOptions), FitError> {
    let path = path.as_ref();
    let err = |message: String| FitError::Manifest {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let raw: RawManifest = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));

    let mut options = FitOptions::default();
    if let Some(b) = raw.bounds {
        let pair = |p: (String, String), dim| -> Result<(f64, f64), FitError> {
            Ok((
                parse_quantity(&p.0, dim).map_err(&err)?,
                parse_quantity(&p.1, dim).map_err(&err)?,
            ))
        };
        if let Some(mu) = b.mu {
            options.bounds.mu = pair(mu, Dimension::Pressure)?;
        }
        if let Some(alpha) = b.alpha {
            options.bounds.alpha = alpha;
        }
        if let Some(bevel) = b.bevel {
            options.bounds.bevel = pair(bevel, Dimension::Length)?;
        }
    }
    if let Some(o) = raw.options {
        if let Some(r) = o.restarts {
            options.restarts = r;
        }
        if let Some(m) = o.max_evaluations {
            options.max_evaluations = m;
        }
        if let Some(t) = o.tolerance {
            options.tolerance = parse_quantity(&t, Dimension::Length).map_err(&err)?;
        }
    }
    options.bounds.validate()?;

    let cases = raw
        .case
        .iter()
        .map(|c| {
            Ok(FitCase {
                scenario: Scenario::load(dir.join(&c.scenario))?,
                ground_truth: GroundTruth::load(dir.join(&c.ground_truth))?,
            })
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    if cases.is_empty() {
        return Err(FitError::NoCases);
    }
    for c in &cases {
        Parameters::of(&c.scenario).check(&options.bounds)?;
    }
    Ok((cases, options))
}
