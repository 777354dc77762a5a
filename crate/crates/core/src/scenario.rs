//! Scenario files: needle, tissue layers, initial pose, solver settings and an
//! optional input script.
//!
//! Every dimensional value carries its unit as a string (`"1.27 mm"`,
//! `"80 GPa"`, `"10 deg"`). A scenario may name a preset; fields it leaves
//! out are then taken from the preset, and `[[layers]]`, when present,
//! replaces the preset's layer stack as a whole.
//!
//! ```toml
//! preset = "ph2"
//!
//! [bevel]
//! direction = -1
//!
//! [pose]
//! x = "-151 mm"
//! y = "2 mm"
//! heading = "0 deg"
//!
//! [[script]]
//! advance = "1 mm"
//! repeat = 50
//! ```

use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::BeamProperties;
use crate::frames::Pose2;
use crate::presets;
use crate::sim::{Bevel, ControlInput, NeedleSpec, SimError, SimState, Simulator, SolverConfig, VInput};
use crate::tissue::{Boundary, ForceMode, OgdenLayer, TissueDomain, DEFAULT_THICKNESS};
use crate::units::{format_quantity, parse_quantity, Dimension};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("scenario syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn field(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        path: path.into(),
        message: message.into(),
    }
}

/// Needle material and geometry as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedleGeometry {
    pub youngs_modulus: f64,
    pub outer_diameter: f64,
    pub inner_diameter: f64,
    pub length: f64,
    pub element_size: f64,
}

impl Default for NeedleGeometry {
    fn default() -> Self {
        Self {
            youngs_modulus: NeedleSpec::DEFAULT_YOUNGS_MODULUS,
            outer_diameter: NeedleSpec::DEFAULT_OUTER_DIAMETER,
            inner_diameter: NeedleSpec::DEFAULT_INNER_DIAMETER,
            length: NeedleSpec::DEFAULT_LENGTH,
            element_size: NeedleSpec::DEFAULT_ELEMENT_SIZE,
        }
    }
}

impl NeedleGeometry {
    pub fn spec(&self) -> Result<NeedleSpec, SimError> {
        let beam = BeamProperties::hollow_tube(self.youngs_modulus, self.outer_diameter, self.inner_diameter)?;
        NeedleSpec::new(beam, self.length, self.element_size)
    }
}

/// Inputs applied together in one simulation step.
pub type ScriptStep = Vec<ControlInput>;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub preset: Option<String>,
    pub needle: NeedleGeometry,
    pub bevel: Bevel,
    pub layers: Vec<OgdenLayer>,
    /// Initial base pose in W.
    pub pose: Pose2,
    pub solver: SolverConfig,
    pub script: Vec<ScriptStep>,
}

/// Base 1 mm short of the entry boundary, needle pointing along +x.
pub const DEFAULT_POSE: Pose2 = Pose2 {
    x: -0.151,
    y: 0.0,
    heading: 0.0,
};

impl Scenario {
    pub fn from_preset(name: &str) -> Result<Self, ScenarioError> {
        let preset = presets::find(name).ok_or_else(|| {
            field(
                "preset",
                format!("unknown preset {name:?}; available: {}", presets::names().join(", ")),
            )
        })?;
        Ok(Self {
            name: name.to_string(),
            preset: Some(name.to_string()),
            needle: NeedleGeometry::default(),
            bevel: Bevel::new(preset.bevel_offset(), 1).expect("preset bevel valid"),
            layers: preset.layers(),
            pose: DEFAULT_POSE,
            solver: SolverConfig::default(),
            script: Vec::new(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut s = Self::from_toml(&text)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)?;
        raw.resolve()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawScenario::from_scenario(self)).expect("scenario serializes")
    }

    pub fn domain(&self) -> Result<TissueDomain, ScenarioError> {
        TissueDomain::new(self.layers.clone()).map_err(|e| field("layers", e.to_string()))
    }

    pub fn simulator(&self) -> Result<Simulator, ScenarioError> {
        let needle = self.needle.spec().map_err(|e| field("needle", e.to_string()))?;
        Simulator::new(needle, self.domain()?, self.solver).map_err(|e| field("solver", e.to_string()))
    }

    pub fn initial_state(&self, sim: &Simulator) -> SimState {
        sim.initial_state(self.pose, self.bevel)
    }

    /// Fully validates the scenario.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.simulator().map(|_| ())
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    needle: Option<RawNeedle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bevel: Option<RawBevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<RawPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<RawSolver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<RawLayer>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    script: Vec<RawStep>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNeedle {
    youngs_modulus: Option<String>,
    outer_diameter: Option<String>,
    inner_diameter: Option<String>,
    length: Option<String>,
    element_size: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBevel {
    offset: Option<String>,
    direction: Option<i8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: String,
    y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heading: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    relaxation: Option<f64>,
    tolerance: Option<String>,
    max_iterations: Option<u32>,
    force_mode: Option<ForceMode>,
    constraint_spacing: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    mu: String,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thickness: Option<String>,
    boundary: RawBoundary,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    x: String,
    y: String,
    /// Direction pointing into the layer; defaults to +x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normal: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repeat: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<RawBase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<RawTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    release_template: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    node: Vec<RawNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    release_node: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    advance: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawBase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deflection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    x: String,
    y: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawNode {
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deflection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<String>,
}

fn quantity(path: &str, text: &str, dim: Dimension) -> Result<f64, ScenarioError> {
    parse_quantity(text, dim).map_err(|m| field(path, m))
}

fn opt_quantity(path: &str, text: &Option<String>, dim: Dimension) -> Result<Option<f64>, ScenarioError> {
    text.as_deref().map(|t| quantity(path, t, dim)).transpose()
}

fn length(v: f64) -> String {
    format_quantity(v, Dimension::Length)
}

fn angle(v: f64) -> String {
    format_quantity(v, Dimension::Angle)
}

impl RawScenario {
    fn resolve(self) -> Result<Scenario, ScenarioError> {
        use Dimension::*;
        let mut s = match &self.preset {
            Some(p) => Scenario::from_preset(p)?,
            None => Scenario {
                name: String::new(),
                preset: None,
                needle: NeedleGeometry::default(),
                bevel: Bevel::none(),
                layers: Vec::new(),
                pose: DEFAULT_POSE,
                solver: SolverConfig::default(),
                script: Vec::new(),
            },
        };
        s.name = self.name.unwrap_or_default();

        if let Some(n) = &self.needle {
            let g = &mut s.needle;
            if let Some(v) = opt_quantity("needle.youngs_modulus", &n.youngs_modulus, Pressure)? {
                g.youngs_modulus = v;
            }
            if let Some(v) = opt_quantity("needle.outer_diameter", &n.outer_diameter, Length)? {
                g.outer_diameter = v;
            }
            if let Some(v) = opt_quantity("needle.inner_diameter", &n.inner_diameter, Length)? {
                g.inner_diameter = v;
            }
            if let Some(v) = opt_quantity("needle.length", &n.length, Length)? {
                g.length = v;
            }
            if let Some(v) = opt_quantity("needle.element_size", &n.element_size, Length)? {
                g.element_size = v;
            }
        }
        s.needle.spec().map_err(|e| field("needle", e.to_string()))?;

        if let Some(b) = &self.bevel {
            let offset = opt_quantity("bevel.offset", &b.offset, Length)?.unwrap_or(s.bevel.offset);
            let direction = b.direction.unwrap_or(s.bevel.direction);
            s.bevel = Bevel::new(offset, direction).map_err(|e| field("bevel", e.to_string()))?;
        }

        if let Some(p) = &self.pose {
            s.pose = Pose2::new(
                quantity("pose.x", &p.x, Length)?,
                quantity("pose.y", &p.y, Length)?,
                opt_quantity("pose.heading", &p.heading, Angle)?.unwrap_or(0.0),
            );
        }

        if let Some(r) = &self.solver {
            let c = &mut s.solver;
            if let Some(v) = r.relaxation {
                c.relaxation = v;
            }
            if let Some(v) = opt_quantity("solver.tolerance", &r.tolerance, Length)? {
                c.tolerance = v;
            }
            if let Some(v) = r.max_iterations {
                c.max_iterations = v;
            }
            if let Some(v) = r.force_mode {
                c.force_mode = v;
            }
            if let Some(v) = opt_quantity("solver.constraint_spacing", &r.constraint_spacing, Length)? {
                c.constraint_spacing = Some(v);
            }
        }

        if let Some(layers) = &self.layers {
            s.layers = layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let path = |f: &str| format!("layers[{i}].{f}");
                    let point = Point2::new(
                        quantity(&path("boundary.x"), &l.boundary.x, Length)?,
                        quantity(&path("boundary.y"), &l.boundary.y, Length)?,
                    );
                    let normal = opt_quantity(&path("boundary.normal"), &l.boundary.normal, Angle)?.unwrap_or(0.0);
                    let mut layer = OgdenLayer::new(
                        l.name.clone().unwrap_or_else(|| format!("L{}", i + 1)),
                        quantity(&path("mu"), &l.mu, Pressure)?,
                        l.alpha,
                        Boundary::new(point, normal),
                    );
                    layer.gamma = l.gamma.unwrap_or(0.0);
                    layer.thickness = opt_quantity(&path("thickness"), &l.thickness, Length)?.unwrap_or(DEFAULT_THICKNESS);
                    Ok(layer)
                })
                .collect::<Result<_, ScenarioError>>()?;
        }
        if s.layers.is_empty() {
            return Err(field("layers", "scenario defines no tissue layers and names no preset"));
        }

        s.script = expand_script(&self.script)?;
        s.validate()?;
        Ok(s)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let g = &s.needle;
        let c = &s.solver;
        let mut script: Vec<RawStep> = Vec::new();
        for step in &s.script {
            let raw = RawStep::from_inputs(step);
            match script.last_mut() {
                Some(prev) if prev.same_inputs(&raw) => {
                    prev.repeat = Some(prev.repeat.unwrap_or(1) + 1);
                }
                _ => script.push(raw),
            }
        }
        RawScenario {
            name: (!s.name.is_empty()).then(|| s.name.clone()),
            preset: s.preset.clone(),
            needle: Some(RawNeedle {
                youngs_modulus: Some(format_quantity(g.youngs_modulus, Dimension::Pressure)),
                outer_diameter: Some(length(g.outer_diameter)),
                inner_diameter: Some(length(g.inner_diameter)),
                length: Some(length(g.length)),
                element_size: Some(length(g.element_size)),
            }),
            bevel: Some(RawBevel {
                offset: Some(length(s.bevel.offset)),
                direction: Some(s.bevel.direction),
            }),
            pose: Some(RawPose {
                x: length(s.pose.x),
                y: length(s.pose.y),
                heading: Some(angle(s.pose.heading)),
            }),
            solver: Some(RawSolver {
                relaxation: Some(c.relaxation),
                tolerance: Some(length(c.tolerance)),
                max_iterations: Some(c.max_iterations),
                force_mode: Some(c.force_mode),
                constraint_spacing: c.constraint_spacing.map(length),
            }),
            layers: Some(
                s.layers
                    .iter()
                    .map(|l| RawLayer {
                        name: Some(l.name.clone()),
                        mu: format_quantity(l.mu, Dimension::Pressure),
                        alpha: l.alpha,
                        gamma: Some(l.gamma),
                        thickness: Some(length(l.thickness)),
                        boundary: RawBoundary {
                            x: length(l.boundary.point.x),
                            y: length(l.boundary.point.y),
                            normal: Some(angle(l.boundary.normal_angle())),
                        },
                    })
                    .collect(),
            ),
            script,
        }
    }
}

impl RawStep {
    fn same_inputs(&self, other: &RawStep) -> bool {
        let strip = |s: &RawStep| RawStep {
            repeat: None,
            base: s.base.as_ref().map(|b| RawBase {
                deflection: b.deflection.clone(),
                slope: b.slope.clone(),
            }),
            template: s.template.as_ref().map(|t| RawTemplate {
                x: t.x.clone(),
                y: t.y.clone(),
            }),
            release_template: s.release_template,
            node: s
                .node
                .iter()
                .map(|n| RawNode {
                    index: n.index,
                    deflection: n.deflection.clone(),
                    slope: n.slope.clone(),
                })
                .collect(),
            release_node: s.release_node.clone(),
            advance: s.advance.clone(),
        };
        strip(self) == strip(other)
    }

    fn resolve(&self, i: usize) -> Result<ScriptStep, ScenarioError> {
        use Dimension::*;
        let path = |f: &str| format!("script[{i}].{f}");
        let mut out = Vec::new();
        if let Some(b) = &self.base {
            out.push(ControlInput::V(VInput::Base {
                deflection: opt_quantity(&path("base.deflection"), &b.deflection, Length)?,
                slope: opt_quantity(&path("base.slope"), &b.slope, Angle)?,
            }));
        }
        if self.release_template == Some(true) {
            out.push(ControlInput::V(VInput::ReleaseTemplate));
        }
        if let Some(t) = &self.template {
            out.push(ControlInput::V(VInput::Template {
                abscissa: quantity(&path("template.x"), &t.x, Length)?,
                ordinate: quantity(&path("template.y"), &t.y, Length)?,
            }));
        }
        for &index in &self.release_node {
            out.push(ControlInput::V(VInput::ReleaseNode { index }));
        }
        for n in &self.node {
            if n.deflection.is_none() && n.slope.is_none() {
                return Err(field(path("node"), "needs a deflection or a slope"));
            }
            out.push(ControlInput::V(VInput::Node {
                index: n.index,
                deflection: opt_quantity(&path("node.deflection"), &n.deflection, Length)?,
                slope: opt_quantity(&path("node.slope"), &n.slope, Angle)?,
            }));
        }
        if let Some(a) = &self.advance {
            out.push(ControlInput::H {
                advance: quantity(&path("advance"), a, Length)?,
            });
        }
        Ok(out)
    }

    fn from_inputs(inputs: &[ControlInput]) -> Self {
        let mut raw = RawStep::default();
        for input in inputs {
            match *input {
                ControlInput::H { advance } => raw.advance = Some(length(advance)),
                ControlInput::V(VInput::Base { deflection, slope }) => {
                    raw.base = Some(RawBase {
                        deflection: deflection.map(length),
                        slope: slope.map(angle),
                    })
                }
                ControlInput::V(VInput::Template { abscissa, ordinate }) => {
                    raw.template = Some(RawTemplate {
                        x: length(abscissa),
                        y: length(ordinate),
                    })
                }
                ControlInput::V(VInput::ReleaseTemplate) => raw.release_template = Some(true),
                ControlInput::V(VInput::Node {
                    index,
                    deflection,
                    slope,
                }) => raw.node.push(RawNode {
                    index,
                    deflection: deflection.map(length),
                    slope: slope.map(angle),
                }),
                ControlInput::V(VInput::ReleaseNode { index }) => raw.release_node.push(index),
            }
        }
        raw
    }
}

fn expand_script(steps: &[RawStep]) -> Result<Vec<ScriptStep>, ScenarioError> {
    let mut script = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let inputs = step.resolve(i)?;
        let repeat = step.repeat.unwrap_or(1);
        if repeat == 0 {
            return Err(field(format!("script[{i}].repeat"), "must be at least 1"));
        }
        for _ in 0..repeat {
            script.push(inputs.clone());
        }
    }
    Ok(script)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    script: Vec<RawStep>,
}

/// Parses a stand-alone script file holding only `[[script]]` entries.
pub fn script_from_toml(text: &str) -> Result<Vec<ScriptStep>, ScenarioError> {
    let raw: RawScript = toml::from_str(text)?;
    expand_script(&raw.script)
}

pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<ScriptStep>, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    script_from_toml(&text)
}

/// Straight insertion script: `steps` advances of `increment` each.
pub fn insertion_script(increment: f64, steps: usize) -> Vec<ScriptStep> {
    vec![vec![ControlInput::advance(increment)]; steps]
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "gel"

[[layers]]
mu = "2e5 Pa"
alpha = 1.0
boundary = { x = "0 mm", y = "0 mm" }

[[script]]
advance = "1 mm"
repeat = 3

[[script]]
base = { deflection = "0.5 mm" }
advance = "2 mm"
"#;

    #[test]
    fn minimal_inline_scenario() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.layers.len(), 1);
        assert_eq!(s.script.len(), 4);
        assert_eq!(s.script[3].len(), 2);
        assert_eq!(s.bevel, Bevel::none());
        assert_eq!(s.pose, DEFAULT_POSE);
    }

    #[test]
    fn script_file_alone() {
        let script = script_from_toml("[[script]]\nadvance = \"2 mm\"\nrepeat = 3\n[[script]]\nbase = { slope = \"1 deg\" }\n").unwrap();
        assert_eq!(script.len(), 4);
        assert_eq!(script[0], vec![ControlInput::advance(2e-3)]);
        assert!(script_from_toml("").unwrap().is_empty());
        assert!(script_from_toml("[[layers]]\nmu = \"1 Pa\"\n").is_err());
    }

    #[test]
    fn preset_ph2() {
        let s = Scenario::from_toml("preset = \"ph2\"").unwrap();
        assert_eq!(s.layers.len(), 4);
        assert_eq!((s.layers[0].mu, s.layers[0].alpha), (2e5, 1.0));
        assert_eq!((s.layers[1].mu, s.layers[1].alpha), (3.3e7, -1.0));
        assert_eq!(s.bevel.offset, 0.085e-3);
    }

    #[test]
    fn preset_fields_can_be_overridden() {
        let s = Scenario::from_toml("preset = \"chicken\"\n[bevel]\ndirection = -1\n").unwrap();
        assert_eq!(s.layers.len(), 1);
        assert_eq!((s.layers[0].mu, s.layers[0].alpha), (1e3, 1.0));
        assert_eq!(s.bevel.direction, -1);
        assert_eq!(s.bevel.offset, 0.085e-3);
    }

    #[test]
    fn zero_element_size_is_rejected() {
        let err = Scenario::from_toml("preset = \"ph2\"\n[needle]\nelement_size = \"0 mm\"\n").unwrap_err();
        assert!(err.to_string().starts_with("needle"), "{err}");
    }

    #[test]
    fn missing_unit_names_the_field() {
        let text = MINIMAL.replace("\"2e5 Pa\"", "\"2e5\"");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().starts_with("layers[0].mu"), "{err}");
    }

    #[test]
    fn overlapping_layers_rejected() {
        let text = r#"
[[layers]]
mu = "1 kPa"
alpha = 1
boundary = { x = "0 mm", y = "0 mm" }
[[layers]]
mu = "1 kPa"
alpha = 1
boundary = { x = "10 mm", y = "0 mm", normal = "30 deg" }
"#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(err.to_string().starts_with("layers"), "{err}");
    }

    #[test]
    fn unknown_preset_and_fields() {
        assert!(Scenario::from_toml("preset = \"ph9\"").is_err());
        assert!(Scenario::from_toml("preset = \"ph2\"\nbogus = 1\n").is_err());
        assert!(Scenario::from_toml("name = \"x\"").is_err());
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        s.pose = Pose2::new(-0.1513, 0.0021, 0.17);
        s.layers[0].gamma = 0.05;
        s.script.push(vec![ControlInput::V(VInput::Template {
            abscissa: 0.01,
            ordinate: 1e-4,
        })]);
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        let preset = Scenario::from_preset("ph3").unwrap();
        assert_eq!(Scenario::from_toml(&preset.to_toml()).unwrap().layers, preset.layers);
    }
}
