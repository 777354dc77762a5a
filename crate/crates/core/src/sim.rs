//! Interactive insertion loop.
//!
//! Each [`Simulator::step`] reads the control inputs, checks for first
//! contact, relaxes the needle to equilibrium against the tissue foundation in
//! the constraint frame, and then applies the axial insertion or retraction
//! geometrically. Constraint points are laid down at the tip every
//! `constraint_spacing` of insertion depth; the newest one is offset by the
//! bevel so the next equilibrium solve pulls the tip sideways.
//!
//! Lateral control inputs ("V-inputs") are expressed in the base frame: the
//! frame of the needle's initial pose, x along the initial heading. They are
//! persistent settings turned into essential boundary conditions on every
//! solve. Axial inputs ("H-inputs") larger than one element are split into
//! element-sized sub-steps, each preceded by its own equilibrium solve.

use std::collections::BTreeMap;

use log::debug;
use nalgebra::{Isometry2, Point2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{self, BeamMesh, BeamProperties, EssentialBc, FemError, FoundationPatch};
use crate::frames::{make_frames, FramePair, Pose2};
use crate::tissue::{force_density, ForceMode, TissueDomain, TissueError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Tissue(#[from] TissueError),
    #[error("invalid needle: {0}")]
    InvalidNeedle(String),
    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),
    #[error("{0} requires tissue contact; before contact only base inputs are accepted")]
    PreContactInput(&'static str),
    #[error("node {node} has its {dof} prescribed twice")]
    OverConstrained { node: usize, dof: &'static str },
    #[error("node index {index} out of range (needle has {nodes} nodes)")]
    NodeOutOfRange { index: usize, nodes: usize },
    #[error("axial increment {delta} exceeds one element ({limit}); use step() to subdivide")]
    AdvanceTooLarge { delta: f64, limit: f64 },
    #[error("non-finite input value")]
    NonFinite,
}

/// Needle geometry and material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedleSpec {
    pub beam: BeamProperties,
    /// Total needle length (m).
    pub length: f64,
    /// Element length `h` (m).
    pub element_size: f64,
}

impl NeedleSpec {
    pub const DEFAULT_YOUNGS_MODULUS: f64 = 80e9;
    pub const DEFAULT_OUTER_DIAMETER: f64 = 1.27e-3;
    pub const DEFAULT_INNER_DIAMETER: f64 = 1.0e-3;
    pub const DEFAULT_LENGTH: f64 = 0.150;
    pub const DEFAULT_ELEMENT_SIZE: f64 = 1e-3;

    pub fn new(beam: BeamProperties, length: f64, element_size: f64) -> Result<Self, SimError> {
        if !(element_size > 0.0 && element_size.is_finite()) {
            return Err(SimError::InvalidNeedle(format!(
                "element size {element_size} must be positive"
            )));
        }
        if !(length >= element_size && length.is_finite()) {
            return Err(SimError::InvalidNeedle(format!(
                "length {length} must be at least one element"
            )));
        }
        let n = (length / element_size).round();
        if (n * element_size - length).abs() > 1e-9 * length {
            return Err(SimError::InvalidNeedle(format!(
                "element size {element_size} does not divide length {length}"
            )));
        }
        Ok(Self {
            beam,
            length,
            element_size,
        })
    }

    pub fn elements(&self) -> usize {
        (self.length / self.element_size).round() as usize
    }

    pub fn nodes(&self) -> usize {
        self.elements() + 1
    }
}

impl Default for NeedleSpec {
    fn default() -> Self {
        let beam = BeamProperties::hollow_tube(
            Self::DEFAULT_YOUNGS_MODULUS,
            Self::DEFAULT_OUTER_DIAMETER,
            Self::DEFAULT_INNER_DIAMETER,
        )
        .expect("default tube is valid");
        Self::new(beam, Self::DEFAULT_LENGTH, Self::DEFAULT_ELEMENT_SIZE).expect("default needle is valid")
    }
}

/// Bevel offset applied to each newly created constraint point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bevel {
    /// Offset magnitude `b` (m).
    pub offset: f64,
    /// Bevel face orientation, `+1` or `−1`.
    pub direction: i8,
}

impl Bevel {
    pub fn new(offset: f64, direction: i8) -> Result<Self, SimError> {
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(SimError::InvalidNeedle(format!("bevel offset {offset} must be >= 0")));
        }
        if direction != 1 && direction != -1 {
            return Err(SimError::InvalidNeedle(format!(
                "bevel direction must be +1 or -1, got {direction}"
            )));
        }
        Ok(Self { offset, direction })
    }

    pub fn none() -> Self {
        Self {
            offset: 0.0,
            direction: 1,
        }
    }

    pub fn signed_offset(&self) -> f64 {
        f64::from(self.direction) * self.offset
    }

    pub fn flipped(&self) -> Self {
        Self {
            offset: self.offset,
            direction: -self.direction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Under-relaxation weight ω of the fixed-point update.
    pub relaxation: f64,
    /// Convergence threshold on the largest deflection change (m).
    pub tolerance: f64,
    pub max_iterations: u32,
    pub force_mode: ForceMode,
    /// Axial spacing of constraint points (m); `None` means one element.
    pub constraint_spacing: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            tolerance: 1e-7,
            max_iterations: 50,
            force_mode: ForceMode::Approximate,
            constraint_spacing: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(SimError::InvalidSolver(format!(
                "relaxation {} must lie in (0, 1]",
                self.relaxation
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(SimError::InvalidSolver("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SimError::InvalidSolver("max_iterations must be >= 1".into()));
        }
        if let Some(s) = self.constraint_spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SimError::InvalidSolver(format!("constraint spacing {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Tissue reference point in frame C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPoint {
    pub station: f64,
    /// Includes the bevel offset.
    pub ordinate: f64,
    pub layer: usize,
    /// Insertion depth at which this point was laid down.
    pub creation_depth: f64,
}

/// Lateral ("vertical") control input, in the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum VInput {
    /// Lateral offset and/or heading of the needle base.
    Base {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        deflection: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
    },
    /// Guide fixed at `abscissa`; holds the nearest node at `ordinate` with
    /// zero slope.
    Template { abscissa: f64, ordinate: f64 },
    ReleaseTemplate,
    /// Prescribed deflection and/or slope at a node (0 = base).
    Node {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        deflection: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
    },
    ReleaseNode { index: usize },
}

/// One control command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlInput {
    V(VInput),
    /// Signed axial advance (m); negative retracts.
    H { advance: f64 },
}

impl ControlInput {
    pub fn advance(delta: f64) -> Self {
        Self::H { advance: delta }
    }

    pub fn base(deflection: f64, slope: f64) -> Self {
        Self::V(VInput::Base {
            deflection: Some(deflection),
            slope: Some(slope),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub abscissa: f64,
    pub ordinate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeSetting {
    pub deflection: Option<f64>,
    pub slope: Option<f64>,
}

/// Persistent V-input settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub base_deflection: f64,
    pub base_slope: f64,
    pub template: Option<Template>,
    pub nodes: BTreeMap<usize, NodeSetting>,
}

/// Outcome of one or more equilibrium solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Largest iteration count over the solves.
    pub iterations: u32,
    /// Largest final deflection change (m).
    pub residual: f64,
    pub converged: bool,
    /// Elements whose stretch hit the floor at the final iterate.
    pub clamp_count: u32,
    pub solves: u32,
}

impl Default for ConvergenceReport {
    fn default() -> Self {
        Self {
            iterations: 0,
            residual: 0.0,
            converged: true,
            clamp_count: 0,
            solves: 0,
        }
    }
}

impl ConvergenceReport {
    fn absorb(&mut self, other: &ConvergenceReport) {
        self.iterations = self.iterations.max(other.iterations);
        self.residual = self.residual.max(other.residual);
        self.converged &= other.converged;
        self.clamp_count += other.clamp_count;
        self.solves += other.solves;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeedleState {
    /// Rigid, straight, outside tissue.
    Free { base: Pose2 },
    Inserted {
        contact: Pose2,
        frames: FramePair,
        mesh: BeamMesh,
        /// Interleaved `[u, θ]` per node, frame C.
        dofs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub needle: NeedleState,
    /// Sorted by station.
    pub constraints: Vec<ConstraintPoint>,
    pub controls: Controls,
    pub bevel: Bevel,
    /// Initial base pose; V-inputs are expressed in this frame.
    pub base_frame: Pose2,
    pub report: ConvergenceReport,
    /// Node positions in W, base first.
    pub polyline: Vec<Point2<f64>>,
}

impl SimState {
    pub fn frames(&self) -> Option<&FramePair> {
        match &self.needle {
            NeedleState::Inserted { frames, .. } => Some(frames),
            NeedleState::Free { .. } => None,
        }
    }

    pub fn is_inserted(&self) -> bool {
        matches!(self.needle, NeedleState::Inserted { .. })
    }

    /// Tip station minus entry station; zero before contact.
    pub fn depth(&self) -> f64 {
        match &self.needle {
            NeedleState::Inserted { mesh, .. } => mesh.last_station(),
            NeedleState::Free { .. } => 0.0,
        }
    }

    pub fn tip_pose(&self) -> Pose2 {
        match &self.needle {
            NeedleState::Free { base } => {
                let tip = self.polyline.last().copied().unwrap_or_else(|| base.position());
                Pose2::new(tip.x, tip.y, base.heading)
            }
            NeedleState::Inserted {
                frames, mesh, dofs, ..
            } => {
                let n = mesh.nodes - 1;
                let p = frames.to_world(&Point2::new(mesh.station(n), dofs[2 * n]));
                Pose2::new(p.x, p.y, frames.heading() + dofs[2 * n + 1].atan())
            }
        }
    }

    /// Constraint points mapped to W.
    pub fn constraints_world(&self) -> Vec<Point2<f64>> {
        match self.frames() {
            Some(f) => self
                .constraints
                .iter()
                .map(|c| f.to_world(&Point2::new(c.station, c.ordinate)))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Part of the needle inside tissue, entry point first, in W.
    pub fn inserted_polyline(&self) -> Vec<Point2<f64>> {
        match &self.needle {
            NeedleState::Free { .. } => Vec::new(),
            NeedleState::Inserted {
                frames, mesh, dofs, ..
            } => {
                if mesh.last_station() <= 0.0 {
                    return Vec::new();
                }
                let mut out = Vec::new();
                let s0 = mesh.first_station().max(0.0);
                if let Ok((u0, _)) = fem::evaluate(mesh, dofs, s0) {
                    out.push(frames.to_world(&Point2::new(s0, u0)));
                }
                for n in 0..mesh.nodes {
                    let s = mesh.station(n);
                    if s > 1e-12 * mesh.spacing {
                        out.push(frames.to_world(&Point2::new(s, dofs[2 * n])));
                    }
                }
                out
            }
        }
    }

    /// Deflections `(station, u)` in frame C; empty before contact.
    pub fn deflection_profile(&self) -> Vec<(f64, f64)> {
        match &self.needle {
            NeedleState::Inserted { mesh, dofs, .. } => {
                (0..mesh.nodes).map(|n| (mesh.station(n), dofs[2 * n])).collect()
            }
            NeedleState::Free { .. } => Vec::new(),
        }
    }
}

/// Immutable scene: needle, tissue and solver settings.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub needle: NeedleSpec,
    pub domain: TissueDomain,
    pub solver: SolverConfig,
}

impl Simulator {
    pub fn new(needle: NeedleSpec, domain: TissueDomain, solver: SolverConfig) -> Result<Self, SimError> {
        solver.validate()?;
        Ok(Self {
            needle,
            domain,
            solver,
        })
    }

    pub fn constraint_spacing(&self) -> f64 {
        self.solver.constraint_spacing.unwrap_or(self.needle.element_size)
    }

    /// Straight needle with its base at `base`, pointing along `base.heading`.
    pub fn initial_state(&self, base: Pose2, bevel: Bevel) -> SimState {
        let mut state = SimState {
            step: 0,
            needle: NeedleState::Free { base },
            constraints: Vec::new(),
            controls: Controls::default(),
            bevel,
            base_frame: base,
            report: ConvergenceReport::default(),
            polyline: Vec::new(),
        };
        self.refresh_polyline(&mut state);
        state
    }

    /// First-contact pose when a free needle's tip lies in tissue.
    pub fn detect_contact(&self, state: &SimState) -> Option<Pose2> {
        match &state.needle {
            NeedleState::Free { base } => {
                let tip = base.position() + base.direction() * self.needle.length;
                self.domain
                    .layer_at(&tip)
                    .map(|_| Pose2::new(tip.x, tip.y, base.heading))
            }
            NeedleState::Inserted { .. } => None,
        }
    }

    fn start_contact(&self, state: &mut SimState, contact: Pose2) {
        let frames = make_frames(&contact);
        let mesh = BeamMesh::new(-self.needle.length, self.needle.element_size, self.needle.elements())
            .expect("needle spec validated");
        let layer = self.domain.layer_at(&contact.position()).unwrap_or(0);
        debug!("contact at ({:.6}, {:.6}) in layer {layer}", contact.x, contact.y);
        state.constraints = vec![ConstraintPoint {
            station: 0.0,
            ordinate: 0.0,
            layer,
            creation_depth: 0.0,
        }];
        state.needle = NeedleState::Inserted {
            contact,
            frames,
            dofs: vec![0.0; mesh.dofs()],
            mesh,
        };
    }

    /// One full control cycle. Empty `inputs` only advance the step counter.
    pub fn step(&self, state: &mut SimState, inputs: &[ControlInput]) -> Result<ConvergenceReport, SimError> {
        state.step += 1;
        if inputs.is_empty() {
            return Ok(state.report);
        }

        let mut pieces = Vec::new();
        for input in inputs {
            match input {
                ControlInput::V(v) => self.apply_v_input(state, v)?,
                ControlInput::H { advance } => {
                    if !advance.is_finite() {
                        return Err(SimError::NonFinite);
                    }
                    pieces.extend(self.subdivide(*advance));
                }
            }
        }

        if let Some(contact) = self.detect_contact(state) {
            self.start_contact(state, contact);
        }

        let mut report = ConvergenceReport::default();
        if state.is_inserted() {
            report.absorb(&self.equilibrium_solve(state)?);
        }
        for (i, piece) in pieces.iter().enumerate() {
            if i > 0 && state.is_inserted() {
                report.absorb(&self.equilibrium_solve(state)?);
            }
            self.advance(state, *piece)?;
        }

        state.report = report;
        self.refresh_polyline(state);
        Ok(report)
    }

    fn subdivide(&self, delta: f64) -> Vec<f64> {
        if delta == 0.0 {
            return Vec::new();
        }
        let h = self.needle.element_size;
        let n = ((delta.abs() / h) - 1e-9).ceil().max(1.0) as usize;
        vec![delta / n as f64; n]
    }

    fn apply_v_input(&self, state: &mut SimState, input: &VInput) -> Result<(), SimError> {
        let finite = |v: Option<f64>| v.is_none_or(f64::is_finite);
        match *input {
            VInput::Base { deflection, slope } => {
                if !finite(deflection) || !finite(slope) {
                    return Err(SimError::NonFinite);
                }
                if let Some(d) = deflection {
                    state.controls.base_deflection = d;
                }
                if let Some(s) = slope {
                    state.controls.base_slope = s;
                }
                if let NeedleState::Free { base } = &mut state.needle {
                    // rigid motion: lateral offset and heading in the base frame
                    let frame = state.base_frame.to_isometry();
                    let mut local = frame.inverse() * base.position();
                    local.y = state.controls.base_deflection;
                    let p = frame * local;
                    *base = Pose2::new(p.x, p.y, state.base_frame.heading + state.controls.base_slope);
                }
                Ok(())
            }
            VInput::Template { abscissa, ordinate } => {
                if !state.is_inserted() {
                    return Err(SimError::PreContactInput("template input"));
                }
                if !abscissa.is_finite() || !ordinate.is_finite() {
                    return Err(SimError::NonFinite);
                }
                state.controls.template = Some(Template { abscissa, ordinate });
                Ok(())
            }
            VInput::ReleaseTemplate => {
                state.controls.template = None;
                Ok(())
            }
            VInput::Node {
                index,
                deflection,
                slope,
            } => {
                if !state.is_inserted() {
                    return Err(SimError::PreContactInput("node input"));
                }
                if index >= self.needle.nodes() {
                    return Err(SimError::NodeOutOfRange {
                        index,
                        nodes: self.needle.nodes(),
                    });
                }
                if !finite(deflection) || !finite(slope) {
                    return Err(SimError::NonFinite);
                }
                state.controls.nodes.insert(index, NodeSetting { deflection, slope });
                Ok(())
            }
            VInput::ReleaseNode { index } => {
                state.controls.nodes.remove(&index);
                Ok(())
            }
        }
    }

    /// Essential boundary conditions in frame C from the current V-inputs.
    pub fn boundary_conditions(&self, state: &SimState) -> Result<Vec<EssentialBc>, SimError> {
        let NeedleState::Inserted {
            frames, mesh, dofs, ..
        } = &state.needle
        else {
            return Ok(Vec::new());
        };
        let base_frame = state.base_frame.to_isometry();
        let c_to_base: Isometry2<f64> = base_frame.inverse() * frames.constraint_to_world;
        let delta = frames.heading() - state.base_frame.heading;

        // frame-C deflection that puts station `s` on the base-frame line y = target
        let deflection_for = |s: f64, target: f64| {
            let a = (c_to_base * Point2::new(s, 0.0)).y;
            let b = (c_to_base * Point2::new(s, 1.0)).y - a;
            (target - a) / b
        };
        let slope_for = |angle: f64| (angle - delta).tan();

        let mut table: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
        let mut put = |node: usize, u: Option<f64>, t: Option<f64>| -> Result<(), SimError> {
            let entry = table.entry(node).or_default();
            if let Some(u) = u {
                if entry.0.replace(u).is_some() {
                    return Err(SimError::OverConstrained { node, dof: "deflection" });
                }
            }
            if let Some(t) = t {
                if entry.1.replace(t).is_some() {
                    return Err(SimError::OverConstrained { node, dof: "slope" });
                }
            }
            Ok(())
        };

        put(
            0,
            Some(deflection_for(mesh.station(0), state.controls.base_deflection)),
            Some(slope_for(state.controls.base_slope)),
        )?;

        if let Some(t) = state.controls.template {
            let node = (0..mesh.nodes)
                .min_by(|&a, &b| {
                    let xa = (c_to_base * Point2::new(mesh.station(a), dofs[2 * a])).x;
                    let xb = (c_to_base * Point2::new(mesh.station(b), dofs[2 * b])).x;
                    (xa - t.abscissa).abs().total_cmp(&(xb - t.abscissa).abs())
                })
                .expect("mesh has nodes");
            put(
                node,
                Some(deflection_for(mesh.station(node), t.ordinate)),
                Some(slope_for(0.0)),
            )?;
        }

        for (&index, setting) in &state.controls.nodes {
            if index >= mesh.nodes {
                return Err(SimError::NodeOutOfRange {
                    index,
                    nodes: mesh.nodes,
                });
            }
            put(
                index,
                setting.deflection.map(|d| deflection_for(mesh.station(index), d)),
                setting.slope.map(slope_for),
            )?;
        }

        Ok(table
            .into_iter()
            .map(|(node, (deflection, slope))| EssentialBc {
                node,
                deflection,
                slope,
            })
            .collect())
    }

    /// Element → constraint index for every element whose midpoint lies in
    /// tissue. Ties go to the deeper constraint.
    pub fn element_assignments(&self, mesh: &BeamMesh, constraints: &[ConstraintPoint]) -> Vec<(usize, usize)> {
        if constraints.is_empty() {
            return Vec::new();
        }
        let tol = 1e-9 * mesh.spacing;
        (0..mesh.elements())
            .filter_map(|e| {
                let m = mesh.midpoint(e);
                if m < -tol {
                    return None;
                }
                let j = constraints.partition_point(|c| c.station < m);
                let c = if j == 0 {
                    0
                } else if j == constraints.len() {
                    j - 1
                } else {
                    let deeper = constraints[j].station - m;
                    let shallower = m - constraints[j - 1].station;
                    if deeper <= shallower + tol {
                        j
                    } else {
                        j - 1
                    }
                };
                Some((e, c))
            })
            .collect()
    }

    /// Spring patches for the current iterate; second value counts clamped
    /// stretches.
    pub fn foundation_patches(
        &self,
        mesh: &BeamMesh,
        dofs: &[f64],
        constraints: &[ConstraintPoint],
        assignments: &[(usize, usize)],
    ) -> Result<(Vec<FoundationPatch>, u32), SimError> {
        let mut clamps = 0;
        let mut patches = Vec::with_capacity(assignments.len());
        for &(e, c) in assignments {
            let cp = &constraints[c];
            let (u, slope) = fem::evaluate_in_element(mesh, dofs, e, 0.5);
            let layer = self.domain.layer(cp.layer);
            let sample = force_density(u - cp.ordinate, slope, layer, self.solver.force_mode)?;
            clamps += u32::from(sample.stretch.clamped);
            patches.push(FoundationPatch {
                element: e,
                stiffness: sample.stiffness,
                reference: cp.ordinate,
            });
        }
        Ok((patches, clamps))
    }

    /// Under-relaxed fixed-point iteration to static equilibrium.
    ///
    /// Stops when the largest deflection change drops to the tolerance or
    /// after `max_iterations`; in the latter case the iterate with the
    /// smallest change is kept and the report is flagged non-converged.
    pub fn equilibrium_solve(&self, state: &mut SimState) -> Result<ConvergenceReport, SimError> {
        let bcs = self.boundary_conditions(state)?;
        let NeedleState::Inserted { mesh, dofs, .. } = &mut state.needle else {
            return Ok(ConvergenceReport::default());
        };
        let assignments = self.element_assignments(mesh, &state.constraints);
        let omega = self.solver.relaxation;
        let mut fixed = vec![false; dofs.len()];
        for bc in &bcs {
            fixed[2 * bc.node] |= bc.deflection.is_some();
            fixed[2 * bc.node + 1] |= bc.slope.is_some();
        }

        let mut current = dofs.clone();
        let mut best: Option<(f64, Vec<f64>, u32)> = None;
        let mut report = ConvergenceReport {
            converged: false,
            solves: 1,
            ..ConvergenceReport::default()
        };

        for itr in 1..=self.solver.max_iterations {
            let (patches, clamps) = self.foundation_patches(mesh, &current, &state.constraints, &assignments)?;
            let system = fem::assemble(mesh, &self.needle.beam, &patches, &bcs, &[])?;
            let solution = fem::solve(&system)?;

            let mut change = 0.0_f64;
            for (i, (d, target)) in current.iter_mut().zip(&solution.dofs).enumerate() {
                let next = if fixed[i] {
                    *target
                } else {
                    (1.0 - omega) * *d + omega * target
                };
                if i % 2 == 0 {
                    change = change.max((next - *d).abs());
                }
                *d = next;
            }

            report.iterations = itr;
            report.residual = change;
            report.clamp_count = clamps;
            if change <= self.solver.tolerance {
                report.converged = true;
                break;
            }
            if best.as_ref().is_none_or(|(c, _, _)| change < *c) {
                best = Some((change, current.clone(), clamps));
            }
        }

        if !report.converged {
            if let Some((change, iterate, clamps)) = best {
                if change < report.residual {
                    current = iterate;
                    report.residual = change;
                    report.clamp_count = clamps;
                }
            }
            debug!(
                "equilibrium not converged after {} iterations (change {:e})",
                report.iterations, report.residual
            );
        }
        *dofs = current;
        Ok(report)
    }

    /// Geometric insertion (`delta > 0`) or retraction by at most one element.
    pub fn advance(&self, state: &mut SimState, delta: f64) -> Result<(), SimError> {
        let h = self.needle.element_size;
        if delta.abs() > h * (1.0 + 1e-9) {
            return Err(SimError::AdvanceTooLarge { delta, limit: h });
        }
        match state.needle {
            NeedleState::Free { base } => {
                let dir = base.direction();
                let len = self.needle.length;
                let tip_old = base.position() + dir * len;
                let tip_new = tip_old + dir * delta;
                let entry = self.domain.entry();
                let (s0, s1) = (entry.signed_distance(&tip_old), entry.signed_distance(&tip_new));
                if delta > 0.0 && s0 >= 0.0 {
                    self.start_contact(state, Pose2::new(tip_old.x, tip_old.y, base.heading));
                    self.advance_inserted(state, delta);
                } else if delta > 0.0 && s1 >= 0.0 {
                    let t = s0 / (s0 - s1);
                    let crossing = tip_old + (tip_new - tip_old) * t;
                    let b = crossing - dir * len;
                    state.needle = NeedleState::Free {
                        base: Pose2::new(b.x, b.y, base.heading),
                    };
                    self.start_contact(state, Pose2::new(crossing.x, crossing.y, base.heading));
                    self.advance_inserted(state, delta * (1.0 - t));
                } else {
                    let b = base.position() + dir * delta;
                    state.needle = NeedleState::Free {
                        base: Pose2::new(b.x, b.y, base.heading),
                    };
                }
            }
            NeedleState::Inserted { .. } => self.advance_inserted(state, delta),
        }
        Ok(())
    }

    fn advance_inserted(&self, state: &mut SimState, delta: f64) {
        let spacing = self.constraint_spacing();
        let tol = 1e-9 * spacing;
        let bevel = state.bevel.signed_offset();
        let NeedleState::Inserted {
            frames, mesh, dofs, ..
        } = &mut state.needle
        else {
            return;
        };
        mesh.origin += delta;
        let depth = mesh.last_station();

        if delta > 0.0 {
            let u_tip = dofs[2 * (mesh.nodes - 1)];
            loop {
                let station = state.constraints.len() as f64 * spacing;
                if station > depth + tol {
                    break;
                }
                let world = frames.to_world(&Point2::new(station, u_tip));
                let layer = self
                    .domain
                    .layer_at(&world)
                    .or_else(|| state.constraints.last().map(|c| c.layer))
                    .unwrap_or(0);
                state.constraints.push(ConstraintPoint {
                    station,
                    ordinate: u_tip + bevel,
                    layer,
                    creation_depth: station,
                });
            }
        } else if depth < -tol {
            // pulled out past the entry point: back to a rigid needle held by the base
            let base = frames.to_world(&Point2::new(mesh.station(0), dofs[0]));
            let heading = state.base_frame.heading + state.controls.base_slope;
            debug!("needle retracted out of tissue");
            state.needle = NeedleState::Free {
                base: Pose2::new(base.x, base.y, heading),
            };
            state.constraints.clear();
            state.controls.template = None;
            state.controls.nodes.clear();
        } else {
            state.constraints.retain(|c| c.creation_depth <= depth + tol);
        }
    }

    pub fn refresh_polyline(&self, state: &mut SimState) {
        state.polyline = match &state.needle {
            NeedleState::Free { base } => {
                let dir = base.direction();
                (0..self.needle.nodes())
                    .map(|i| base.position() + dir * (i as f64 * self.needle.element_size))
                    .collect()
            }
            NeedleState::Inserted {
                frames, mesh, dofs, ..
            } => (0..mesh.nodes)
                .map(|n| frames.to_world(&Point2::new(mesh.station(n), dofs[2 * n])))
                .collect(),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tissue::{Boundary, OgdenLayer};

    fn homogeneous(mu: f64) -> Simulator {
        let domain = TissueDomain::new(vec![OgdenLayer::new("gel", mu, 1.0, Boundary::vertical(0.0))]).unwrap();
        Simulator::new(NeedleSpec::default(), domain, SolverConfig::default()).unwrap()
    }

    fn start(sim: &Simulator, bevel: Bevel) -> SimState {
        // tip 1 mm before the entry boundary
        sim.initial_state(Pose2::new(-0.151, 0.0, 0.0), bevel)
    }

    #[test]
    fn no_contact_before_entry() {
        let sim = homogeneous(2e5);
        let state = start(&sim, Bevel::none());
        assert!(sim.detect_contact(&state).is_none());
        assert_eq!(state.polyline.len(), 151);
    }

    #[test]
    fn contact_at_crossing_pose() {
        let sim = homogeneous(2e5);
        let mut state = sim.initial_state(Pose2::new(-0.1505, 0.002, 0.0), Bevel::none());
        sim.step(&mut state, &[ControlInput::advance(1e-3)]).unwrap();
        let NeedleState::Inserted { contact, .. } = &state.needle else {
            panic!("expected contact");
        };
        // segment from x = -0.5 mm to +0.5 mm crosses x = 0 at y = 2 mm
        assert!(contact.x.abs() < 1e-15);
        assert!((contact.y - 0.002).abs() < 1e-15);
        assert!((state.depth() - 0.5e-3).abs() < 1e-12);
    }

    #[test]
    fn contact_when_starting_on_boundary() {
        let sim = homogeneous(2e5);
        let state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), Bevel::none());
        assert_eq!(sim.detect_contact(&state), Some(Pose2::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn one_constraint_per_element() {
        let sim = homogeneous(2e5);
        let mut state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), Bevel::none());
        sim.step(&mut state, &[ControlInput::advance(1e-3)]).unwrap();
        assert_eq!(state.constraints.len(), 2);
        sim.step(&mut state, &[ControlInput::advance(1e-3)]).unwrap();
        assert_eq!(state.constraints.len(), 3);
    }

    #[test]
    fn bevel_offsets_new_constraint() {
        let sim = homogeneous(2e5);
        let bevel = Bevel::new(0.085e-3, 1).unwrap();
        let mut state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), bevel);
        sim.step(&mut state, &[ControlInput::advance(1e-3)]).unwrap();
        assert!((state.constraints[1].ordinate - 8.5e-5).abs() < 1e-18);
    }

    #[test]
    fn advance_then_retract_restores_constraints() {
        let sim = homogeneous(2e5);
        let mut state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), Bevel::new(1e-4, 1).unwrap());
        sim.step(&mut state, &[ControlInput::advance(5e-3)]).unwrap();
        let before = state.constraints.clone();
        sim.step(&mut state, &[ControlInput::advance(10e-3)]).unwrap();
        sim.step(&mut state, &[ControlInput::advance(-10e-3)]).unwrap();
        assert_eq!(state.constraints, before);
    }

    #[test]
    fn retract_out_of_tissue_clears_frames() {
        let sim = homogeneous(2e5);
        let mut state = start(&sim, Bevel::none());
        sim.step(&mut state, &[ControlInput::advance(4e-3)]).unwrap();
        assert!(state.is_inserted());
        sim.step(&mut state, &[ControlInput::advance(-5e-3)]).unwrap();
        assert!(!state.is_inserted());
        assert!(state.constraints.is_empty());
        assert!(state.frames().is_none());
    }

    #[test]
    fn unloaded_clamped_needle_converges_immediately() {
        let sim = homogeneous(2e5);
        let mut state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), Bevel::none());
        sim.start_contact(&mut state, Pose2::new(0.0, 0.0, 0.0));
        let report = sim.equilibrium_solve(&mut state).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn empty_step_only_counts() {
        let sim = homogeneous(2e5);
        let mut state = start(&sim, Bevel::none());
        sim.step(&mut state, &[ControlInput::advance(3e-3)]).unwrap();
        let before = state.clone();
        sim.step(&mut state, &[]).unwrap();
        assert_eq!(state.step, before.step + 1);
        assert_eq!(state.needle, before.needle);
        assert_eq!(state.constraints, before.constraints);
    }

    #[test]
    fn template_rejected_before_contact() {
        let sim = homogeneous(2e5);
        let mut state = start(&sim, Bevel::none());
        let t = ControlInput::V(VInput::Template {
            abscissa: 0.05,
            ordinate: 0.0,
        });
        assert!(matches!(sim.step(&mut state, &[t]), Err(SimError::PreContactInput(_))));
    }

    #[test]
    fn base_node_input_overconstrains() {
        let sim = homogeneous(2e5);
        let mut state = start(&sim, Bevel::none());
        sim.step(&mut state, &[ControlInput::advance(3e-3)]).unwrap();
        let v = ControlInput::V(VInput::Node {
            index: 0,
            deflection: Some(0.0),
            slope: None,
        });
        assert!(matches!(
            sim.step(&mut state, &[v]),
            Err(SimError::OverConstrained { node: 0, .. })
        ));
    }

    #[test]
    fn large_advance_is_subdivided() {
        let sim = homogeneous(2e5);
        let mut state = sim.initial_state(Pose2::new(-0.150, 0.0, 0.0), Bevel::new(1e-4, 1).unwrap());
        let report = sim.step(&mut state, &[ControlInput::advance(5e-3)]).unwrap();
        assert_eq!(report.solves, 5);
        assert_eq!(state.constraints.len(), 6);
        assert!(matches!(sim.advance(&mut state, 2e-3), Err(SimError::AdvanceTooLarge { .. })));
    }

    #[test]
    fn rigid_base_motion_before_contact() {
        let sim = homogeneous(2e5);
        let mut state = start(&sim, Bevel::none());
        sim.step(&mut state, &[ControlInput::base(0.002, 0.0)]).unwrap();
        let tip = state.tip_pose();
        assert!((tip.y - 0.002).abs() < 1e-15);
        assert!((tip.x + 0.001).abs() < 1e-12);
    }
}
