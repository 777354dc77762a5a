//! Interactive session host, independent of any transport.
//!
//! A [`Session`] owns one simulation state and applies numbered commands
//! strictly in order. Every applied command publishes one [`Snapshot`] to
//! all subscribers. Each subscriber has a bounded queue; when it falls more
//! than [`FEED_CAPACITY`] snapshots behind, the oldest are dropped and a gap
//! marker is delivered in their place, so a slow consumer never stalls the
//! stepping loop.
//!
//! Commands use SI units. Snapshot lengths are in millimetres.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presets;
use crate::scenario::Scenario;
use crate::sim::{Bevel, ControlInput, ConvergenceReport, SimError, SimState, Simulator, VInput};
use crate::trace::{SimTrace, TraceRecord};

pub const FEED_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioRef {
    Preset(String),
    /// Scenario file contents (TOML).
    Inline(String),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<Scenario, SessionError> {
        match self {
            ScenarioRef::Preset(name) => {
                Scenario::from_preset(name).map_err(|_| SessionError::UnknownScenario(name.clone()))
            }
            ScenarioRef::Inline(text) => Scenario::from_toml(text).map_err(|e| SessionError::Malformed(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", content = "payload", rename_all = "snake_case")]
pub enum SessionCommand {
    LoadScenario(ScenarioRef),
    SetVInput(VInput),
    Advance { distance: f64 },
    Retract { distance: f64 },
    Reset,
    GetState,
    SetBevel { offset: f64, direction: i8 },
}

impl SessionCommand {
    /// Parses the `cmd` name and its `payload` object.
    pub fn from_parts(cmd: &str, payload: Option<serde_json::Value>) -> Result<Self, SessionError> {
        let mut obj = serde_json::Map::new();
        obj.insert("cmd".into(), serde_json::Value::String(cmd.to_string()));
        if let Some(p) = payload.filter(|p| !p.is_null()) {
            obj.insert("payload".into(), p);
        }
        serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| SessionError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("out-of-order command: expected seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("malformed command: {0}")]
    Malformed(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("step failed: {0}")]
    Step(#[from] SimError),
    #[error("session closed")]
    Closed,
}

impl SessionError {
    pub fn expected_seq(&self) -> Option<u64> {
        match self {
            SessionError::OutOfOrder { expected, .. } => Some(*expected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerView {
    pub name: String,
    pub mu: f64,
    pub alpha: f64,
    /// Point on the layer's entry boundary (mm).
    pub point: [f64; 2],
    /// Direction into the layer (rad).
    pub normal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipView {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Immutable view of a session after a command; lengths in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scenario: String,
    pub step: u64,
    pub inserted: bool,
    pub depth: f64,
    pub tip: TipView,
    pub base: [f64; 2],
    pub template: Option<[f64; 2]>,
    pub polyline: Vec<[f64; 2]>,
    pub constraints: Vec<[f64; 2]>,
    pub layers: Vec<LayerView>,
    pub report: ConvergenceReport,
    /// Inputs of the last step, SI units.
    pub inputs: Vec<ControlInput>,
}

fn mm(p: &Point2<f64>) -> [f64; 2] {
    [p.x * 1e3, p.y * 1e3]
}

impl Snapshot {
    pub fn capture(scenario: &Scenario, state: &SimState, inputs: &[ControlInput]) -> Self {
        let tip = state.tip_pose();
        let base_frame = state.base_frame.to_isometry();
        Self {
            scenario: scenario.name.clone(),
            step: state.step,
            inserted: state.is_inserted(),
            depth: state.depth() * 1e3,
            tip: TipView {
                x: tip.x * 1e3,
                y: tip.y * 1e3,
                heading: tip.heading,
            },
            base: state.polyline.first().map(mm).unwrap_or([0.0, 0.0]),
            template: state
                .controls
                .template
                .map(|t| mm(&(base_frame * Point2::new(t.abscissa, t.ordinate)))),
            polyline: state.polyline.iter().map(mm).collect(),
            constraints: state.constraints_world().iter().map(mm).collect(),
            layers: scenario
                .layers
                .iter()
                .map(|l| LayerView {
                    name: l.name.clone(),
                    mu: l.mu,
                    alpha: l.alpha,
                    point: mm(&l.boundary.point),
                    normal: l.boundary.normal_angle(),
                })
                .collect(),
            report: state.report,
            inputs: inputs.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedEvent {
    Snapshot(Arc<Snapshot>),
    /// `dropped` snapshots were discarded before the next one.
    Gap {
        dropped: u64,
    },
    /// Nothing new.
    Heartbeat,
    Closed,
}

#[derive(Debug, Default)]
struct Queue {
    items: VecDeque<Arc<Snapshot>>,
    dropped: u64,
    closed: bool,
}

/// Read side of a session's snapshot feed.
#[derive(Debug, Clone)]
pub struct Subscription {
    queue: Arc<Mutex<Queue>>,
}

impl Subscription {
    /// Next event without blocking.
    pub fn poll(&self) -> FeedEvent {
        let mut q = self.queue.lock().expect("feed lock");
        if q.dropped > 0 {
            let dropped = std::mem::take(&mut q.dropped);
            return FeedEvent::Gap { dropped };
        }
        match q.items.pop_front() {
            Some(s) => FeedEvent::Snapshot(s),
            None if q.closed => FeedEvent::Closed,
            None => FeedEvent::Heartbeat,
        }
    }

    pub fn pending(&self) -> usize {
        self.queue.lock().expect("feed lock").items.len()
    }
}

#[derive(Debug, Default)]
struct Feed {
    subscribers: Vec<Arc<Mutex<Queue>>>,
}

impl Feed {
    fn subscribe(&mut self) -> Subscription {
        let queue = Arc::new(Mutex::new(Queue::default()));
        self.subscribers.push(queue.clone());
        Subscription { queue }
    }

    fn publish(&mut self, snapshot: &Arc<Snapshot>) {
        self.subscribers.retain(|q| Arc::strong_count(q) > 1);
        for q in &self.subscribers {
            let mut q = q.lock().expect("feed lock");
            if q.items.len() == FEED_CAPACITY {
                q.items.pop_front();
                q.dropped += 1;
            }
            q.items.push_back(snapshot.clone());
        }
    }

    fn close(&mut self) {
        for q in self.subscribers.drain(..) {
            q.lock().expect("feed lock").closed = true;
        }
    }
}

/// One simulation owned by one client.
#[derive(Debug)]
pub struct Session {
    /// Scenario as opened or loaded; `reset` returns to it.
    initial: Scenario,
    scenario: Scenario,
    sim: Simulator,
    state: SimState,
    last_seq: u64,
    snapshot: Arc<Snapshot>,
    log: Vec<(u64, SessionCommand)>,
    trace: SimTrace,
    feed: Feed,
    closed: bool,
}

impl Session {
    pub fn open(scenario: &ScenarioRef) -> Result<Self, SessionError> {
        Self::from_scenario(scenario.resolve()?)
    }

    pub fn from_scenario(scenario: Scenario) -> Result<Self, SessionError> {
        let sim = scenario.simulator().map_err(|e| SessionError::Malformed(e.to_string()))?;
        let state = scenario.initial_state(&sim);
        let snapshot = Arc::new(Snapshot::capture(&scenario, &state, &[]));
        Ok(Self {
            initial: scenario.clone(),
            scenario,
            sim,
            state,
            last_seq: 0,
            snapshot,
            log: Vec::new(),
            trace: SimTrace::default(),
            feed: Feed::default(),
            closed: false,
        })
    }

    /// Sequence number the next command must carry.
    pub fn expected_seq(&self) -> u64 {
        self.last_seq + 1
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.clone()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    /// Applied commands in order.
    pub fn log(&self) -> &[(u64, SessionCommand)] {
        &self.log
    }

    pub fn subscribe(&mut self) -> Subscription {
        self.feed.subscribe()
    }

    /// Applies `command` if `seq` is the expected number. A rejected command
    /// leaves the session untouched and does not consume the number.
    pub fn submit(&mut self, seq: u64, command: SessionCommand) -> Result<Arc<Snapshot>, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        if seq != self.expected_seq() {
            return Err(SessionError::OutOfOrder {
                expected: self.expected_seq(),
                got: seq,
            });
        }
        self.apply(&command)?;
        self.last_seq = seq;
        self.log.push((seq, command));
        self.feed.publish(&self.snapshot);
        Ok(self.snapshot.clone())
    }

    fn apply(&mut self, command: &SessionCommand) -> Result<(), SessionError> {
        let step = |inputs: Vec<ControlInput>, s: &mut Self| -> Result<(), SessionError> {
            let mut state = s.state.clone();
            s.sim.step(&mut state, &inputs)?;
            s.trace.records.push(TraceRecord::capture(&state, &inputs));
            s.state = state;
            s.snapshot = Arc::new(Snapshot::capture(&s.scenario, &s.state, &inputs));
            Ok(())
        };
        let distance = |d: f64| {
            if d.is_finite() && d >= 0.0 {
                Ok(d)
            } else {
                Err(SessionError::Malformed(format!("distance {d} must be finite and >= 0")))
            }
        };
        match command {
            SessionCommand::GetState => Ok(()),
            SessionCommand::Advance { distance: d } => step(vec![ControlInput::advance(distance(*d)?)], self),
            SessionCommand::Retract { distance: d } => step(vec![ControlInput::advance(-distance(*d)?)], self),
            SessionCommand::SetVInput(v) => step(vec![ControlInput::V(*v)], self),
            SessionCommand::SetBevel { offset, direction } => {
                let bevel = Bevel::new(*offset, *direction).map_err(|e| SessionError::Malformed(e.to_string()))?;
                self.state.bevel = bevel;
                self.scenario.bevel = bevel;
                self.snapshot = Arc::new(Snapshot::capture(&self.scenario, &self.state, &[]));
                Ok(())
            }
            SessionCommand::Reset => {
                self.restart(self.initial.clone());
                Ok(())
            }
            SessionCommand::LoadScenario(r) => {
                let scenario = r.resolve()?;
                let sim = scenario.simulator().map_err(|e| SessionError::Malformed(e.to_string()))?;
                self.sim = sim;
                self.initial = scenario.clone();
                self.restart(scenario);
                Ok(())
            }
        }
    }

    fn restart(&mut self, scenario: Scenario) {
        self.state = scenario.initial_state(&self.sim);
        self.snapshot = Arc::new(Snapshot::capture(&scenario, &self.state, &[]));
        self.scenario = scenario;
        self.trace = SimTrace::default();
    }

    /// Ends the feed for all subscribers.
    pub fn close(&mut self) {
        self.closed = true;
        self.feed.close();
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.feed.close();
    }
}

pub fn preset_names() -> Vec<&'static str> {
    presets::names()
}
