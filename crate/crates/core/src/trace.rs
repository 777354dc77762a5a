//! Per-step simulation records, stored as newline-delimited JSON.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Pose2;
use crate::sim::{ConstraintPoint, ControlInput, ConvergenceReport, SimError, SimState, Simulator};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// State after one step, in W and SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub inputs: Vec<ControlInput>,
    pub inserted: bool,
    pub depth: f64,
    pub tip: Pose2,
    /// Full needle, base first.
    pub polyline: Vec<[f64; 2]>,
    /// In-tissue part, entry point first.
    pub in_tissue: Vec<[f64; 2]>,
    pub constraints: Vec<[f64; 2]>,
    pub constraint_points: Vec<ConstraintPoint>,
    pub report: ConvergenceReport,
}

fn xy(points: Vec<Point2<f64>>) -> Vec<[f64; 2]> {
    points.into_iter().map(|p| [p.x, p.y]).collect()
}

impl TraceRecord {
    pub fn capture(state: &SimState, inputs: &[ControlInput]) -> Self {
        Self {
            step: state.step,
            inputs: inputs.to_vec(),
            inserted: state.is_inserted(),
            depth: state.depth(),
            tip: state.tip_pose(),
            polyline: state.polyline.iter().map(|p| [p.x, p.y]).collect(),
            in_tissue: xy(state.inserted_polyline()),
            constraints: xy(state.constraints_world()),
            constraint_points: state.constraints.clone(),
            report: state.report,
        }
    }

    pub fn in_tissue_points(&self) -> Vec<Point2<f64>> {
        self.in_tissue.iter().map(|&[x, y]| Point2::new(x, y)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.report.converged)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<(), TraceError> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, TraceError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: i + 1, source })?);
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Runs `script` one step per entry and records every step.
pub fn run_script(
    sim: &Simulator,
    state: &mut SimState,
    script: &[Vec<ControlInput>],
) -> Result<SimTrace, SimError> {
    let mut trace = SimTrace::default();
    for inputs in script {
        sim.step(state, inputs)?;
        trace.records.push(TraceRecord::capture(state, inputs));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{insertion_script, Scenario};

    fn short_trace() -> SimTrace {
        let s = Scenario::from_preset("ph2").unwrap();
        let sim = s.simulator().unwrap();
        let mut state = s.initial_state(&sim);
        run_script(&sim, &mut state, &insertion_script(1e-3, 4)).unwrap()
    }

    #[test]
    fn empty_trace_is_empty_file() {
        let t = SimTrace::default();
        assert_eq!(t.to_ndjson(), "");
        assert_eq!(SimTrace::read_from("".as_bytes()).unwrap(), t);
    }

    #[test]
    fn round_trip_is_exact() {
        let t = short_trace();
        assert_eq!(t.records.len(), 4);
        let back = SimTrace::read_from(t.to_ndjson().as_bytes()).unwrap();
        assert_eq!(back, t);
        let one = SimTrace {
            records: vec![t.records[3].clone()],
        };
        assert_eq!(SimTrace::read_from(one.to_ndjson().as_bytes()).unwrap(), one);
    }

    #[test]
    fn non_converged_flag_survives() {
        let mut t = short_trace();
        t.records[2].report.converged = false;
        let back = SimTrace::read_from(t.to_ndjson().as_bytes()).unwrap();
        assert!(!back.records[2].report.converged);
        assert!(!back.all_converged());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ndjson");
        let t = short_trace();
        t.save(&path).unwrap();
        assert_eq!(SimTrace::load(&path).unwrap(), t);
    }
}
